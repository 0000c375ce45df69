#include "urbanfuture/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "urbanfuture/error.hpp"

namespace urbanfuture {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

int color_type_for(int channels) {
  switch (channels) {
    case 1: return PNG_COLOR_TYPE_GRAY;
    case 2: return PNG_COLOR_TYPE_GRAY_ALPHA;
    case 3: return PNG_COLOR_TYPE_RGB;
    case 4: return PNG_COLOR_TYPE_RGBA;
    default: throw Error(ErrorKind::InvalidArgument, "unsupported channel count for PNG");
  }
}

void png_error_fn(png_structp, png_const_charp msg) { throw Error(ErrorKind::Io, msg); }
void png_warning_fn(png_structp, png_const_charp) {}

void append_bytes(png_structp png, png_bytep bytes, png_size_t n) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(bytes), n);
}
void flush_noop(png_structp) {}

template <typename Sink>
void write_png_impl(const ImageU8& image, Sink&& attach) {
  if (image.empty()) throw Error(ErrorKind::InvalidArgument, "cannot encode an empty image");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};
  attach(png);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, image.width, image.height, 8, color_type_for(image.channels),
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = std::size_t(image.width) * image.channels;
  for (int y = 0; y < image.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(image.data.data() + stride * y));
  }
  png_write_end(png, nullptr);
}

}  // namespace

Rect Box::to_rect() const {
  const int x0 = int(std::floor(x)), y0 = int(std::floor(y));
  const int x1 = int(std::ceil(x + width)), y1 = int(std::ceil(y + height));
  return {x0, y0, x1 - x0, y1 - y0};
}

ImageU8 crop(const ImageU8& image, const Rect& r) {
  const Rect c = r.intersect({0, 0, image.width, image.height});
  ImageU8 out(c.width, c.height, image.channels);
  for (int y = 0; y < c.height; ++y) {
    const auto* src = &image.at(c.x, c.y + y);
    std::copy(src, src + std::size_t(c.width) * image.channels, &out.at(0, y));
  }
  return out;
}

ImageU8 read_png(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw Error(ErrorKind::MissingFile, "cannot open image " + path.string());
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};
  png_init_io(png, f.get());
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_packing(png);
  png_read_update_info(png, info);
  const int w = int(png_get_image_width(png, info));
  const int h = int(png_get_image_height(png, info));
  const int c = int(png_get_channels(png, info));
  ImageU8 image(w, h, c);
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) rows[std::size_t(y)] = &image.at(0, y);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  return image;
}

void write_png(const std::filesystem::path& path, const ImageU8& image) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw Error(ErrorKind::Io, "cannot write image " + path.string());
  write_png_impl(image, [&](png_structp png) { png_init_io(png, f.get()); });
}

std::string encode_png(const ImageU8& image) {
  std::string out;
  write_png_impl(image, [&](png_structp png) { png_set_write_fn(png, &out, append_bytes, flush_noop); });
  return out;
}

ImageU8 to_rgb(const ImageU8& image) {
  if (image.channels == 3) return image;
  ImageU8 out(image.width, image.height, 3);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) = image.channels >= 3 ? image.at(x, y, c) : image.at(x, y, 0);
      }
    }
  }
  return out;
}

ImageU8 with_alpha(const ImageU8& rgb, const ImageU8& alpha) {
  if (rgb.width != alpha.width || rgb.height != alpha.height || rgb.channels != 3 ||
      alpha.channels != 1) {
    throw Error(ErrorKind::DimensionMismatch, "alpha plane does not match the colour image");
  }
  ImageU8 out(rgb.width, rgb.height, 4);
  for (int y = 0; y < rgb.height; ++y) {
    for (int x = 0; x < rgb.width; ++x) {
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = rgb.at(x, y, c);
      out.at(x, y, 3) = alpha.at(x, y);
    }
  }
  return out;
}

void write_depth(const std::filesystem::path& path, const ImageF32& depth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write depth file " + path.string());
  out.write(reinterpret_cast<const char*>(depth.data.data()),
            std::streamsize(depth.data.size() * sizeof(float)));
  if (!out) throw Error(ErrorKind::Io, "failed writing depth file " + path.string());
}

ImageF32 read_depth(const std::filesystem::path& path, int width, int height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingFile, "cannot open depth file " + path.string());
  ImageF32 depth(width, height, 1);
  in.read(reinterpret_cast<char*>(depth.data.data()),
          std::streamsize(depth.data.size() * sizeof(float)));
  if (in.gcount() != std::streamsize(depth.data.size() * sizeof(float))) {
    throw Error(ErrorKind::ParseError, "depth file " + path.string() + " is truncated");
  }
  return depth;
}

}  // namespace urbanfuture
