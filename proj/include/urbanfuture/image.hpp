#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace urbanfuture {

// Interleaved, row-major image buffer.
template <typename T>
struct ImageT {
  int width{0};
  int height{0};
  int channels{0};
  std::vector<T> data;

  ImageT() = default;
  ImageT(int w, int h, int c, T fill = T{})
      : width(w), height(h), channels(c), data(std::size_t(w) * std::size_t(h) * std::size_t(c), fill) {}

  bool empty() const { return data.empty(); }

  std::size_t index(int x, int y, int c = 0) const {
    return (std::size_t(y) * std::size_t(width) + std::size_t(x)) * std::size_t(channels) +
           std::size_t(c);
  }
  T& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

  template <typename U>
  bool same_shape(const ImageT<U>& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }

  bool operator==(const ImageT&) const = default;
};

using ImageU8 = ImageT<std::uint8_t>;
using ImageF32 = ImageT<float>;
using ImageI32 = ImageT<std::int32_t>;

// Axis-aligned pixel rectangle, half-open: [x, x + width) x [y, y + height).
struct Rect {
  int x{0};
  int y{0};
  int width{0};
  int height{0};

  bool empty() const { return width <= 0 || height <= 0; }
  long long area() const { return empty() ? 0 : (long long)width * height; }
  bool contains(int px, int py) const {
    return px >= x && py >= y && px < x + width && py < y + height;
  }
  Rect intersect(const Rect& o) const {
    const int x0 = std::max(x, o.x), y0 = std::max(y, o.y);
    const int x1 = std::min(x + width, o.x + o.width), y1 = std::min(y + height, o.y + o.height);
    return {x0, y0, std::max(0, x1 - x0), std::max(0, y1 - y0)};
  }
  bool operator==(const Rect&) const = default;
};

// Real-valued detection box in frame pixels (top-left corner plus size).
struct Box {
  double x{0};
  double y{0};
  double width{0};
  double height{0};

  double bottom_center_x() const { return x + 0.5 * width; }
  double bottom_center_y() const { return y + height; }
  // Smallest integer rectangle covering the box.
  Rect to_rect() const;
  // Grows each side by `fraction` of the box size.
  Box dilated(double fraction) const {
    return {x - fraction * width, y - fraction * height, width * (1 + 2 * fraction),
            height * (1 + 2 * fraction)};
  }
  bool operator==(const Box&) const = default;
};

ImageU8 crop(const ImageU8& image, const Rect& r);

ImageU8 read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const ImageU8& image);
// PNG bytes for in-memory transport.
std::string encode_png(const ImageU8& image);

// Drops or synthesizes channels so that the result has exactly 3.
ImageU8 to_rgb(const ImageU8& image);
// Appends an alpha plane to an RGB image.
ImageU8 with_alpha(const ImageU8& rgb, const ImageU8& alpha);

// Raw little-endian float32, row-major, no header.
void write_depth(const std::filesystem::path& path, const ImageF32& depth);
ImageF32 read_depth(const std::filesystem::path& path, int width, int height);

}  // namespace urbanfuture
