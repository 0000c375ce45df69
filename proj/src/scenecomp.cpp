#include "urbanfuture/scenecomp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace urbanfuture {

namespace {

std::uint8_t lower_median(std::vector<std::uint8_t>& values) {
  const auto mid = values.begin() + std::ptrdiff_t((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

}  // namespace

BackgroundModel build_background(const std::vector<ImageU8>& frames,
                                 const std::vector<ImageU8>& masks) {
  if (frames.empty()) throw Error(ErrorKind::EmptyInput, "background needs at least one frame");
  if (!masks.empty() && masks.size() != frames.size()) {
    throw Error(ErrorKind::DimensionMismatch, "one mask per frame is required");
  }
  const int w = frames[0].width, h = frames[0].height;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].width != w || frames[i].height != h || frames[i].channels != 3) {
      throw Error(ErrorKind::DimensionMismatch, "frames must share size and have 3 channels");
    }
    if (!masks.empty() && (masks[i].width != w || masks[i].height != h || masks[i].channels != 1)) {
      throw Error(ErrorKind::DimensionMismatch, "mask does not match its frame");
    }
  }

  BackgroundModel bg;
  bg.image = ImageU8(w, h, 3);
  bg.valid_mask = ImageU8(w, h, 1);
  bg.sample_counts.assign(std::size_t(w) * std::size_t(h), 0);
  std::vector<std::uint8_t> samples;
  samples.reserve(frames.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int count = 0;
      for (std::size_t i = 0; i < frames.size(); ++i) count += masks.empty() || masks[i].at(x, y) == 0;
      const bool fallback = count == 0;
      bg.sample_counts[std::size_t(y) * std::size_t(w) + std::size_t(x)] = count;
      bg.valid_mask.at(x, y) = fallback ? 0 : 255;
      for (int c = 0; c < 3; ++c) {
        samples.clear();
        for (std::size_t i = 0; i < frames.size(); ++i) {
          if (fallback || masks.empty() || masks[i].at(x, y) == 0) samples.push_back(frames[i].at(x, y, c));
        }
        bg.image.at(x, y, c) = lower_median(samples);
      }
    }
  }
  return bg;
}

ImageU8 mask_from_boxes(int width, int height, const std::vector<Box>& boxes, double dilation) {
  ImageU8 mask(width, height, 1);
  const Rect frame{0, 0, width, height};
  for (const auto& b : boxes) {
    const Rect r = b.dilated(dilation).to_rect().intersect(frame);
    for (int y = r.y; y < r.y + r.height; ++y) {
      for (int x = r.x; x < r.x + r.width; ++x) mask.at(x, y) = 255;
    }
  }
  return mask;
}

CompositeFrame composite(const BackgroundModel& bg, std::vector<RenderedCrop> renders,
                         const CompositeOptions& opts) {
  CompositeFrame out;
  out.image = bg.image;
  const int w = bg.image.width, h = bg.image.height;
  const Rect frame{0, 0, w, h};

  std::vector<double> depths;
  depths.reserve(renders.size());
  for (const auto& r : renders) depths.push_back(r.mean_depth());
  std::vector<std::size_t> order(renders.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (depths[a] != depths[b]) return depths[a] > depths[b];
    return renders[a].vehicle_id > renders[b].vehicle_id;
  });

  std::vector<float> zbuf;
  if (opts.per_pixel_depth_test) {
    zbuf.assign(std::size_t(w) * std::size_t(h), std::numeric_limits<float>::infinity());
  }
  for (std::size_t idx : order) {
    const RenderedCrop& r = renders[idx];
    const Rect clipped = r.viewport.intersect(frame);
    if (clipped.empty()) continue;
    for (int y = clipped.y; y < clipped.y + clipped.height; ++y) {
      for (int x = clipped.x; x < clipped.x + clipped.width; ++x) {
        const int lx = x - r.viewport.x, ly = y - r.viewport.y;
        if (r.alpha.at(lx, ly) == 0) continue;
        if (opts.per_pixel_depth_test) {
          float& z = zbuf[std::size_t(y) * std::size_t(w) + std::size_t(x)];
          if (!(r.depth.at(lx, ly) < z)) continue;
          z = r.depth.at(lx, ly);
        }
        for (int c = 0; c < 3; ++c) out.image.at(x, y, c) = r.color.at(lx, ly, c);
      }
    }
    out.placed.push_back({r.vehicle_id, r.viewport, depths[idx]});
  }
  return out;
}

}  // namespace urbanfuture
