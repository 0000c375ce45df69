#pragma once

#include <vector>

#include "urbanfuture/image.hpp"
#include "urbanfuture/render.hpp"
#include "urbanfuture/traj.hpp"

namespace urbanfuture {

struct BackgroundModel {
  ImageU8 image;       // 3 channels
  ImageU8 valid_mask;  // 255 where at least one unmasked sample existed
  std::vector<int> sample_counts;  // per pixel
};

struct PlacedRender {
  int vehicle_id{0};
  Rect viewport;
  double mean_depth{0};
};

struct CompositeFrame {
  ImageU8 image;
  std::vector<PlacedRender> placed;  // in paste order
};

// Per-pixel, per-channel median over the samples whose mask is zero. For an even
// number of samples the lower median is used. Pixels masked in every frame fall
// back to the median over all frames and are marked invalid.
BackgroundModel build_background(const std::vector<ImageU8>& frames,
                                 const std::vector<ImageU8>& masks);

// Foreground mask (255 inside) of the given boxes, each dilated by `dilation`
// of its size on every side.
ImageU8 mask_from_boxes(int width, int height, const std::vector<Box>& boxes,
                        double dilation = 0.1);

struct CompositeOptions {
  // Resolve overlaps per pixel by depth instead of by whole-render ordering.
  bool per_pixel_depth_test{false};
};

// Pastes renders far-to-near (mean depth descending, ties: lower vehicle id on top)
// wherever alpha > 0.
CompositeFrame composite(const BackgroundModel& bg, std::vector<RenderedCrop> renders,
                         const CompositeOptions& opts = {});

}  // namespace urbanfuture
