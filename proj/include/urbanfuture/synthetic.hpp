#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "urbanfuture/cad.hpp"
#include "urbanfuture/render.hpp"
#include "urbanfuture/sceneio.hpp"

namespace urbanfuture {

// Parametric car: a body box with a cabin box on top, outward winding,
// recentred on its vertex centroid. Variants 1..10 differ in proportions.
CadModel make_car_cad(int variant);

// Traffic camera looking across a road that runs along world x.
struct SyntheticCamera {
  CameraIntrinsics intrinsics;
  Pose extrinsics;  // world -> camera
};

SyntheticCamera make_synthetic_camera(int width = 640, int height = 360);

// Asphalt with lane markings below the horizon and a sky gradient above it.
// Texture noise comes from a fixed-seed Mersenne twister.
ImageU8 make_road_plate(const SyntheticCamera& cam, std::uint32_t seed);

// Camera pose of a vehicle standing on the ground at (x, y) with heading `yaw`.
Pose ground_vehicle_pose(const CadModel& cad, const Pose& extrinsics, double x, double y, double yaw);

// Lambert-shaded, backface-culled render in a flat body colour.
RenderedCrop render_shaded(const CadModel& cad, const Pose& pose, const CameraIntrinsics& intr,
                           const std::array<std::uint8_t, 3>& color);

// Pastes `render` onto `frame` where its alpha is set.
void paste(ImageU8& frame, const RenderedCrop& render);

// Tight box around the covered pixels of a render, in frame pixels.
Box alpha_box(const RenderedCrop& render);

struct SyntheticOptions {
  int width{640};
  int height{360};
  int frame_count{12};
  double fps{10.0};
  double start_x{-4.4};
  double speed{0.8};  // meters per frame along world x
  int vehicle_id{1};
  int cad_id{3};
  std::uint32_t seed{20240611};
};

struct SyntheticScene {
  SceneBundle bundle;
  std::vector<ImageU8> frames;
  ImageU8 clean_plate;
  SyntheticCamera camera;
  std::vector<Pose> poses;  // ground-truth camera pose per frame
};

// Exact keypoints (confidence 1, visible) and alpha-derived boxes for every
// frame, plus two trajectories from the frame-0 position: "stationary" (two
// coincident points) and "quarter_turn" (five 2 m chords turning 0 to 90 deg).
SyntheticScene make_synthetic_scene(const SyntheticOptions& opts = {});

}  // namespace urbanfuture
