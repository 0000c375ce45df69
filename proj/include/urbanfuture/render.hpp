#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "urbanfuture/cad.hpp"
#include "urbanfuture/geom.hpp"
#include "urbanfuture/image.hpp"

namespace urbanfuture {

// Geometry closer than this to the camera plane is clipped away.
inline constexpr double kNearPlane = 1e-3;

// Output of a render pass, placed in frame coordinates by `viewport`.
// Pixel (i, j) of every buffer samples the frame pixel centre (viewport.x + i, viewport.y + j).
struct RenderedCrop {
  int vehicle_id{0};
  Rect viewport;
  ImageU8 color;     // 3 channels
  ImageU8 alpha;     // 255 where covered, 0 elsewhere
  ImageF32 depth;    // camera depth in meters, +inf where empty
  ImageI32 face_id;  // visible face index, -1 where empty
  bool behind_camera{false};

  double mean_depth() const;
  long long coverage() const;
};

// A 2.5D sketch: colour encodes the camera-space unit normal of the visible face
// as round((n + 1) / 2 * 255) per axis.
using NormalSketch = RenderedCrop;

struct BakedAppearance {
  std::vector<std::array<std::uint8_t, 3>> colors;  // per face
  std::vector<bool> valid;                          // per face
  Pose source_pose;
  Rect source_rect;  // frame placement of the crop the colours came from

  int valid_count() const;
  std::array<std::uint8_t, 3> mean_valid_color() const;
};

// Camera-space unit normals of every face from its winding (v1 - v0) x (v2 - v0).
std::vector<Vector3> face_normals(const CadModel& cad, const Pose& pose);

std::array<std::uint8_t, 3> encode_normal(const Vector3& n);
Vector3 decode_normal(const std::uint8_t* rgb);

// Frame rectangle bounding the projected mesh, clipped to the image. The full
// frame is returned when part of the mesh crosses the near plane.
Rect projected_viewport(const CadModel& cad, const Pose& pose, const CameraIntrinsics& intr,
                        int padding = 2);

// Depth and face-identity pass. Faces are visited in index order and only a
// strictly nearer sample replaces a stored one, so ties keep the lower index.
RenderedCrop rasterize(const CadModel& cad, const Pose& pose, const CameraIntrinsics& intr,
                       const Rect& viewport, bool cull_backfaces);

NormalSketch render_normal_sketch(const CadModel& cad, const Pose& pose,
                                  const CameraIntrinsics& intr, const Rect& viewport);

// Samples the source crop at each face centroid that is front-facing, inside the
// crop and not occluded in the source view. `source_rect` places the crop in the frame.
BakedAppearance bake_appearance(const CadModel& cad, const ImageU8& source_crop,
                                const Rect& source_rect, const Pose& source_pose,
                                const CameraIntrinsics& intr);

// Backface-culled render with baked face colours; invalid faces take the mean
// colour of the valid ones.
RenderedCrop render_appearance(const CadModel& cad, const BakedAppearance& baked, const Pose& pose,
                               const CameraIntrinsics& intr, const Rect& viewport);

}  // namespace urbanfuture
