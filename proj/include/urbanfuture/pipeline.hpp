#pragma once

#include <optional>
#include <string>
#include <vector>

#include "urbanfuture/posesolve.hpp"
#include "urbanfuture/render.hpp"
#include "urbanfuture/scenecomp.hpp"
#include "urbanfuture/sceneio.hpp"
#include "urbanfuture/traj.hpp"

namespace urbanfuture {

enum class RenderMode { Normals, Appearance };

std::string_view to_string(RenderMode m);
RenderMode parse_render_mode(std::string_view s);

// Camera extrinsics implied by the bundle's homography and intrinsics.
Pose scene_extrinsics(const SceneBundle& bundle);

// Median clean plate with every track box (dilated) masked out.
BackgroundModel scene_background(const SceneBundle& bundle, const std::vector<ImageU8>& frames,
                                 double dilation = 0.1);

struct VehicleSolve {
  int vehicle_id{0};
  int frame{0};
  SolveReport report;
};

// Pose of one vehicle at one frame, seeded from its track box on the ground.
VehicleSolve solve_vehicle(const SceneBundle& bundle, const Pose& extrinsics, int frame, int vehicle_id,
                           const SolverOptions& opts = {});

struct SolveOutcome {
  std::vector<VehicleSolve> solved;   // in request order
  std::vector<std::string> warnings;  // one per skipped vehicle
};

// Solves every vehicle concurrently; vehicles that fail are skipped with a warning.
SolveOutcome solve_vehicles(const SceneBundle& bundle, const Pose& extrinsics, int frame,
                            const std::vector<int>& vehicle_ids, const SolverOptions& opts = {});

// Vehicles that have a track entry, keypoints and a cad model at `frame`, ascending.
std::vector<int> eligible_vehicles(const SceneBundle& bundle, int frame);

struct GenerateOptions {
  int reference_frame{0};
  double horizon{1.0};
  double timestep{0.2};
  RenderMode mode{RenderMode::Normals};
  bool align_first_heading{false};
  bool smooth_heading{false};
  bool per_pixel_depth_test{false};
};

// A drawn path for one vehicle; other vehicles follow their tracks.
struct PolylineOverride {
  int vehicle_id{0};
  std::vector<Vector2> points;
};

struct GeneratedClip {
  std::vector<ImageU8> frames;
  std::vector<FuturePlan> plans;
  std::vector<std::vector<RenderedCrop>> renders;  // per output frame
  std::vector<std::string> warnings;
};

// Plans, renders and composites horizon / timestep future frames over the
// background. Vehicles whose plan or render fails are skipped with a warning.
GeneratedClip generate_clip(const SceneBundle& bundle, const Pose& extrinsics, const BackgroundModel& background,
                            const ImageU8& reference_image, const std::vector<VehicleSolve>& solves,
                            const std::optional<PolylineOverride>& polyline, const GenerateOptions& opts);

// Canonical text of everything that determines a clip's pixels, and its hash.
std::string options_digest(const SceneBundle& bundle, const std::vector<int>& vehicles,
                           const std::optional<PolylineOverride>& polyline, const GenerateOptions& opts,
                           const SolverOptions& solver);

OutputManifest clip_manifest(const SceneBundle& bundle, const std::string& clip_id, const GeneratedClip& clip,
                             const GenerateOptions& opts, const std::string& options_hash);

}  // namespace urbanfuture
