#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "urbanfuture/pipeline.hpp"

namespace urbanfuture {

struct VehicleSummary {
  int vehicle_id{0};
  std::optional<int> cad_id;
  std::optional<Box> box;  // at frame 0
};

struct SessionDescriptor {
  std::string session_id;
  std::string clip_id;
  int frame_count{0};
  int width{0};
  int height{0};
  bool approximate_intrinsics{false};
  std::vector<VehicleSummary> vehicles;
  std::vector<int> cad_ids;
  std::vector<std::string> trajectories;  // named polylines shipped with the bundle
};

struct FutureRequest {
  int vehicle_id{0};
  std::vector<Vector2> polyline;
  double horizon{1.0};
  double timestep{0.2};
  RenderMode mode{RenderMode::Normals};
  int reference_frame{0};
  bool align_first_heading{false};
};

struct FutureResult {
  OutputManifest manifest;
  bool cached{false};
};

// One loaded bundle plus lazily built state. Generation is serialized per session.
class Session {
 public:
  Session(std::string id, SceneBundle bundle, std::filesystem::path dir);

  const std::string& id() const { return id_; }
  const SceneBundle& bundle() const { return bundle_; }
  SessionDescriptor descriptor() const;

  const BackgroundModel& background();
  ImageU8 frame(int n) const;

  FutureResult generate(const FutureRequest& req);
  // PNG bytes of frame k (1-based) of a generated clip.
  std::string clip_frame_png(const std::string& clip_id, int k) const;

  int solve_count() const;
  int solve_cache_hits() const;

 private:
  const VehicleSolve& cached_solve(int frame, int vehicle_id);

  std::string id_;
  SceneBundle bundle_;
  std::filesystem::path dir_;
  Pose extrinsics_;
  mutable std::mutex mutex_;
  std::optional<BackgroundModel> background_;
  std::map<std::pair<int, int>, VehicleSolve> solves_;
  std::map<std::string, OutputManifest> clips_;
  int solve_count_{0};
  int solve_hits_{0};
};

class SessionManager {
 public:
  explicit SessionManager(std::filesystem::path sessions_dir);

  // Loads a bundle into a new session; throws NotFound for a missing path.
  SessionDescriptor open(const std::filesystem::path& bundle_path);
  std::shared_ptr<Session> get(const std::string& id) const;

 private:
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  int next_{1};
};

}  // namespace urbanfuture
