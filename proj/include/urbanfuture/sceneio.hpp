#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "urbanfuture/cad.hpp"
#include "urbanfuture/geom.hpp"
#include "urbanfuture/image.hpp"
#include "urbanfuture/posesolve.hpp"
#include "urbanfuture/traj.hpp"

namespace urbanfuture {

std::string_view tool_version();

// 64-bit FNV-1a as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

struct SceneConfig {
  double fps{10.0};
  double timestep{0.2};
  double horizon{1.0};
  bool operator==(const SceneConfig&) const = default;
};

struct KeypointObservation {
  int frame{0};
  int vehicle_id{0};
  std::vector<Keypoint2D> keypoints;  // in file order
};

struct NamedPolyline {
  std::string name;
  std::vector<Vector2> points;  // frame pixels
};

// Component file names, relative to the bundle directory.
struct BundleLayout {
  std::string frames_dir{"frames"};
  std::string tracks{"tracks.csv"};
  std::string keypoints{"keypoints.txt"};
  std::string homography{"homography.txt"};
  std::string intrinsics{"intrinsics.txt"};
  std::string cad_assignments{"cad_assignments.txt"};
  std::string cad_dir{"cad"};
  std::string trajectories{"trajectories.txt"};
};

struct SceneBundle {
  std::filesystem::path root;
  std::string clip_id;
  BundleLayout layout;
  int frame_count{0};
  int width{0};
  int height{0};
  std::vector<VehicleTrack> tracks;  // sorted by vehicle id
  std::vector<KeypointObservation> keypoints;
  GroundHomography homography;
  CameraIntrinsics intrinsics;
  bool approximate_intrinsics{false};
  std::map<int, int> cad_assignments;  // vehicle id -> cad id
  std::map<int, CadModel> cads;        // every assigned cad id
  SceneConfig config;
  std::vector<NamedPolyline> trajectories;

  // frames_dir/%06d.png
  std::filesystem::path frame_path(int frame) const;
  ImageU8 load_frame(int frame) const;
  std::vector<ImageU8> load_frames() const;
  const VehicleTrack* track(int vehicle_id) const;
  const KeypointObservation* keypoints_for(int frame, int vehicle_id) const;
  const CadModel* cad_for(int vehicle_id) const;
  const NamedPolyline* trajectory(std::string_view name) const;
};

inline constexpr const char* kBundleManifest = "scene.cfg";

// Reads and validates a bundle directory. Nothing on disk is modified.
SceneBundle load_bundle(const std::filesystem::path& dir);

// Writes every component file plus the manifest. Frames must number
// bundle.frame_count. When the bundle has approximate intrinsics no intrinsics
// file is written.
void write_bundle(const SceneBundle& bundle, const std::filesystem::path& dir,
                  const std::vector<ImageU8>& frames);

// Line-oriented component parsers, exposed for tests. `source` labels errors.
std::vector<VehicleTrack> parse_tracks(std::istream& in, const std::string& source);
std::vector<KeypointObservation> parse_keypoints(std::istream& in, const std::string& source);
GroundHomography parse_homography(std::istream& in, const std::string& source);
CameraIntrinsics parse_intrinsics(std::istream& in, const std::string& source);
std::map<int, int> parse_cad_assignments(std::istream& in, const std::string& source);
std::vector<NamedPolyline> parse_trajectories(std::istream& in, const std::string& source);
// "key = value" lines, '#' comments.
std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& source);

struct OutputFrame {
  int index{0};     // 1-based horizon step
  double t{0};      // seconds after the reference frame
  std::string path; // relative to the output directory
  bool operator==(const OutputFrame&) const = default;
};

struct PlanSummary {
  int vehicle_id{0};
  Pose source_pose;
  std::vector<TimedPose> targets;
};

struct OutputManifest {
  std::string clip_id;
  int reference_frame{0};
  double timestep{0.2};
  double horizon{1.0};
  std::string mode{"normals"};
  std::vector<OutputFrame> frames;
  std::vector<PlanSummary> plans;
  std::vector<std::string> warnings;
  std::string tool_version;
  std::string options_hash;
  bool approximate_intrinsics{false};
};

bool operator==(const PlanSummary& a, const PlanSummary& b);
bool operator==(const OutputManifest& a, const OutputManifest& b);

inline constexpr const char* kOutputManifest = "manifest.txt";

// Writes frame_%03d.png for every frame (index k = 1..n) and manifest.txt.
// Existing frame entries in `manifest` are replaced. Returns the written manifest.
OutputManifest write_outputs(const std::filesystem::path& dir, const std::vector<ImageU8>& frames,
                             OutputManifest manifest);

OutputManifest read_manifest(const std::filesystem::path& dir);

}  // namespace urbanfuture
