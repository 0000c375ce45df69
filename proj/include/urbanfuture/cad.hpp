#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "urbanfuture/geom.hpp"

namespace urbanfuture {

// The twelve semantic vehicle keypoints. Front/rear and left/right are in the
// vehicle frame (+x forward, +y left, +z up).
enum class KeypointName : int {
  WheelFL,
  WheelFR,
  WheelRL,
  WheelRR,
  LightFL,
  LightFR,
  LightRL,
  LightRR,
  WindshieldTL,
  WindshieldTR,
  RearWindowTL,
  RearWindowTR,
};

inline constexpr int kKeypointCount = 12;

inline constexpr std::array<std::string_view, kKeypointCount> kKeypointNames = {
    "wheel_fl",      "wheel_fr",      "wheel_rl",       "wheel_rr",
    "light_fl",      "light_fr",      "light_rl",       "light_rr",
    "windshield_tl", "windshield_tr", "rear_window_tl", "rear_window_tr",
};

inline std::string_view to_string(KeypointName k) { return kKeypointNames[std::size_t(k)]; }
std::optional<KeypointName> parse_keypoint_name(std::string_view s);

struct CadModel {
  int id{1};
  std::vector<Vector3> vertices;
  std::vector<Eigen::Vector3i> faces;
  std::array<Vector3, kKeypointCount> keypoints{};

  const Vector3& keypoint(KeypointName k) const { return keypoints[std::size_t(k)]; }
  // Half the vertical extent below the centroid; the ground lies at -ground_offset() in z.
  double ground_offset() const;
  double bbox_diagonal() const;
};

// Parses an OBJ-style mesh ("v x y z", "f a b c [d ...]", 1-based, polygons fanned
// from the first vertex) plus a keypoint table ("name x y z"). The result is
// recentred so that the vertex centroid is the origin.
CadModel load_cad(int id, std::istream& mesh, std::istream& keypoints);
CadModel load_cad(int id, const std::filesystem::path& mesh_path,
                  const std::filesystem::path& keypoint_path);

void write_cad(const CadModel& cad, const std::filesystem::path& mesh_path,
               const std::filesystem::path& keypoint_path);

}  // namespace urbanfuture
