#pragma once

#include <optional>
#include <vector>

#include "urbanfuture/geom.hpp"
#include "urbanfuture/image.hpp"

namespace urbanfuture {

struct TrajectoryPoint {
  double t{0};  // seconds
  double x{0};  // ground-plane meters
  double y{0};
  bool operator==(const TrajectoryPoint&) const = default;
};

// Ground-plane path; timestamps strictly increasing. A single point means stationary.
struct Trajectory {
  std::vector<TrajectoryPoint> points;
};

struct TrackEntry {
  int frame{0};
  Box box;
  double confidence{1.0};
  bool operator==(const TrackEntry&) const = default;
};

struct VehicleTrack {
  int vehicle_id{0};
  std::vector<TrackEntry> entries;  // frame indices strictly increasing

  const TrackEntry* at_frame(int frame) const;
};

struct TimedPose {
  double t{0};  // offset from the plan start, seconds
  Pose pose;
};

struct FuturePlan {
  int vehicle_id{0};
  Pose source_pose;                 // V_s
  std::vector<TimedPose> targets;   // V_t at t = timestep, 2 timestep, ..., horizon
  std::vector<double> headings;     // world heading used at each step (radians)
  double horizon{1.0};
  double timestep{0.2};
};

struct PlanOptions {
  double horizon{1.0};
  double timestep{0.2};
  // Trajectory time at which the plan starts; defaults to the first timestamp.
  std::optional<double> start_time;
  // Heading carried in from a previous plan; overrides the first-segment rule.
  std::optional<double> initial_heading;
  bool smooth_heading{false};
  // Rotate the vehicle at the first step so its solved yaw matches the first segment.
  bool align_first_heading{false};
  int vehicle_id{0};
};

// Number of timesteps in a horizon; throws unless horizon / timestep is a whole number.
int step_count(double horizon, double timestep);

// Bottom-centre of every box lifted to the ground; t = frame / fps.
Trajectory lift_track(const VehicleTrack& track, const GroundHomography& h, double fps);

// Lifts a drawn pixel polyline and resamples it by arc length at constant speed
// into horizon / timestep equal segments. The result starts at t = 0 and has
// horizon / timestep + 1 points.
Trajectory resample_user_polyline(const std::vector<Vector2>& polyline, const GroundHomography& h,
                                  double horizon, double timestep);

// Ground position at time t by linear interpolation.
Vector2 position_at(const Trajectory& traj, double t);

// Moves V_s along the trajectory: each step's world motion (translation between
// consecutive positions plus yaw change about the previous position) is
// conjugated into the camera frame by the extrinsics and composed onto the
// previous target pose.
FuturePlan plan_future(const Pose& source, const Trajectory& traj, const Pose& extrinsics,
                       const PlanOptions& opts);

}  // namespace urbanfuture
