#include "urbanfuture/traj.hpp"

#include <cmath>
#include <string>

namespace urbanfuture {

namespace {

constexpr double kStationaryStep = 1e-4;  // meters

Pose world_step(const Vector2& from, const Vector2& to, double dtheta) {
  // x' = Rz (x - from) + to
  const Matrix3 rz = rotation_z(dtheta);
  const Vector3 f(from.x(), from.y(), 0.0);
  const Vector3 t(to.x(), to.y(), 0.0);
  return {rz, t - rz * f};
}

}  // namespace

const TrackEntry* VehicleTrack::at_frame(int frame) const {
  for (const auto& e : entries) {
    if (e.frame == frame) return &e;
  }
  return nullptr;
}

int step_count(double horizon, double timestep) {
  if (!(timestep > 0.0) || !(horizon >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "horizon and timestep must be positive");
  }
  const double ratio = horizon / timestep;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9) {
    throw Error(ErrorKind::InvalidArgument, "horizon is not a whole number of timesteps");
  }
  return int(rounded);
}

Trajectory lift_track(const VehicleTrack& track, const GroundHomography& h, double fps) {
  if (track.entries.empty()) throw Error(ErrorKind::EmptyInput, "track has no entries");
  if (!(fps > 0.0)) throw Error(ErrorKind::InvalidArgument, "fps must be positive");
  if (!h.valid()) throw Error(ErrorKind::DegenerateHomography, "homography is not invertible");
  Trajectory traj;
  for (const auto& e : track.entries) {
    const Vector2 w = lift_ground_point(h, Vector2(e.box.bottom_center_x(), e.box.bottom_center_y()));
    traj.points.push_back({e.frame / fps, w.x(), w.y()});
  }
  return traj;
}

Trajectory resample_user_polyline(const std::vector<Vector2>& polyline, const GroundHomography& h,
                                  double horizon, double timestep) {
  if (polyline.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "polyline needs at least two points");
  }
  const int n = step_count(horizon, timestep);
  std::vector<Vector2> world;
  world.reserve(polyline.size());
  for (const auto& px : polyline) world.push_back(lift_ground_point(h, px));

  std::vector<double> cumulative(world.size(), 0.0);
  for (std::size_t i = 1; i < world.size(); ++i) {
    cumulative[i] = cumulative[i - 1] + (world[i] - world[i - 1]).norm();
  }
  const double total = cumulative.back();

  Trajectory traj;
  if (total < 1e-6 || n == 0) {
    for (int k = 0; k <= n; ++k) traj.points.push_back({k * timestep, world[0].x(), world[0].y()});
    return traj;
  }
  const double spacing = total / n;
  std::size_t seg = 1;
  for (int k = 0; k <= n; ++k) {
    Vector2 p;
    if (k == n) {
      p = world.back();
    } else {
      const double s = k * spacing;
      while (seg + 1 < world.size() && cumulative[seg] < s) ++seg;
      const double len = cumulative[seg] - cumulative[seg - 1];
      const double a = len > 0.0 ? (s - cumulative[seg - 1]) / len : 0.0;
      p = world[seg - 1] + a * (world[seg] - world[seg - 1]);
    }
    traj.points.push_back({k * timestep, p.x(), p.y()});
  }
  return traj;
}

Vector2 position_at(const Trajectory& traj, double t) {
  const auto& pts = traj.points;
  if (pts.empty()) throw Error(ErrorKind::EmptyInput, "trajectory is empty");
  if (pts.size() == 1 || t <= pts.front().t) return {pts.front().x, pts.front().y};
  if (t >= pts.back().t) return {pts.back().x, pts.back().y};
  std::size_t i = 1;
  while (pts[i].t < t) ++i;
  const auto& a = pts[i - 1];
  const auto& b = pts[i];
  const double w = (t - a.t) / (b.t - a.t);
  return {a.x + w * (b.x - a.x), a.y + w * (b.y - a.y)};
}

FuturePlan plan_future(const Pose& source, const Trajectory& traj, const Pose& extrinsics,
                       const PlanOptions& opts) {
  if (traj.points.empty()) throw Error(ErrorKind::EmptyInput, "trajectory is empty");
  for (std::size_t i = 1; i < traj.points.size(); ++i) {
    if (!(traj.points[i].t > traj.points[i - 1].t)) {
      throw Error(ErrorKind::InvalidArgument, "trajectory timestamps must be strictly increasing");
    }
  }
  const int n = step_count(opts.horizon, opts.timestep);
  const double t0 = opts.start_time.value_or(traj.points.front().t);
  if (traj.points.size() > 1 && t0 + opts.horizon > traj.points.back().t + 1e-9) {
    throw Error(ErrorKind::HorizonExceedsTrajectory,
                "trajectory ends at " + std::to_string(traj.points.back().t) + " s, plan needs " +
                    std::to_string(t0 + opts.horizon) + " s");
  }

  std::vector<Vector2> positions;
  for (int k = 0; k <= n; ++k) positions.push_back(position_at(traj, t0 + k * opts.timestep));

  // Raw heading per step; NaN where the vehicle does not move.
  std::vector<double> raw(std::size_t(n) + 1, std::nan(""));
  std::optional<double> first_heading;
  for (int k = 1; k <= n; ++k) {
    const Vector2 d = positions[std::size_t(k)] - positions[std::size_t(k) - 1];
    if (d.norm() >= kStationaryStep) {
      raw[std::size_t(k)] = std::atan2(d.y(), d.x());
      if (!first_heading) first_heading = raw[std::size_t(k)];
    }
  }

  std::vector<double> headings(std::size_t(n) + 1, 0.0);
  if (opts.initial_heading) {
    headings[0] = *opts.initial_heading;
  } else if (opts.align_first_heading) {
    headings[0] = world_attitude(extrinsics, source).yaw;
  } else {
    headings[0] = first_heading.value_or(0.0);
  }
  for (int k = 1; k <= n; ++k) {
    const double prev = headings[std::size_t(k) - 1];
    const double h = raw[std::size_t(k)];
    // Unwrap so that consecutive headings differ by at most pi.
    headings[std::size_t(k)] = std::isnan(h) ? prev : prev + wrap_angle(h - prev);
  }
  if (opts.smooth_heading && n >= 2) {
    std::vector<double> smoothed = headings;
    for (int k = 1; k <= n; ++k) {
      const int lo = std::max(1, k - 1), hi = std::min(n, k + 1);
      double sum = 0.0;
      for (int j = lo; j <= hi; ++j) sum += headings[std::size_t(j)];
      smoothed[std::size_t(k)] = sum / (hi - lo + 1);
    }
    headings = std::move(smoothed);
  }

  FuturePlan plan;
  plan.vehicle_id = opts.vehicle_id;
  plan.source_pose = source;
  plan.horizon = opts.horizon;
  plan.timestep = opts.timestep;
  plan.headings = headings;
  const Pose extrinsics_inv = invert(extrinsics);
  Pose current = source;
  for (int k = 1; k <= n; ++k) {
    const double dtheta = headings[std::size_t(k)] - headings[std::size_t(k) - 1];
    const Vector2& from = positions[std::size_t(k) - 1];
    const Vector2& to = positions[std::size_t(k)];
    if ((to - from).norm() > 0.0 || dtheta != 0.0) {
      const Pose step = compose(extrinsics, compose(world_step(from, to, dtheta), extrinsics_inv));
      current = compose(step, current);
    }
    plan.targets.push_back({k * opts.timestep, current});
  }
  return plan;
}

}  // namespace urbanfuture
