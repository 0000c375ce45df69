#include "urbanfuture/posesolve.hpp"

#include <Eigen/Cholesky>
#include <bitset>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace urbanfuture {

namespace {

struct Evaluation {
  Eigen::VectorXd residual;
  Eigen::MatrixXd jacobian;
  double cost{0.0};
  double mean_error{0.0};
  std::vector<double> errors;  // per pair, NaN if inactive
};

double weight_of(const Keypoint2D& k, bool weighting) {
  if (!k.visible) return 0.0;
  return weighting ? std::sqrt(std::clamp(k.confidence, 0.0, 1.0)) : 1.0;
}

// Evaluates weighted residuals for a pose (R, t) whose rotation depends on the
// first rotation_dofs parameters; rotation_derivative(X) returns d(R X)/d(rot params).
template <typename RotationDerivative>
std::optional<Evaluation> evaluate(const Correspondences& c, const CameraIntrinsics& intr,
                                   const Matrix3& r, const Vector3& t, int rotation_dofs,
                                   RotationDerivative&& rotation_derivative, bool weighting) {
  const int n = int(c.pairs.size());
  const int dofs = rotation_dofs + 3;
  Evaluation ev;
  ev.residual = Eigen::VectorXd::Zero(2 * n);
  ev.jacobian = Eigen::MatrixXd::Zero(2 * n, dofs);
  ev.errors.assign(std::size_t(n), std::numeric_limits<double>::quiet_NaN());
  double error_sum = 0.0;
  int active = 0;
  for (int i = 0; i < n; ++i) {
    const auto& pair = c.pairs[std::size_t(i)];
    if (!pair.observed.visible) continue;
    const double w = weight_of(pair.observed, weighting);
    const Vector3 pc = r * pair.object_point + t;
    if (!(pc.z() > kMinDepth)) return std::nullopt;
    const double inv_z = 1.0 / pc.z();
    const Vector2 uv(intr.fx * pc.x() * inv_z + intr.cx, intr.fy * pc.y() * inv_z + intr.cy);
    const Vector2 diff = uv - pair.observed.position;
    ev.errors[std::size_t(i)] = diff.norm();
    error_sum += diff.norm();
    ++active;
    ev.residual.segment<2>(2 * i) = w * diff;

    Eigen::Matrix<double, 2, 3> dproj;
    dproj << intr.fx * inv_z, 0.0, -intr.fx * pc.x() * inv_z * inv_z, 0.0, intr.fy * inv_z,
        -intr.fy * pc.y() * inv_z * inv_z;
    Eigen::MatrixXd dpc(3, dofs);
    dpc.leftCols(rotation_dofs) = rotation_derivative(pair.object_point);
    dpc.rightCols<3>().setIdentity();
    ev.jacobian.middleRows<2>(2 * i) = w * dproj * dpc;
  }
  ev.cost = ev.residual.squaredNorm();
  ev.mean_error = active > 0 ? error_sum / active : 0.0;
  if (!std::isfinite(ev.cost)) return std::nullopt;
  return ev;
}

// d(R(w) X)/dw for the Rodrigues map, in closed form.
Eigen::Matrix3d rotation_point_derivative(const Vector3& w, const Matrix3& r, const Vector3& x) {
  const double theta2 = w.squaredNorm();
  if (theta2 < 1e-16) return -skew<double>(x);
  const Matrix3 m = (w * w.transpose() + (r.transpose() - Matrix3::Identity()) * skew<double>(w)) / theta2;
  return -r * skew<double>(x) * m;
}

std::optional<Evaluation> evaluate_full(const Correspondences& c, const CameraIntrinsics& intr,
                                        const Eigen::VectorXd& p, bool weighting) {
  const Vector3 w = p.head<3>();
  const Matrix3 r = axis_angle_to_rotation(AxisAngle{w});
  return evaluate(
      c, intr, r, p.tail<3>(), 3,
      [&](const Vector3& x) { return rotation_point_derivative(w, r, x); }, weighting);
}

std::optional<Evaluation> evaluate_yaw(const Correspondences& c, const CameraIntrinsics& intr,
                                       const Matrix3& base, const Eigen::VectorXd& p,
                                       bool weighting) {
  const Matrix3 rz = rotation_z(p[0]);
  const Matrix3 r = base * rz;
  return evaluate(
      c, intr, r, p.tail<3>(), 1,
      [&](const Vector3& x) -> Eigen::Vector3d { return base * rz * skew<double>(Vector3::UnitZ()) * x; },
      weighting);
}

struct LmResult {
  Eigen::VectorXd params;
  Evaluation eval;
  int iterations{0};
  bool converged{false};
  StopReason reason{StopReason::MaxIterations};
  std::vector<double> cost_history;
};

template <typename Model>
std::optional<LmResult> levenberg_marquardt(Eigen::VectorXd params, Model&& model,
                                            const SolverOptions& opts) {
  auto current = model(params);
  if (!current) return std::nullopt;
  LmResult out;
  out.cost_history.push_back(current->cost);
  double lambda = opts.initial_damping;
  const Eigen::Index dofs = params.size();
  while (true) {
    const Eigen::VectorXd g = current->jacobian.transpose() * current->residual;
    if (g.lpNorm<Eigen::Infinity>() < opts.gradient_tolerance) {
      out.converged = true;
      out.reason = StopReason::Gradient;
      break;
    }
    if (out.iterations >= opts.max_iterations) {
      out.reason = StopReason::MaxIterations;
      break;
    }
    ++out.iterations;
    const Eigen::MatrixXd jtj = current->jacobian.transpose() * current->jacobian;
    Eigen::MatrixXd a = jtj;
    for (Eigen::Index k = 0; k < dofs; ++k) a(k, k) += lambda * std::max(jtj(k, k), 1e-12);
    const Eigen::VectorXd delta = a.ldlt().solve(-g);
    const Eigen::VectorXd trial = params + delta;
    auto next = delta.allFinite() ? model(trial) : std::nullopt;
    if (next && next->cost < current->cost) {
      const double decrease = current->mean_error - next->mean_error;
      params = trial;
      current = std::move(next);
      out.cost_history.push_back(current->cost);
      lambda /= opts.damping_factor;
      if (std::abs(decrease) < opts.residual_tolerance) {
        out.converged = true;
        out.reason = StopReason::ResidualChange;
        break;
      }
    } else {
      // A rejected step that leaves the mean residual unchanged is already at the optimum.
      if (next && std::abs(current->mean_error - next->mean_error) < opts.residual_tolerance) {
        out.converged = true;
        out.reason = StopReason::ResidualChange;
        break;
      }
      lambda *= opts.damping_factor;
      if (lambda > opts.max_damping) {
        out.converged = true;
        out.reason = StopReason::Damping;
        break;
      }
    }
  }
  out.params = std::move(params);
  out.eval = std::move(*current);
  return out;
}

Correspondences active_subset(const Correspondences& c, double threshold) {
  Correspondences out;
  for (const auto& p : c.pairs) {
    if (p.observed.visible && p.observed.confidence >= threshold) out.pairs.push_back(p);
  }
  return out;
}

void check_configuration(const Correspondences& active) {
  if (active.pairs.size() < 4) {
    throw Error(ErrorKind::InsufficientCorrespondences,
                "need at least 4 visible correspondences, got " + std::to_string(active.pairs.size()));
  }
  Vector3 mean = Vector3::Zero();
  for (const auto& p : active.pairs) {
    if (!p.observed.position.allFinite() || !p.object_point.allFinite()) {
      throw Error(ErrorKind::InvalidArgument, "correspondence has non-finite coordinates");
    }
    mean += p.object_point;
  }
  mean /= double(active.pairs.size());
  Matrix3 cov = Matrix3::Zero();
  for (const auto& p : active.pairs) {
    const Vector3 d = p.object_point - mean;
    cov += d * d.transpose();
  }
  const Vector3 ev = Eigen::SelfAdjointEigenSolver<Matrix3>(cov).eigenvalues();
  if (!(ev[1] > 1e-10 * std::max(ev[2], 1e-300))) {
    throw Error(ErrorKind::DegenerateConfiguration, "3D keypoints are collinear");
  }
}

// Translation seed from the ratio of 3D to image spread of the active points.
Vector3 scale_seed(const Correspondences& active, const CameraIntrinsics& intr) {
  Vector3 mean3 = Vector3::Zero();
  Vector2 mean2 = Vector2::Zero();
  for (const auto& p : active.pairs) {
    mean3 += p.object_point;
    mean2 += Vector2((p.observed.position.x() - intr.cx) / intr.fx,
                     (p.observed.position.y() - intr.cy) / intr.fy);
  }
  const double n = double(active.pairs.size());
  mean3 /= n;
  mean2 /= n;
  double s3 = 0.0, s2 = 0.0;
  for (const auto& p : active.pairs) {
    s3 += (p.object_point - mean3).squaredNorm();
    s2 += (Vector2((p.observed.position.x() - intr.cx) / intr.fx,
                   (p.observed.position.y() - intr.cy) / intr.fy) -
           mean2)
              .squaredNorm();
  }
  const double depth = s2 > 0.0 ? std::sqrt(s3 / s2) : 10.0;
  return Vector3(mean2.x(), mean2.y(), 1.0) * depth;
}

}  // namespace

Correspondences match_keypoints(const std::vector<Keypoint2D>& keypoints, const CadModel& cad) {
  Correspondences c;
  std::bitset<kKeypointCount> seen;
  for (const auto& k : keypoints) {
    if (seen.test(std::size_t(k.name))) {
      throw Error(ErrorKind::InvalidArgument,
                  "duplicate keypoint '" + std::string(to_string(k.name)) + "'");
    }
    seen.set(std::size_t(k.name));
    c.pairs.push_back({k, cad.keypoint(k.name)});
  }
  return c;
}

GroundPrior ground_prior_from_box(const GroundHomography& h, const Pose& extrinsics,
                                  const Box& box, double ground_offset) {
  const Vector2 contact(box.bottom_center_x(), box.bottom_center_y());
  const Vector2 world = lift_ground_point(h, contact);
  return {extrinsics, Vector3(world.x(), world.y(), ground_offset)};
}

PoseParams pose_to_params(const Pose& pose) {
  PoseParams p;
  p << rotation_to_axis_angle(pose.rotation).v, pose.translation;
  return p;
}

Pose params_to_pose(const PoseParams& params) {
  return {axis_angle_to_rotation(AxisAngle{params.head<3>()}), params.tail<3>()};
}

ResidualJacobian residual_and_jacobian(const Correspondences& c, const CameraIntrinsics& intr,
                                       const PoseParams& params, bool confidence_weighting) {
  const auto ev = evaluate_full(c, intr, params, confidence_weighting);
  if (!ev) throw Error(ErrorKind::PointBehindCamera, "a visible keypoint projects behind the camera");
  return {ev->residual, ev->jacobian};
}

SolveReport solve_pnp(const Correspondences& c, const CameraIntrinsics& intr,
                      const std::optional<Pose>& init, const SolverOptions& opts,
                      const std::optional<GroundPrior>& prior) {
  if (!intr.valid()) throw Error(ErrorKind::InvalidArgument, "camera intrinsics are invalid");
  const Correspondences active = active_subset(c, opts.confidence_threshold);
  check_configuration(active);

  const Matrix3 base = prior ? prior->extrinsics.rotation : level_camera_rotation();
  std::vector<Eigen::VectorXd> starts;
  if (init) {
    if (opts.yaw_only) {
      Eigen::VectorXd p(4);
      p << attitude_of(base.transpose() * init->rotation).yaw, init->translation;
      starts.push_back(p);
    } else {
      starts.push_back(pose_to_params(*init));
    }
  } else {
    const int count = std::max(1, opts.yaw_hypotheses);
    for (int k = 0; k < count; ++k) {
      const double yaw = 2.0 * std::numbers::pi * k / count;
      const Matrix3 r = base * rotation_z(yaw);
      const Vector3 t = prior ? Vector3(prior->extrinsics * prior->seed_world)
                              : Vector3(scale_seed(active, intr));
      Eigen::VectorXd p(opts.yaw_only ? 4 : 6);
      if (opts.yaw_only) {
        p << yaw, t;
      } else {
        p << rotation_to_axis_angle(r).v, t;
      }
      starts.push_back(p);
    }
  }

  auto model = [&](const Eigen::VectorXd& p) {
    return opts.yaw_only ? evaluate_yaw(active, intr, base, p, opts.confidence_weighting)
                         : evaluate_full(active, intr, p, opts.confidence_weighting);
  };

  std::optional<LmResult> best;
  int best_index = -1;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    auto result = levenberg_marquardt(starts[k], model, opts);
    if (!result) continue;
    if (!best || result->eval.cost < best->eval.cost) {
      best = std::move(result);
      best_index = int(k);
    }
  }
  if (!best) {
    throw Error(ErrorKind::Divergence, "no initialization produced a finite residual");
  }

  SolveReport report;
  if (opts.yaw_only) {
    report.pose = {base * rotation_z(best->params[0]), best->params.tail<3>()};
    report.attitude = {0.0, 0.0, wrap_angle(best->params[0])};
  } else {
    report.pose = params_to_pose(best->params);
    report.attitude = attitude_of(base.transpose() * report.pose.rotation);
  }
  report.final_residual = best->eval.mean_error;
  report.weighted_cost = best->eval.cost;
  report.iterations = best->iterations;
  report.converged = best->converged;
  report.stop_reason = best->reason;
  report.cost_history = std::move(best->cost_history);
  report.hypothesis = best_index;

  // Per-point errors are reported against the caller's full list.
  report.per_point_residuals.assign(c.pairs.size(), std::numeric_limits<double>::quiet_NaN());
  std::size_t a = 0;
  for (std::size_t i = 0; i < c.pairs.size(); ++i) {
    const auto& o = c.pairs[i].observed;
    if (o.visible && o.confidence >= opts.confidence_threshold) {
      report.per_point_residuals[i] = best->eval.errors[a++];
    }
  }
  return report;
}

}  // namespace urbanfuture
