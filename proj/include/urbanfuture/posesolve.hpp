#pragma once

#include <optional>
#include <vector>

#include "urbanfuture/cad.hpp"
#include "urbanfuture/geom.hpp"
#include "urbanfuture/image.hpp"

namespace urbanfuture {

struct Keypoint2D {
  KeypointName name{KeypointName::WheelFL};
  Vector2 position = Vector2::Zero();
  double confidence{1.0};
  bool visible{true};
};

struct Correspondence {
  Keypoint2D observed;
  Vector3 object_point = Vector3::Zero();
};

struct Correspondences {
  std::vector<Correspondence> pairs;
};

// Pairs detected keypoints with the model's 3D keypoints by name.
Correspondences match_keypoints(const std::vector<Keypoint2D>& keypoints, const CadModel& cad);

struct SolverOptions {
  int max_iterations{100};
  double residual_tolerance{1e-8};   // px, on the change of the mean residual
  double gradient_tolerance{1e-10};  // infinity norm of J^T r
  double max_damping{1e8};
  double initial_damping{1e-3};
  double damping_factor{10.0};
  double confidence_threshold{0.2};
  bool confidence_weighting{true};
  bool yaw_only{false};
  int yaw_hypotheses{8};
};

// Ground-plane context for seeding the solver: the camera extrinsics
// (world->camera) and a world-frame guess of the vehicle centroid.
struct GroundPrior {
  Pose extrinsics;
  Vector3 seed_world = Vector3::Zero();
};

// Lifts the bottom-centre of a detection box onto the ground and raises it by
// the model's centroid height.
GroundPrior ground_prior_from_box(const GroundHomography& h, const Pose& extrinsics,
                                  const Box& box, double ground_offset);

enum class StopReason { Gradient, ResidualChange, Damping, MaxIterations };

struct SolveReport {
  Pose pose;
  double final_residual{0.0};  // mean pixel distance over active points
  double weighted_cost{0.0};   // confidence-weighted sum of squared residuals
  int iterations{0};
  bool converged{false};
  StopReason stop_reason{StopReason::MaxIterations};
  std::vector<double> per_point_residuals;  // one entry per pair of the input, NaN if inactive
  std::vector<double> cost_history;         // cost after the start and every accepted step
  int hypothesis{0};
  // Roll/pitch/yaw relative to the ground frame (the level camera frame when no prior is given).
  Attitude attitude;
};

using PoseParams = Eigen::Matrix<double, 6, 1>;

struct ResidualJacobian {
  Eigen::VectorXd residual;
  Eigen::Matrix<double, Eigen::Dynamic, 6> jacobian;
};

PoseParams pose_to_params(const Pose& pose);
Pose params_to_pose(const PoseParams& params);

// Residual rows (u_pred - u_obs, v_pred - v_obs) scaled by sqrt(confidence) for
// every pair of `c` (invisible pairs give zero rows), and their analytic
// derivative with respect to [axis-angle, translation].
ResidualJacobian residual_and_jacobian(const Correspondences& c, const CameraIntrinsics& intr,
                                       const PoseParams& params, bool confidence_weighting = true);

SolveReport solve_pnp(const Correspondences& c, const CameraIntrinsics& intr,
                      const std::optional<Pose>& init, const SolverOptions& opts,
                      const std::optional<GroundPrior>& prior = std::nullopt);

}  // namespace urbanfuture
