#pragma once

// Camera, rigid-motion and ground-plane geometry.
//
// Conventions: image origin top-left with u right and v down; camera frame is
// right-handed with +z forward (so +y points down in the image); the world
// ground plane is z = 0 with +z up. A Pose maps points of its source frame into
// the camera frame: p_cam = rotation * p + translation.

#include <Eigen/Core>
#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <string>

#include "urbanfuture/error.hpp"

namespace urbanfuture {

template <typename Scalar>
using Vector2T = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector3T = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3T = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Matrix4T = Eigen::Matrix<Scalar, 4, 4>;

inline constexpr double kMinDepth = 1e-9;
inline constexpr double kMinHomogeneousW = 1e-12;

template <typename Scalar>
struct CameraIntrinsicsT {
  Scalar fx{1};
  Scalar fy{1};
  Scalar cx{0};
  Scalar cy{0};
  int width{1};
  int height{1};

  bool valid() const {
    return fx > Scalar(0) && fy > Scalar(0) && width > 0 && height > 0 && cx >= Scalar(0) &&
           cx < Scalar(width) && cy >= Scalar(0) && cy < Scalar(height);
  }

  Matrix3T<Scalar> matrix() const {
    Matrix3T<Scalar> k;
    k << fx, Scalar(0), cx, Scalar(0), fy, cy, Scalar(0), Scalar(0), Scalar(1);
    return k;
  }

  // Fallback used when a scene carries no calibration.
  static CameraIntrinsicsT approximate(int width, int height) {
    return {Scalar(width), Scalar(width), Scalar(width) / Scalar(2), Scalar(height) / Scalar(2),
            width, height};
  }
};

template <typename Scalar>
struct PoseT {
  Matrix3T<Scalar> rotation = Matrix3T<Scalar>::Identity();
  Vector3T<Scalar> translation = Vector3T<Scalar>::Zero();

  static PoseT identity() { return {}; }

  static PoseT from_matrix(const Matrix4T<Scalar>& m) {
    return {m.template topLeftCorner<3, 3>(), m.template topRightCorner<3, 1>()};
  }

  Matrix4T<Scalar> matrix() const {
    Matrix4T<Scalar> m = Matrix4T<Scalar>::Identity();
    m.template topLeftCorner<3, 3>() = rotation;
    m.template topRightCorner<3, 1>() = translation;
    return m;
  }

  Vector3T<Scalar> operator*(const Vector3T<Scalar>& p) const { return rotation * p + translation; }
};

template <typename Scalar>
struct GroundHomographyT {
  Matrix3T<Scalar> h = Matrix3T<Scalar>::Identity();

  bool valid() const { return std::abs(h.determinant()) > Scalar(1e-12); }
};

// Rotation vector: direction is the axis, norm is the angle in radians.
template <typename Scalar>
struct AxisAngleT {
  Vector3T<Scalar> v = Vector3T<Scalar>::Zero();

  Scalar angle() const { return v.norm(); }
};

using CameraIntrinsics = CameraIntrinsicsT<double>;
using Pose = PoseT<double>;
using GroundHomography = GroundHomographyT<double>;
using AxisAngle = AxisAngleT<double>;
using Vector2 = Vector2T<double>;
using Vector3 = Vector3T<double>;
using Matrix3 = Matrix3T<double>;
using Matrix4 = Matrix4T<double>;

template <typename Scalar>
Matrix3T<Scalar> skew(const Vector3T<Scalar>& w) {
  Matrix3T<Scalar> s;
  s << Scalar(0), -w.z(), w.y(), w.z(), Scalar(0), -w.x(), -w.y(), w.x(), Scalar(0);
  return s;
}

template <typename Scalar>
Vector3T<Scalar> vee(const Matrix3T<Scalar>& s) {
  return {s(2, 1), s(0, 2), s(1, 0)};
}

template <typename Scalar>
Vector2T<Scalar> project_camera_point(const CameraIntrinsicsT<Scalar>& intr,
                                      const Vector3T<Scalar>& pc) {
  if (!(pc.z() > Scalar(kMinDepth))) {
    throw Error(ErrorKind::PointBehindCamera,
                "point is behind the camera (z = " + std::to_string(double(pc.z())) + ")");
  }
  return {intr.fx * pc.x() / pc.z() + intr.cx, intr.fy * pc.y() / pc.z() + intr.cy};
}

template <typename Scalar>
Vector2T<Scalar> project(const CameraIntrinsicsT<Scalar>& intr, const PoseT<Scalar>& pose,
                         const Vector3T<Scalar>& p) {
  return project_camera_point(intr, Vector3T<Scalar>(pose * p));
}

// Unit-depth ray through a pixel.
template <typename Scalar>
Vector3T<Scalar> back_project(const CameraIntrinsicsT<Scalar>& intr, const Vector2T<Scalar>& px) {
  return {(px.x() - intr.cx) / intr.fx, (px.y() - intr.cy) / intr.fy, Scalar(1)};
}

namespace detail {
template <typename Scalar>
Vector2T<Scalar> dehomogenize(const Vector3T<Scalar>& q) {
  if (!(std::abs(q.z()) > Scalar(kMinHomogeneousW))) {
    throw Error(ErrorKind::PointAtInfinity, "homography maps point to infinity");
  }
  return q.template head<2>() / q.z();
}
}  // namespace detail

template <typename Scalar>
Vector2T<Scalar> lift_ground_point(const GroundHomographyT<Scalar>& h, const Vector2T<Scalar>& px) {
  return detail::dehomogenize<Scalar>(h.h * px.homogeneous());
}

// Inverse of lift_ground_point: ground-plane meters back to pixels.
template <typename Scalar>
Vector2T<Scalar> unlift_ground_point(const GroundHomographyT<Scalar>& h,
                                     const Vector2T<Scalar>& world) {
  return detail::dehomogenize<Scalar>(h.h.inverse() * world.homogeneous());
}

// compose(a, b) applies b first, then a.
template <typename Scalar>
PoseT<Scalar> compose(const PoseT<Scalar>& a, const PoseT<Scalar>& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

template <typename Scalar>
PoseT<Scalar> invert(const PoseT<Scalar>& a) {
  Matrix3T<Scalar> rt = a.rotation.transpose();
  return {rt, -(rt * a.translation)};
}

template <typename Scalar>
Matrix3T<Scalar> axis_angle_to_rotation(const AxisAngleT<Scalar>& aa) {
  using std::cos;
  using std::sin;
  const Scalar theta = aa.v.norm();
  const Matrix3T<Scalar> k = skew<Scalar>(aa.v);
  if (theta < Scalar(1e-12)) {
    return Matrix3T<Scalar>::Identity() + k;
  }
  const Scalar a = sin(theta) / theta;
  const Scalar b = (Scalar(1) - cos(theta)) / (theta * theta);
  return Matrix3T<Scalar>::Identity() + a * k + b * k * k;
}

template <typename Scalar>
AxisAngleT<Scalar> rotation_to_axis_angle(const Matrix3T<Scalar>& r) {
  using std::atan2;
  using std::sqrt;
  const Vector3T<Scalar> w = vee<Scalar>(r - r.transpose());  // 2 sin(theta) * axis
  const Scalar sin_theta = w.norm() / Scalar(2);
  const Scalar cos_theta = (r.trace() - Scalar(1)) / Scalar(2);
  const Scalar theta = atan2(sin_theta, cos_theta);
  if (theta < Scalar(1e-12)) {
    return {w / Scalar(2)};
  }
  if (theta < Scalar(std::numbers::pi - 1e-2)) {
    return {w * (theta / (Scalar(2) * sin_theta))};
  }
  // Near pi the antisymmetric part vanishes; read the axis from the symmetric
  // part using its largest diagonal entry.
  const Matrix3T<Scalar> outer =
      ((r + r.transpose()) / Scalar(2) - cos_theta * Matrix3T<Scalar>::Identity()) /
      (Scalar(1) - cos_theta);
  int k = 0;
  outer.diagonal().maxCoeff(&k);
  Vector3T<Scalar> axis = outer.col(k) / sqrt(outer(k, k));
  if (axis.dot(w) < Scalar(0)) axis = -axis;
  return {axis.normalized() * theta};
}

// Nearest rotation in the Frobenius sense via polar decomposition:
// R = M (M^T M)^{-1/2}, computed with a symmetric eigendecomposition.
template <typename Scalar>
Matrix3T<Scalar> nearest_rotation(const Matrix3T<Scalar>& m) {
  Eigen::SelfAdjointEigenSolver<Matrix3T<Scalar>> eig(m.transpose() * m);
  const Vector3T<Scalar> inv_sqrt = eig.eigenvalues().cwiseMax(Scalar(1e-300)).cwiseSqrt().cwiseInverse();
  const Matrix3T<Scalar> s_inv =
      eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
  return m * s_inv;
}

template <typename Scalar>
bool is_rotation(const Matrix3T<Scalar>& r, Scalar tol = Scalar(1e-9)) {
  return (r.transpose() * r - Matrix3T<Scalar>::Identity()).norm() <= tol &&
         std::abs(r.determinant() - Scalar(1)) <= tol;
}

// Angle of the relative rotation a^T b, in radians.
template <typename Scalar>
Scalar geodesic_angle(const Matrix3T<Scalar>& a, const Matrix3T<Scalar>& b) {
  return rotation_to_axis_angle<Scalar>(a.transpose() * b).angle();
}

template <typename Scalar>
Matrix3T<Scalar> rotation_z(Scalar angle) {
  using std::cos;
  using std::sin;
  Matrix3T<Scalar> r;
  r << cos(angle), -sin(angle), Scalar(0), sin(angle), cos(angle), Scalar(0), Scalar(0), Scalar(0),
      Scalar(1);
  return r;
}

// Plane-to-image homography for world->camera extrinsics, inverted into the
// pixel->world convention used throughout.
template <typename Scalar>
GroundHomographyT<Scalar> homography_from_extrinsics(const CameraIntrinsicsT<Scalar>& intr,
                                                     const PoseT<Scalar>& extrinsics) {
  Matrix3T<Scalar> g;
  g.col(0) = extrinsics.rotation.col(0);
  g.col(1) = extrinsics.rotation.col(1);
  g.col(2) = extrinsics.translation;
  return {(intr.matrix() * g).inverse()};
}

// Recovers world->camera extrinsics from a pixel->world ground homography.
template <typename Scalar>
PoseT<Scalar> decompose_homography(const CameraIntrinsicsT<Scalar>& intr,
                                   const GroundHomographyT<Scalar>& h) {
  if (!h.valid()) {
    throw Error(ErrorKind::DegenerateHomography, "homography is not invertible");
  }
  const Matrix3T<Scalar> m = intr.matrix().inverse() * h.h.inverse();
  const Scalar scale = m.col(0).norm();
  if (!(scale >= Scalar(1e-12))) {
    throw Error(ErrorKind::DegenerateHomography, "homography normalization scale is degenerate");
  }
  const Vector3T<Scalar> r1 = m.col(0) / scale;
  const Vector3T<Scalar> r2 = m.col(1) / scale;
  Matrix3T<Scalar> approx;
  approx << r1, r2, r1.cross(r2);
  PoseT<Scalar> e{nearest_rotation<Scalar>(approx), m.col(2) / scale};
  // Camera centre is -R^T t; its height above the ground must be positive.
  const Scalar height = -e.rotation.col(2).dot(e.translation);
  if (height < Scalar(0)) {
    e.rotation.col(0) = -e.rotation.col(0);
    e.rotation.col(1) = -e.rotation.col(1);
    e.translation = -e.translation;
  }
  return e;
}

template <typename Scalar>
Vector3T<Scalar> camera_center(const PoseT<Scalar>& extrinsics) {
  return -(extrinsics.rotation.transpose() * extrinsics.translation);
}

// Roll, pitch and yaw (ZYX order) of a rotation expressed in world axes.
struct Attitude {
  double roll{0};
  double pitch{0};
  double yaw{0};
};

inline Attitude attitude_of(const Matrix3& r) {
  Attitude a;
  a.yaw = std::atan2(r(1, 0), r(0, 0));
  a.pitch = std::atan2(-r(2, 0), std::hypot(r(0, 0), r(1, 0)));
  a.roll = std::atan2(r(2, 1), r(2, 2));
  return a;
}

// Attitude of an object pose (object->camera) relative to the world ground frame.
inline Attitude world_attitude(const Pose& extrinsics, const Pose& object_pose) {
  return attitude_of(extrinsics.rotation.transpose() * object_pose.rotation);
}

// Camera looking horizontally along world +y with world +z pointing up in the image.
inline Matrix3 level_camera_rotation() {
  Matrix3 r;
  r << 1, 0, 0, 0, 0, -1, 0, 1, 0;
  return r;
}

inline double wrap_angle(double a) {
  return std::remainder(a, 2.0 * std::numbers::pi);
}

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

}  // namespace urbanfuture
