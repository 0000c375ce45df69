// Independent reference implementations and random case generators shared by
// the unit tests and the acceptance runner. Nothing here calls the library
// routine it is used to check.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "urbanfuture/error.hpp"
#include "urbanfuture/geom.hpp"
#include "urbanfuture/image.hpp"
#include "urbanfuture/posesolve.hpp"
#include "urbanfuture/render.hpp"
#include "urbanfuture/synthetic.hpp"

namespace uftest {

using namespace urbanfuture;

// Kind of the Error thrown by f, if any.
template <typename F>
std::optional<ErrorKind> error_kind(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

inline double uniform(std::mt19937_64& rng, double a, double b) {
  return std::uniform_real_distribution<double>(a, b)(rng);
}

inline Matrix3 random_rotation(std::mt19937_64& rng, double max_angle = M_PI) {
  Vector3 axis(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
  while (axis.norm() < 1e-3) axis = Vector3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
  return Eigen::AngleAxisd(uniform(rng, 0, max_angle), axis.normalized()).toRotationMatrix();
}

// ---- scalar geometry ------------------------------------------------------

// Pinhole projection written out component by component.
inline std::array<double, 2> scalar_project(double fx, double fy, double cx, double cy, const Matrix3& r,
                                            const Vector3& t, const Vector3& p) {
  double c[3];
  for (int i = 0; i < 3; ++i) c[i] = r(i, 0) * p[0] + r(i, 1) * p[1] + r(i, 2) * p[2] + t[i];
  return {fx * c[0] / c[2] + cx, fy * c[1] / c[2] + cy};
}

using Mat4 = std::array<std::array<double, 4>, 4>;

inline Mat4 to_mat4(const Pose& p) {
  Mat4 m{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m[i][j] = p.rotation(i, j);
    m[i][3] = p.translation[i];
  }
  m[3][3] = 1;
  return m;
}

inline Mat4 mul4(const Mat4& a, const Mat4& b) {
  Mat4 c{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

// World ground -> pixel map K [r1 r2 t] built entry by entry.
inline std::array<std::array<double, 3>, 3> forward_ground_map(const CameraIntrinsics& k, const Pose& e) {
  const double kk[3][3] = {{k.fx, 0, k.cx}, {0, k.fy, k.cy}, {0, 0, 1}};
  double g[3][3];
  for (int i = 0; i < 3; ++i) {
    g[i][0] = e.rotation(i, 0);
    g[i][1] = e.rotation(i, 1);
    g[i][2] = e.translation[i];
  }
  std::array<std::array<double, 3>, 3> out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int m = 0; m < 3; ++m) out[i][j] += kk[i][m] * g[m][j];
  return out;
}

// A traffic camera at a random height and pitch, looking in a random world direction.
inline SyntheticCamera random_camera(std::mt19937_64& rng, int width = 640, int height = 360) {
  SyntheticCamera cam;
  const double f = uniform(rng, 400, 900);
  cam.intrinsics = {f, f * uniform(rng, 0.98, 1.02), width / 2.0 + uniform(rng, -10, 10),
                    height / 2.0 + uniform(rng, -10, 10), width, height};
  const double pitch = uniform(rng, 0.2, 0.7), heading = uniform(rng, -M_PI, M_PI);
  Matrix3 tilt;
  tilt << 1, 0, 0, 0, std::cos(pitch), -std::sin(pitch), 0, std::sin(pitch), std::cos(pitch);
  const Matrix3 r = tilt * level_camera_rotation() * rotation_z(-heading);
  const Vector3 centre(uniform(rng, -20, 20), uniform(rng, -20, 20), uniform(rng, 4, 12));
  cam.extrinsics = {r, -r * centre};
  return cam;
}

// ---- pose cases -----------------------------------------------------------

struct PoseCase {
  CadModel cad;
  SyntheticCamera camera;
  Pose truth;
  GroundHomography homography;
  Box box;
  std::vector<Keypoint2D> keypoints;
};

inline Box projected_box(const CadModel& cad, const Pose& pose, const CameraIntrinsics& k) {
  double u0 = 1e300, v0 = 1e300, u1 = -1e300, v1 = -1e300;
  for (const auto& v : cad.vertices) {
    const auto uv = scalar_project(k.fx, k.fy, k.cx, k.cy, pose.rotation, pose.translation, v);
    u0 = std::min(u0, uv[0]);
    u1 = std::max(u1, uv[0]);
    v0 = std::min(v0, uv[1]);
    v1 = std::max(v1, uv[1]);
  }
  return {u0, v0, u1 - u0, v1 - v0};
}

// A car standing on the ground near the image centre with a random heading and
// a small random tilt.
inline PoseCase random_pose_case(std::mt19937_64& rng, double noise_px = 0.0) {
  PoseCase c;
  c.cad = make_car_cad(int(rng() % 10) + 1);
  c.camera = random_camera(rng);
  const auto& k = c.camera.intrinsics;
  c.homography = homography_from_extrinsics(k, c.camera.extrinsics);
  while (true) {
    const Vector2 px(k.cx + uniform(rng, -150, 150), k.cy + uniform(rng, -40, 100));
    const Vector3 ray = c.camera.extrinsics.rotation.transpose() * back_project(k, px);
    if (ray.z() > -0.05) continue;
    const Vector2 g = lift_ground_point(c.homography, px);
    const Matrix3 tilt = Eigen::AngleAxisd(uniform(rng, -0.05, 0.05), Vector3::UnitX()).toRotationMatrix() *
                         Eigen::AngleAxisd(uniform(rng, -0.05, 0.05), Vector3::UnitY()).toRotationMatrix();
    const Pose world{rotation_z(uniform(rng, -M_PI, M_PI)) * tilt, Vector3(g.x(), g.y(), c.cad.ground_offset())};
    c.truth = compose(c.camera.extrinsics, world);
    bool in_front = true;
    for (const auto& v : c.cad.vertices) in_front &= (c.truth * v).z() > 2.0;
    if (!in_front) continue;
    const double depth = c.truth.translation.z();
    if (depth > 45.0) continue;
    break;
  }
  c.box = projected_box(c.cad, c.truth, k);
  std::normal_distribution<double> noise(0.0, noise_px > 0 ? noise_px : 1.0);
  for (std::size_t i = 0; i < kKeypointCount; ++i) {
    const auto uv = scalar_project(k.fx, k.fy, k.cx, k.cy, c.truth.rotation, c.truth.translation, c.cad.keypoints[i]);
    Vector2 p(uv[0], uv[1]);
    if (noise_px > 0) p += Vector2(noise(rng), noise(rng));
    c.keypoints.push_back({KeypointName(i), p, 1.0, true});
  }
  return c;
}

inline SolveReport solve_case(const PoseCase& c, const SolverOptions& opts = {}) {
  const auto prior = ground_prior_from_box(c.homography, c.camera.extrinsics, c.box, c.cad.ground_offset());
  return solve_pnp(match_keypoints(c.keypoints, c.cad), c.camera.intrinsics, std::nullopt, opts, prior);
}

// Central differences of the residual vector.
inline Eigen::MatrixXd numeric_jacobian(const Correspondences& c, const CameraIntrinsics& k, const PoseParams& x) {
  const double h = 1e-6;
  const Eigen::Index rows = residual_and_jacobian(c, k, x).residual.size();
  Eigen::MatrixXd j(rows, 6);
  for (int i = 0; i < 6; ++i) {
    PoseParams xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    j.col(i) = (residual_and_jacobian(c, k, xp).residual - residual_and_jacobian(c, k, xm).residual) / (2 * h);
  }
  return j;
}

// ---- ray-cast rasterizer --------------------------------------------------

struct RayCast {
  ImageI32 face;
  ImageF32 depth;
};

// Casts the ray through every pixel centre and keeps the nearest triangle hit
// (Moller-Trumbore, closed triangles); equal depths keep the lower face index.
inline RayCast raycast(const CadModel& cad, const Pose& pose, const CameraIntrinsics& k, const Rect& vp,
                       bool cull_backfaces) {
  RayCast out{ImageI32(vp.width, vp.height, 1, -1),
              ImageF32(vp.width, vp.height, 1, std::numeric_limits<float>::infinity())};
  std::vector<std::array<Vector3, 3>> tris;
  for (const auto& f : cad.faces) {
    tris.push_back({pose * cad.vertices[std::size_t(f[0])], pose * cad.vertices[std::size_t(f[1])],
                    pose * cad.vertices[std::size_t(f[2])]});
  }
  for (int j = 0; j < vp.height; ++j) {
    for (int i = 0; i < vp.width; ++i) {
      const Vector3 d((vp.x + i - k.cx) / k.fx, (vp.y + j - k.cy) / k.fy, 1.0);
      double best = std::numeric_limits<double>::infinity();
      int best_face = -1;
      for (int f = 0; f < int(tris.size()); ++f) {
        const auto& t = tris[std::size_t(f)];
        const Vector3 e1 = t[1] - t[0], e2 = t[2] - t[0];
        if (cull_backfaces && e1.cross(e2).dot(t[0]) >= 0) continue;
        const Vector3 pv = d.cross(e2);
        const double det = e1.dot(pv);
        if (std::abs(det) < 1e-15) continue;
        const Vector3 tv = -t[0];
        const double u = tv.dot(pv) / det;
        const Vector3 qv = tv.cross(e1);
        const double v = d.dot(qv) / det;
        const double z = e2.dot(qv) / det;
        if (u < 0 || v < 0 || u + v > 1 || z < kNearPlane) continue;
        if (z < best) {
          best = z;
          best_face = f;
        }
      }
      out.face.at(i, j) = best_face;
      out.depth.at(i, j) = float(best);
    }
  }
  return out;
}

// ---- metrics references ---------------------------------------------------

inline double ref_mse(const ImageU8& a, const ImageU8& b) {
  double s = 0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x)
      for (int c = 0; c < a.channels; ++c) {
        const double d = double(a.at(x, y, c)) - double(b.at(x, y, c));
        s += d * d;
      }
  return s / (double(a.width) * a.height * a.channels);
}

inline double ref_gray(const ImageU8& im, int x, int y) {
  return im.channels >= 3 ? 0.299 * im.at(x, y, 0) + 0.587 * im.at(x, y, 1) + 0.114 * im.at(x, y, 2)
                          : double(im.at(x, y, 0));
}

// Window-by-window SSIM with the 2D Gaussian normalised directly.
inline double ref_ssim(const ImageU8& a, const ImageU8& b) {
  const double c1 = std::pow(0.01 * 255, 2), c2 = std::pow(0.03 * 255, 2);
  auto term = [&](double mx, double my, double vx, double vy, double cxy) {
    return ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
  };
  const int n = 11;
  if (a.width < n || a.height < n) {
    double mx = 0, my = 0;
    const double count = double(a.width) * a.height;
    for (int y = 0; y < a.height; ++y)
      for (int x = 0; x < a.width; ++x) {
        mx += ref_gray(a, x, y);
        my += ref_gray(b, x, y);
      }
    mx /= count;
    my /= count;
    double vx = 0, vy = 0, cxy = 0;
    for (int y = 0; y < a.height; ++y)
      for (int x = 0; x < a.width; ++x) {
        const double dx = ref_gray(a, x, y) - mx, dy = ref_gray(b, x, y) - my;
        vx += dx * dx;
        vy += dy * dy;
        cxy += dx * dy;
      }
    return term(mx, my, vx / count, vy / count, cxy / count);
  }
  double w[11][11], wsum = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      w[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
      wsum += w[i][j];
    }
  double total = 0;
  int windows = 0;
  for (int y0 = 0; y0 + n <= a.height; ++y0) {
    for (int x0 = 0; x0 + n <= a.width; ++x0) {
      double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double ww = w[i][j] / wsum, gx = ref_gray(a, x0 + j, y0 + i), gy = ref_gray(b, x0 + j, y0 + i);
          mx += ww * gx;
          my += ww * gy;
          xx += ww * gx * gx;
          yy += ww * gy * gy;
          xy += ww * gx * gy;
        }
      total += term(mx, my, xx - mx * mx, yy - my * my, xy - mx * my);
      ++windows;
    }
  }
  return total / windows;
}

inline double ref_inception(const std::vector<std::vector<double>>& p) {
  const std::size_t n = p.size(), k = p[0].size();
  std::vector<double> q(k, 0.0);
  for (const auto& row : p)
    for (std::size_t j = 0; j < k; ++j) q[j] += row[j] / double(n);
  double kl = 0;
  for (const auto& row : p)
    for (std::size_t j = 0; j < k; ++j)
      if (row[j] > 0) kl += row[j] * std::log(row[j] / q[j]);
  return std::exp(kl / double(n));
}

// Closed form for diagonal covariances: ||dm||^2 + sum (sqrt(a) - sqrt(b))^2.
inline double diag_fid(const Eigen::VectorXd& ma, const Eigen::VectorXd& va, const Eigen::VectorXd& mb,
                       const Eigen::VectorXd& vb) {
  double s = 0;
  for (Eigen::Index i = 0; i < ma.size(); ++i) {
    s += (ma[i] - mb[i]) * (ma[i] - mb[i]);
    s += (std::sqrt(va[i]) - std::sqrt(vb[i])) * (std::sqrt(va[i]) - std::sqrt(vb[i]));
  }
  return s;
}

// ---- random images --------------------------------------------------------

inline ImageU8 random_image(std::mt19937_64& rng, int w, int h, int c = 3) {
  ImageU8 im(w, h, c);
  for (auto& v : im.data) v = std::uint8_t(rng() % 256);
  return im;
}

inline ImageU8 perturbed(std::mt19937_64& rng, const ImageU8& im, int amplitude) {
  ImageU8 out = im;
  for (auto& v : out.data) v = std::uint8_t(std::clamp(int(v) + int(rng() % (2 * amplitude + 1)) - amplitude, 0, 255));
  return out;
}

// Silhouette intersection over union of two renders placed in one frame.
inline double silhouette_iou(const RenderedCrop& a, const RenderedCrop& b) {
  long long inter = 0, uni = 0;
  const int x0 = std::min(a.viewport.x, b.viewport.x), y0 = std::min(a.viewport.y, b.viewport.y);
  const int x1 = std::max(a.viewport.x + a.viewport.width, b.viewport.x + b.viewport.width);
  const int y1 = std::max(a.viewport.y + a.viewport.height, b.viewport.y + b.viewport.height);
  auto covered = [](const RenderedCrop& r, int x, int y) {
    return r.viewport.contains(x, y) && r.alpha.at(x - r.viewport.x, y - r.viewport.y) > 0;
  };
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      const bool ca = covered(a, x, y), cb = covered(b, x, y);
      inter += ca && cb;
      uni += ca || cb;
    }
  return uni == 0 ? 1.0 : double(inter) / double(uni);
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() /
                 ("urbanfuture_test_" + std::to_string(::getpid()) + "_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace uftest
