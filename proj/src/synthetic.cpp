#include "urbanfuture/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "urbanfuture/error.hpp"

namespace urbanfuture {

namespace {

void add_box(CadModel& cad, const Vector3& lo, const Vector3& hi) {
  const int base = int(cad.vertices.size());
  for (int i = 0; i < 8; ++i) {
    cad.vertices.emplace_back(i & 1 ? hi.x() : lo.x(), i & 2 ? hi.y() : lo.y(), i & 4 ? hi.z() : lo.z());
  }
  // Quads listed counter-clockwise seen from outside.
  static constexpr int quads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4},
                                      {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  for (const auto& q : quads) {
    cad.faces.emplace_back(base + q[0], base + q[1], base + q[2]);
    cad.faces.emplace_back(base + q[0], base + q[2], base + q[3]);
  }
}

}  // namespace

CadModel make_car_cad(int variant) {
  if (variant < 1 || variant > 10) throw Error(ErrorKind::InvalidArgument, "car variant must be in 1..10");
  const double v = variant - 1;
  const double length = 3.8 + 0.12 * v;
  const double width = 1.65 + 0.02 * v;
  const double clearance = 0.18;
  const double body_h = 0.75 + 0.02 * std::fmod(v * 3, 5);
  const double cabin_h = 0.55 + 0.015 * std::fmod(v * 7, 4);
  const double cabin_front = length * (0.18 - 0.01 * std::fmod(v, 3));
  const double cabin_rear = length * (0.12 + 0.015 * std::fmod(v, 4));
  const double inset = 0.08;

  const double x0 = -length / 2, x1 = length / 2, y0 = -width / 2, y1 = width / 2;
  const double zb = clearance, zt = clearance + body_h, zc = zt + cabin_h;
  const double cx0 = x0 + cabin_rear, cx1 = x1 - cabin_front;

  CadModel cad;
  cad.id = variant;
  add_box(cad, {x0, y0, zb}, {x1, y1, zt});
  // The cabin floor sinks slightly into the body so it never shares the body's top plane.
  add_box(cad, {cx0, y0 + inset, zt - 0.05}, {cx1, y1 - inset, zc});

  const double wheel_x = length / 2 - 0.75, wheel_z = clearance + 0.15;
  const double light_z = clearance + 0.6 * body_h;
  auto& k = cad.keypoints;
  k[std::size_t(KeypointName::WheelFL)] = {wheel_x, y1, wheel_z};
  k[std::size_t(KeypointName::WheelFR)] = {wheel_x, y0, wheel_z};
  k[std::size_t(KeypointName::WheelRL)] = {-wheel_x, y1, wheel_z};
  k[std::size_t(KeypointName::WheelRR)] = {-wheel_x, y0, wheel_z};
  k[std::size_t(KeypointName::LightFL)] = {x1, y1 - 0.2, light_z};
  k[std::size_t(KeypointName::LightFR)] = {x1, y0 + 0.2, light_z};
  k[std::size_t(KeypointName::LightRL)] = {x0, y1 - 0.2, light_z};
  k[std::size_t(KeypointName::LightRR)] = {x0, y0 + 0.2, light_z};
  k[std::size_t(KeypointName::WindshieldTL)] = {cx1, y1 - inset, zc};
  k[std::size_t(KeypointName::WindshieldTR)] = {cx1, y0 + inset, zc};
  k[std::size_t(KeypointName::RearWindowTL)] = {cx0, y1 - inset, zc};
  k[std::size_t(KeypointName::RearWindowTR)] = {cx0, y0 + inset, zc};

  Vector3 centroid = Vector3::Zero();
  for (const auto& p : cad.vertices) centroid += p;
  centroid /= double(cad.vertices.size());
  for (auto& p : cad.vertices) p -= centroid;
  for (auto& p : cad.keypoints) p -= centroid;
  return cad;
}

SyntheticCamera make_synthetic_camera(int width, int height) {
  SyntheticCamera cam;
  cam.intrinsics = {500.0 * width / 640.0, 500.0 * width / 640.0, width / 2.0, height / 2.0, width, height};
  const double pitch = deg2rad(22.0);
  Matrix3 tilt;
  tilt << 1, 0, 0, 0, std::cos(pitch), -std::sin(pitch), 0, std::sin(pitch), std::cos(pitch);
  const Vector3 centre(0.0, -14.0, 6.0);
  cam.extrinsics.rotation = tilt * level_camera_rotation();
  cam.extrinsics.translation = -cam.extrinsics.rotation * centre;
  return cam;
}

ImageU8 make_road_plate(const SyntheticCamera& cam, std::uint32_t seed) {
  const auto& k = cam.intrinsics;
  const GroundHomography h = homography_from_extrinsics(k, cam.extrinsics);
  const Pose cam_to_world = invert(cam.extrinsics);
  std::mt19937 rng(seed);
  ImageU8 img(k.width, k.height, 3);
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      const int noise = int(rng() % 17) - 8;
      const Vector3 ray = cam_to_world.rotation * back_project(k, Vector2(x, y));
      std::array<int, 3> c;
      if (ray.z() >= -1e-3) {
        const double s = double(y) / k.height;
        c = {int(110 + 80 * s), int(160 + 60 * s), 235};
      } else {
        const Vector2 g = lift_ground_point(h, Vector2(x, y));
        const double across = std::abs(g.y());
        if (across > 5.0) {
          c = {86 + noise, 122 + noise, 70 + noise};  // verge
        } else {
          const bool edge_line = across > 4.7;
          const bool centre_dash = std::abs(g.y()) < 0.08 && std::fmod(std::abs(g.x()) + 100.0, 4.0) < 2.0;
          const int a = 92 + noise;
          c = edge_line || centre_dash ? std::array<int, 3>{228 + noise / 2, 226 + noise / 2, 214}
                                       : std::array<int, 3>{a, a, a + 4};
        }
      }
      for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = std::uint8_t(std::clamp(c[std::size_t(ch)], 0, 255));
    }
  }
  return img;
}

Pose ground_vehicle_pose(const CadModel& cad, const Pose& extrinsics, double x, double y, double yaw) {
  const Pose world{rotation_z(yaw), Vector3(x, y, cad.ground_offset())};
  return compose(extrinsics, world);
}

RenderedCrop render_shaded(const CadModel& cad, const Pose& pose, const CameraIntrinsics& intr,
                           const std::array<std::uint8_t, 3>& color) {
  RenderedCrop r = rasterize(cad, pose, intr, projected_viewport(cad, pose, intr), true);
  const auto normals = face_normals(cad, pose);
  const Vector3 light = Vector3(0.3, -0.8, -0.5).normalized();
  for (int y = 0; y < r.face_id.height; ++y) {
    for (int x = 0; x < r.face_id.width; ++x) {
      const int f = r.face_id.at(x, y);
      if (f < 0) continue;
      const double shade = 0.35 + 0.65 * std::max(0.0, normals[std::size_t(f)].dot(light));
      for (int c = 0; c < 3; ++c) r.color.at(x, y, c) = std::uint8_t(std::lround(color[std::size_t(c)] * shade));
    }
  }
  return r;
}

void paste(ImageU8& frame, const RenderedCrop& render) {
  const Rect clipped = render.viewport.intersect({0, 0, frame.width, frame.height});
  for (int y = clipped.y; y < clipped.y + clipped.height; ++y) {
    for (int x = clipped.x; x < clipped.x + clipped.width; ++x) {
      const int lx = x - render.viewport.x, ly = y - render.viewport.y;
      if (render.alpha.at(lx, ly) == 0) continue;
      for (int c = 0; c < 3; ++c) frame.at(x, y, c) = render.color.at(lx, ly, c);
    }
  }
}

Box alpha_box(const RenderedCrop& r) {
  int x0 = std::numeric_limits<int>::max(), y0 = x0, x1 = -1, y1 = -1;
  for (int y = 0; y < r.alpha.height; ++y) {
    for (int x = 0; x < r.alpha.width; ++x) {
      if (r.alpha.at(x, y) == 0) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) throw Error(ErrorKind::EmptyMesh, "render covers no pixel");
  return {double(r.viewport.x + x0), double(r.viewport.y + y0), double(x1 - x0 + 1), double(y1 - y0 + 1)};
}

SyntheticScene make_synthetic_scene(const SyntheticOptions& opts) {
  SyntheticScene s;
  s.camera = make_synthetic_camera(opts.width, opts.height);
  s.clean_plate = make_road_plate(s.camera, opts.seed);
  const CadModel cad = make_car_cad(opts.cad_id);
  const auto& k = s.camera.intrinsics;
  const Pose& e = s.camera.extrinsics;

  SceneBundle& b = s.bundle;
  b.clip_id = "synthetic";
  b.frame_count = opts.frame_count;
  b.width = opts.width;
  b.height = opts.height;
  b.homography = homography_from_extrinsics(k, e);
  b.intrinsics = k;
  b.config = {opts.fps, 0.2, 1.0};
  b.cad_assignments[opts.vehicle_id] = opts.cad_id;
  b.cads[opts.cad_id] = cad;

  VehicleTrack track;
  track.vehicle_id = opts.vehicle_id;
  for (int f = 0; f < opts.frame_count; ++f) {
    const Pose pose = ground_vehicle_pose(cad, e, opts.start_x + opts.speed * f, 0.0, 0.0);
    s.poses.push_back(pose);
    const RenderedCrop r = render_shaded(cad, pose, k, {180, 40, 36});
    ImageU8 frame = s.clean_plate;
    paste(frame, r);
    s.frames.push_back(std::move(frame));
    track.entries.push_back({f, alpha_box(r), 1.0});

    KeypointObservation obs{f, opts.vehicle_id, {}};
    for (std::size_t i = 0; i < kKeypointCount; ++i) {
      obs.keypoints.push_back({KeypointName(i), project(k, pose, cad.keypoints[i]), 1.0, true});
    }
    b.keypoints.push_back(std::move(obs));
  }
  b.tracks.push_back(std::move(track));

  const Vector2 start(opts.start_x, 0.0);
  const Vector2 start_px = unlift_ground_point(b.homography, start);
  b.trajectories.push_back({"stationary", {start_px, start_px}});
  NamedPolyline turn{"quarter_turn", {start_px}};
  Vector2 p = start;
  for (int i = 0; i < 5; ++i) {
    const double heading = deg2rad(22.5 * i);
    p += 2.0 * Vector2(std::cos(heading), std::sin(heading));
    turn.points.push_back(unlift_ground_point(b.homography, p));
  }
  b.trajectories.push_back(std::move(turn));
  return s;
}

}  // namespace urbanfuture
