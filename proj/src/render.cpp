#include "urbanfuture/render.hpp"

#include <cmath>
#include <limits>

namespace urbanfuture {

namespace {

constexpr float kEmptyDepth = std::numeric_limits<float>::infinity();

struct ScreenVertex {
  double u, v, z;
};

double raw_edge(const ScreenVertex& a, const ScreenVertex& b, double px, double py) {
  return (b.u - a.u) * (py - a.v) - (b.v - a.v) * (px - a.u);
}

// Evaluated from a canonical endpoint order so that a shared edge gives exactly
// opposite values for the two triangles on either side of it.
double edge(const ScreenVertex& a, const ScreenVertex& b, double px, double py) {
  const bool ordered = a.u < b.u || (a.u == b.u && a.v < b.v);
  return ordered ? raw_edge(a, b, px, py) : -raw_edge(b, a, px, py);
}

// For triangles with positive area in image coordinates (v down).
bool is_top_left(const ScreenVertex& a, const ScreenVertex& b) {
  return (a.v == b.v && b.u > a.u) || b.v < a.v;
}

bool covers(double w, bool top_left) { return w > 0.0 || (w == 0.0 && top_left); }

using Polygon = std::vector<Vector3>;

Polygon clip_near(const std::array<Vector3, 3>& tri) {
  Polygon out;
  for (int i = 0; i < 3; ++i) {
    const Vector3& a = tri[std::size_t(i)];
    const Vector3& b = tri[std::size_t((i + 1) % 3)];
    const bool ain = a.z() >= kNearPlane, bin = b.z() >= kNearPlane;
    if (ain) out.push_back(a);
    if (ain != bin) {
      const double s = (kNearPlane - a.z()) / (b.z() - a.z());
      Vector3 p = a + s * (b - a);
      p.z() = kNearPlane;
      out.push_back(p);
    }
  }
  return out;
}

class Rasterizer {
 public:
  Rasterizer(const CameraIntrinsics& intr, RenderedCrop& target) : intr_(intr), out_(target) {}

  void draw(const std::array<Vector3, 3>& tri, int face) {
    const bool inside = tri[0].z() >= kNearPlane && tri[1].z() >= kNearPlane && tri[2].z() >= kNearPlane;
    if (inside) {
      draw_screen({to_screen(tri[0]), to_screen(tri[1]), to_screen(tri[2])}, face);
      return;
    }
    const Polygon poly = clip_near(tri);
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
      draw_screen({to_screen(poly[0]), to_screen(poly[k]), to_screen(poly[k + 1])}, face);
    }
  }

 private:
  ScreenVertex to_screen(const Vector3& p) const {
    return {intr_.fx * p.x() / p.z() + intr_.cx, intr_.fy * p.y() / p.z() + intr_.cy, p.z()};
  }

  void draw_screen(std::array<ScreenVertex, 3> s, int face) {
    double area = edge(s[0], s[1], s[2].u, s[2].v);
    if (!(area != 0.0) || !std::isfinite(area)) return;
    if (area < 0.0) std::swap(s[1], s[2]);

    const Rect& vp = out_.viewport;
    const double umin = std::min({s[0].u, s[1].u, s[2].u}), umax = std::max({s[0].u, s[1].u, s[2].u});
    const double vmin = std::min({s[0].v, s[1].v, s[2].v}), vmax = std::max({s[0].v, s[1].v, s[2].v});
    const int x0 = std::max(vp.x, int(std::ceil(umin)));
    const int x1 = std::min(vp.x + vp.width - 1, int(std::floor(umax)));
    const int y0 = std::max(vp.y, int(std::ceil(vmin)));
    const int y1 = std::min(vp.y + vp.height - 1, int(std::floor(vmax)));
    if (x0 > x1 || y0 > y1) return;

    const bool tl0 = is_top_left(s[1], s[2]);
    const bool tl1 = is_top_left(s[2], s[0]);
    const bool tl2 = is_top_left(s[0], s[1]);
    for (int py = y0; py <= y1; ++py) {
      for (int px = x0; px <= x1; ++px) {
        const double w0 = edge(s[1], s[2], px, py);
        const double w1 = edge(s[2], s[0], px, py);
        const double w2 = edge(s[0], s[1], px, py);
        if (!covers(w0, tl0) || !covers(w1, tl1) || !covers(w2, tl2)) continue;
        const double sum = w0 + w1 + w2;
        // Perspective-correct: 1/z is affine in screen space.
        const double inv_z = (w0 / s[0].z + w1 / s[1].z + w2 / s[2].z) / sum;
        const float z = float(1.0 / inv_z);
        const int lx = px - vp.x, ly = py - vp.y;
        if (z < out_.depth.at(lx, ly)) {
          out_.depth.at(lx, ly) = z;
          out_.face_id.at(lx, ly) = face;
        }
      }
    }
  }

  const CameraIntrinsics& intr_;
  RenderedCrop& out_;
};

std::array<Vector3, 3> camera_triangle(const CadModel& cad, const Pose& pose, int f) {
  const auto& idx = cad.faces[std::size_t(f)];
  return {pose * cad.vertices[std::size_t(idx[0])], pose * cad.vertices[std::size_t(idx[1])],
          pose * cad.vertices[std::size_t(idx[2])]};
}

Vector3 winding_normal(const std::array<Vector3, 3>& t) { return (t[1] - t[0]).cross(t[2] - t[0]); }

std::uint8_t round_channel(double v) {
  return std::uint8_t(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

std::array<std::uint8_t, 3> bilinear(const ImageU8& img, double x, double y) {
  const double fx = std::clamp(x, 0.0, double(img.width - 1));
  const double fy = std::clamp(y, 0.0, double(img.height - 1));
  const int x0 = int(std::floor(fx)), y0 = int(std::floor(fy));
  const int x1 = std::min(x0 + 1, img.width - 1), y1 = std::min(y0 + 1, img.height - 1);
  const double ax = fx - x0, ay = fy - y0;
  std::array<std::uint8_t, 3> out{};
  for (int c = 0; c < 3; ++c) {
    const double top = (1 - ax) * img.at(x0, y0, c) + ax * img.at(x1, y0, c);
    const double bottom = (1 - ax) * img.at(x0, y1, c) + ax * img.at(x1, y1, c);
    out[std::size_t(c)] = round_channel((1 - ay) * top + ay * bottom);
  }
  return out;
}

}  // namespace

double RenderedCrop::mean_depth() const {
  double sum = 0.0;
  long long n = 0;
  for (std::size_t i = 0; i < alpha.data.size(); ++i) {
    if (alpha.data[i] > 0) {
      sum += depth.data[i];
      ++n;
    }
  }
  return n > 0 ? sum / double(n) : std::numeric_limits<double>::infinity();
}

long long RenderedCrop::coverage() const {
  long long n = 0;
  for (auto a : alpha.data) n += a > 0;
  return n;
}

int BakedAppearance::valid_count() const {
  int n = 0;
  for (bool v : valid) n += v;
  return n;
}

std::array<std::uint8_t, 3> BakedAppearance::mean_valid_color() const {
  std::array<double, 3> sum{0, 0, 0};
  int n = 0;
  for (std::size_t f = 0; f < colors.size(); ++f) {
    if (!valid[f]) continue;
    for (int c = 0; c < 3; ++c) sum[std::size_t(c)] += colors[f][std::size_t(c)];
    ++n;
  }
  if (n == 0) throw Error(ErrorKind::NoValidFace, "appearance has no valid face");
  return {round_channel(sum[0] / n), round_channel(sum[1] / n), round_channel(sum[2] / n)};
}

std::vector<Vector3> face_normals(const CadModel& cad, const Pose& pose) {
  std::vector<Vector3> normals;
  normals.reserve(cad.faces.size());
  for (int f = 0; f < int(cad.faces.size()); ++f) {
    const Vector3 n = winding_normal(camera_triangle(cad, pose, f));
    const double len = n.norm();
    normals.push_back(len > 0.0 ? Vector3(n / len) : Vector3::Zero());
  }
  return normals;
}

std::array<std::uint8_t, 3> encode_normal(const Vector3& n) {
  return {round_channel((n.x() + 1.0) / 2.0 * 255.0), round_channel((n.y() + 1.0) / 2.0 * 255.0),
          round_channel((n.z() + 1.0) / 2.0 * 255.0)};
}

Vector3 decode_normal(const std::uint8_t* rgb) {
  return {rgb[0] / 255.0 * 2.0 - 1.0, rgb[1] / 255.0 * 2.0 - 1.0, rgb[2] / 255.0 * 2.0 - 1.0};
}

Rect projected_viewport(const CadModel& cad, const Pose& pose, const CameraIntrinsics& intr,
                        int padding) {
  const Rect frame{0, 0, intr.width, intr.height};
  double umin = std::numeric_limits<double>::infinity(), vmin = umin;
  double umax = -umin, vmax = -umin;
  for (const auto& v : cad.vertices) {
    const Vector3 pc = pose * v;
    if (pc.z() < kNearPlane) return frame;
    const Vector2 uv = project_camera_point(intr, pc);
    umin = std::min(umin, uv.x());
    umax = std::max(umax, uv.x());
    vmin = std::min(vmin, uv.y());
    vmax = std::max(vmax, uv.y());
  }
  // Far outside the frame the integer conversion below would overflow.
  const double limit = 4.0 * (intr.width + intr.height);
  umin = std::clamp(umin, -limit, limit);
  umax = std::clamp(umax, -limit, limit);
  vmin = std::clamp(vmin, -limit, limit);
  vmax = std::clamp(vmax, -limit, limit);
  const int x0 = int(std::floor(umin)) - padding, y0 = int(std::floor(vmin)) - padding;
  const int x1 = int(std::ceil(umax)) + padding, y1 = int(std::ceil(vmax)) + padding;
  return Rect{x0, y0, x1 - x0 + 1, y1 - y0 + 1}.intersect(frame);
}

RenderedCrop rasterize(const CadModel& cad, const Pose& pose, const CameraIntrinsics& intr,
                       const Rect& viewport, bool cull_backfaces) {
  RenderedCrop out;
  out.viewport = viewport;
  const int w = std::max(0, viewport.width), h = std::max(0, viewport.height);
  out.color = ImageU8(w, h, 3);
  out.alpha = ImageU8(w, h, 1);
  out.depth = ImageF32(w, h, 1, kEmptyDepth);
  out.face_id = ImageI32(w, h, 1, -1);

  bool any_in_front = false;
  for (const auto& v : cad.vertices) any_in_front |= (pose * v).z() >= kNearPlane;
  if (!any_in_front) {
    out.behind_camera = true;
    return out;
  }

  Rasterizer raster(intr, out);
  for (int f = 0; f < int(cad.faces.size()); ++f) {
    const auto tri = camera_triangle(cad, pose, f);
    if (cull_backfaces && winding_normal(tri).dot(tri[0]) >= 0.0) continue;
    raster.draw(tri, f);
  }
  for (std::size_t i = 0; i < out.face_id.data.size(); ++i) {
    out.alpha.data[i] = out.face_id.data[i] >= 0 ? 255 : 0;
  }
  return out;
}

NormalSketch render_normal_sketch(const CadModel& cad, const Pose& pose,
                                  const CameraIntrinsics& intr, const Rect& viewport) {
  NormalSketch sketch = rasterize(cad, pose, intr, viewport, false);
  if (sketch.behind_camera) return sketch;
  // Flat shading: one colour per face, oriented toward the camera.
  std::vector<std::array<std::uint8_t, 3>> colors(cad.faces.size());
  for (int f = 0; f < int(cad.faces.size()); ++f) {
    const auto tri = camera_triangle(cad, pose, f);
    Vector3 n = winding_normal(tri).normalized();
    if (n.dot(tri[0] + tri[1] + tri[2]) > 0.0) n = -n;
    colors[std::size_t(f)] = encode_normal(n);
  }
  for (int y = 0; y < sketch.face_id.height; ++y) {
    for (int x = 0; x < sketch.face_id.width; ++x) {
      const int f = sketch.face_id.at(x, y);
      if (f < 0) continue;
      for (int c = 0; c < 3; ++c) sketch.color.at(x, y, c) = colors[std::size_t(f)][std::size_t(c)];
    }
  }
  return sketch;
}

BakedAppearance bake_appearance(const CadModel& cad, const ImageU8& source_crop,
                                const Rect& source_rect, const Pose& source_pose,
                                const CameraIntrinsics& intr) {
  if (source_crop.channels < 3 || source_crop.width != source_rect.width ||
      source_crop.height != source_rect.height) {
    throw Error(ErrorKind::DimensionMismatch, "source crop does not match its frame rectangle");
  }
  BakedAppearance baked;
  baked.source_pose = source_pose;
  baked.source_rect = source_rect;
  baked.colors.assign(cad.faces.size(), {0, 0, 0});
  baked.valid.assign(cad.faces.size(), false);

  // Occlusion pass without culling so thin, inconsistently wound parts still occlude.
  const RenderedCrop depth = rasterize(cad, source_pose, intr, source_rect, false);

  for (int f = 0; f < int(cad.faces.size()); ++f) {
    const auto tri = camera_triangle(cad, source_pose, f);
    const Vector3 centroid = (tri[0] + tri[1] + tri[2]) / 3.0;
    const Vector3 n = winding_normal(tri);
    if (centroid.z() < kNearPlane || n.dot(centroid) >= 0.0) continue;
    const Vector2 uv = project_camera_point(intr, centroid);
    const double lx = uv.x() - source_rect.x, ly = uv.y() - source_rect.y;
    if (lx < 0.0 || ly < 0.0 || lx > source_rect.width - 1.0 || ly > source_rect.height - 1.0) {
      continue;
    }
    const int px = int(std::floor(lx + 0.5)), py = int(std::floor(ly + 0.5));
    const float buffered = depth.depth.at(px, py);
    if (!std::isfinite(buffered)) continue;
    // Depth of this face's plane along the ray through the sampled pixel centre.
    const Vector3 ray = back_project(intr, Vector2(source_rect.x + px, source_rect.y + py));
    const double denom = n.dot(ray);
    if (denom == 0.0) continue;
    const double plane_depth = n.dot(centroid) / denom;
    if (std::abs(plane_depth - double(buffered)) > 1e-3) continue;
    baked.valid[std::size_t(f)] = true;
    baked.colors[std::size_t(f)] = bilinear(source_crop, lx, ly);
  }
  if (baked.valid_count() == 0) {
    throw Error(ErrorKind::NoValidFace, "no face of the model is visible in the source crop");
  }
  return baked;
}

RenderedCrop render_appearance(const CadModel& cad, const BakedAppearance& baked, const Pose& pose,
                               const CameraIntrinsics& intr, const Rect& viewport) {
  if (baked.colors.size() != cad.faces.size() || baked.valid.size() != cad.faces.size()) {
    throw Error(ErrorKind::DimensionMismatch, "baked appearance does not match the model");
  }
  const auto fill = baked.mean_valid_color();
  RenderedCrop out = rasterize(cad, pose, intr, viewport, true);
  for (int y = 0; y < out.face_id.height; ++y) {
    for (int x = 0; x < out.face_id.width; ++x) {
      const int f = out.face_id.at(x, y);
      if (f < 0) continue;
      const auto& rgb = baked.valid[std::size_t(f)] ? baked.colors[std::size_t(f)] : fill;
      for (int c = 0; c < 3; ++c) out.color.at(x, y, c) = rgb[std::size_t(c)];
    }
  }
  return out;
}

}  // namespace urbanfuture
