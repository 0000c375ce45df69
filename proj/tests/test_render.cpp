#include <gtest/gtest.h>

#include "support.hpp"

using namespace urbanfuture;
using uftest::error_kind;
using uftest::uniform;

namespace {

const CameraIntrinsics kSmall{150, 150, 64, 64, 128, 128};

// A car floating in front of a 128 x 128 camera, filling a good part of the view.
Pose random_view(std::mt19937_64& rng) {
  return {uftest::random_rotation(rng), Vector3(uniform(rng, -0.8, 0.8), uniform(rng, -0.8, 0.8), uniform(rng, 7, 12))};
}

double agreement(const RenderedCrop& r, const uftest::RayCast& ref) {
  long long same = 0;
  for (std::size_t i = 0; i < ref.face.data.size(); ++i) same += r.face_id.data[i] == ref.face.data[i];
  return double(same) / double(ref.face.data.size());
}

}  // namespace

TEST(Rasterize, AgreesWithRayCaster) {
  std::mt19937_64 rng(41);
  const Rect vp{0, 0, 128, 128};
  for (int scene = 0; scene < 20; ++scene) {
    const CadModel cad = make_car_cad(int(rng() % 10) + 1);
    const Pose pose = random_view(rng);
    for (bool cull : {false, true}) {
      const auto r = rasterize(cad, pose, kSmall, vp, cull);
      const auto ref = uftest::raycast(cad, pose, kSmall, vp, cull);
      EXPECT_GE(agreement(r, ref), 0.995) << scene << " cull " << cull;
      for (std::size_t i = 0; i < ref.face.data.size(); ++i) {
        if (r.face_id.data[i] >= 0 && ref.face.data[i] == r.face_id.data[i]) {
          EXPECT_NEAR(r.depth.data[i], ref.depth.data[i], 1e-4);
        }
      }
    }
  }
}

TEST(Rasterize, ViewportOffsetSamplesFramePixels) {
  std::mt19937_64 rng(42);
  const CadModel cad = make_car_cad(2);
  const Pose pose = random_view(rng);
  const auto full = rasterize(cad, pose, kSmall, {0, 0, 128, 128}, true);
  const Rect sub{30, 40, 50, 37};
  const auto part = rasterize(cad, pose, kSmall, sub, true);
  for (int y = 0; y < sub.height; ++y)
    for (int x = 0; x < sub.width; ++x) EXPECT_EQ(part.face_id.at(x, y), full.face_id.at(x + sub.x, y + sub.y));
}

TEST(Rasterize, CullingRemovesOnlyHiddenFaces) {
  std::mt19937_64 rng(43);
  const CadModel cad = make_car_cad(5);
  const Pose pose = random_view(rng);
  const Rect vp{0, 0, 128, 128};
  const auto culled = rasterize(cad, pose, kSmall, vp, true);
  const auto full = rasterize(cad, pose, kSmall, vp, false);
  // A closed outward-wound mesh looks the same with or without culling.
  EXPECT_GE(agreement(culled, {full.face_id, full.depth}), 0.995);
  EXPECT_EQ(culled.coverage(), full.coverage());
}

TEST(Rasterize, BehindCameraIsFlaggedEmpty) {
  const CadModel cad = make_car_cad(1);
  const Pose pose{Matrix3::Identity(), Vector3(0, 0, -10)};
  const auto r = rasterize(cad, pose, kSmall, {0, 0, 128, 128}, true);
  EXPECT_TRUE(r.behind_camera);
  EXPECT_EQ(r.coverage(), 0);
  EXPECT_TRUE(render_normal_sketch(cad, pose, kSmall, {0, 0, 128, 128}).behind_camera);
}

TEST(Rasterize, StraddlingNearPlaneIsClipped) {
  const CadModel cad = make_car_cad(1);
  const Pose pose{Matrix3::Identity(), Vector3(0, 0, 0.5)};
  EXPECT_EQ(projected_viewport(cad, pose, kSmall), (Rect{0, 0, 128, 128}));
  const auto r = rasterize(cad, pose, kSmall, {0, 0, 128, 128}, false);
  EXPECT_FALSE(r.behind_camera);
  for (float d : r.depth.data)
    if (std::isfinite(d)) EXPECT_GE(d, kNearPlane * 0.999);
}

TEST(NormalSketch, DecodesToUnitFacingNormals) {
  std::mt19937_64 rng(44);
  for (int scene = 0; scene < 10; ++scene) {
    const CadModel cad = make_car_cad(int(rng() % 10) + 1);
    const Pose pose = random_view(rng);
    const auto s = render_normal_sketch(cad, pose, kSmall, {0, 0, 128, 128});
    const auto normals = face_normals(cad, pose);
    ASSERT_GT(s.coverage(), 0);
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 128; ++x) {
        const int f = s.face_id.at(x, y);
        if (f < 0) {
          EXPECT_EQ(s.alpha.at(x, y), 0);
          continue;
        }
        const Vector3 n = decode_normal(&s.color.at(x, y, 0));
        EXPECT_NEAR(n.norm(), 1.0, 2.0 / 255.0 * std::sqrt(3.0));
        EXPECT_LT((n.cwiseAbs() - normals[std::size_t(f)].cwiseAbs()).cwiseAbs().maxCoeff(), 1.0 / 255.0 + 1e-12);
        const Vector3 ray = back_project(kSmall, Vector2(x, y));
        EXPECT_LE(n.dot(ray), 1.0 / 255.0 * ray.norm() * 2);
      }
  }
}

TEST(NormalSketch, EncodingIsHalfOffsetRounding) {
  const auto c = encode_normal(Vector3(1, 0, -1));
  EXPECT_EQ(c[0], 255);
  EXPECT_EQ(c[1], 128);
  EXPECT_EQ(c[2], 0);
  const std::uint8_t rgb[3] = {255, 0, 128};
  const Vector3 n = decode_normal(rgb);
  EXPECT_DOUBLE_EQ(n.x(), 1.0);
  EXPECT_DOUBLE_EQ(n.y(), -1.0);
}

TEST(ProjectedViewport, BoundsProjectedVertices) {
  std::mt19937_64 rng(45);
  const CadModel cad = make_car_cad(3);
  const CameraIntrinsics k{300, 300, 320, 180, 640, 360};
  const Pose pose{uftest::random_rotation(rng), Vector3(0.3, -0.2, 15)};
  const Rect vp = projected_viewport(cad, pose, k, 0);
  for (const auto& v : cad.vertices) {
    const Vector2 uv = project(k, pose, v);
    EXPECT_GE(uv.x(), vp.x - 1);
    EXPECT_LE(uv.x(), vp.x + vp.width);
    EXPECT_GE(uv.y(), vp.y - 1);
    EXPECT_LE(uv.y(), vp.y + vp.height);
  }
  const auto r = rasterize(cad, pose, k, {0, 0, 640, 360}, true);
  long long inside = 0;
  for (int y = vp.y; y < vp.y + vp.height; ++y)
    for (int x = vp.x; x < vp.x + vp.width; ++x) inside += r.face_id.at(x, y) >= 0;
  EXPECT_EQ(inside, r.coverage());
}

// Brute force: a front-facing face is seen in the source view when the ray
// through the pixel nearest its centroid hits its plane first.
TEST(BakeAppearance, VisibilityMatchesRayCastOracle) {
  std::mt19937_64 rng(46);
  int checked = 0, mismatched = 0;
  for (int scene = 0; scene < 10; ++scene) {
    const CadModel cad = make_car_cad(int(rng() % 10) + 1);
    const Pose pose = random_view(rng);
    const Rect vp = projected_viewport(cad, pose, kSmall, 0);
    const ImageU8 crop = uftest::random_image(rng, vp.width, vp.height);
    const auto baked = bake_appearance(cad, crop, vp, pose, kSmall);
    const auto ref = uftest::raycast(cad, pose, kSmall, vp, false);
    for (int f = 0; f < int(cad.faces.size()); ++f) {
      const Vector3 a = pose * cad.vertices[std::size_t(cad.faces[std::size_t(f)][0])];
      const Vector3 b = pose * cad.vertices[std::size_t(cad.faces[std::size_t(f)][1])];
      const Vector3 c = pose * cad.vertices[std::size_t(cad.faces[std::size_t(f)][2])];
      const Vector3 n = (b - a).cross(c - a), centroid = (a + b + c) / 3.0;
      bool visible = false;
      if (n.dot(centroid) < 0) {
        const double u = kSmall.fx * centroid.x() / centroid.z() + kSmall.cx - vp.x;
        const double v = kSmall.fy * centroid.y() / centroid.z() + kSmall.cy - vp.y;
        if (u >= 0 && v >= 0 && u <= vp.width - 1 && v <= vp.height - 1) {
          const int px = int(std::floor(u + 0.5)), py = int(std::floor(v + 0.5));
          const int hit = ref.face.at(px, py);
          if (hit >= 0) {
            const Vector3 d((vp.x + px - kSmall.cx) / kSmall.fx, (vp.y + py - kSmall.cy) / kSmall.fy, 1);
            visible = std::abs(n.dot(a) / n.dot(d) - ref.depth.at(px, py)) < 1e-3;
          }
        }
      }
      ++checked;
      mismatched += visible != bool(baked.valid[std::size_t(f)]);
    }
  }
  EXPECT_LE(mismatched, checked / 100) << mismatched << " of " << checked;
}

TEST(BakeAppearance, UniformCropGivesUniformColours) {
  std::mt19937_64 rng(47);
  const CadModel cad = make_car_cad(6);
  const Pose pose = random_view(rng);
  const Rect vp = projected_viewport(cad, pose, kSmall, 0);
  ImageU8 crop(vp.width, vp.height, 3);
  for (int y = 0; y < vp.height; ++y)
    for (int x = 0; x < vp.width; ++x) {
      crop.at(x, y, 0) = 10;
      crop.at(x, y, 1) = 200;
      crop.at(x, y, 2) = 77;
    }
  const auto baked = bake_appearance(cad, crop, vp, pose, kSmall);
  EXPECT_GT(baked.valid_count(), 0);
  EXPECT_LT(baked.valid_count(), int(cad.faces.size()));
  const auto r = render_appearance(cad, baked, pose, kSmall, vp);
  for (int y = 0; y < vp.height; ++y)
    for (int x = 0; x < vp.width; ++x) {
      if (r.alpha.at(x, y) == 0) continue;
      EXPECT_EQ(r.color.at(x, y, 0), 10);
      EXPECT_EQ(r.color.at(x, y, 1), 200);
      EXPECT_EQ(r.color.at(x, y, 2), 77);
    }
}

TEST(BakeAppearance, Errors) {
  const CadModel cad = make_car_cad(1);
  const Pose pose{Matrix3::Identity(), Vector3(0, 0, 10)};
  const Rect vp{0, 0, 20, 20};
  EXPECT_EQ(error_kind([&] { bake_appearance(cad, ImageU8(10, 10, 3), vp, pose, kSmall); }),
            ErrorKind::DimensionMismatch);
  // A crop far from the projected car sees no face.
  const Rect corner{0, 0, 4, 4};
  EXPECT_EQ(error_kind([&] { bake_appearance(cad, ImageU8(4, 4, 3), corner, pose, kSmall); }), ErrorKind::NoValidFace);
}

TEST(NormalSketch, FacingTriangleEncodesTowardCamera) {
  CadModel tri;
  tri.vertices = {{-1, -1, 0}, {1, -1, 0}, {0, 1, 0}};
  tri.faces = {Eigen::Vector3i(0, 1, 2)};
  const auto s = render_normal_sketch(tri, {Matrix3::Identity(), Vector3(0, 0, 5)}, kSmall, {0, 0, 128, 128});
  ASSERT_GT(s.coverage(), 0);
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) {
      if (s.alpha.at(x, y) == 0) continue;
      EXPECT_EQ(s.color.at(x, y, 0), 128);
      EXPECT_EQ(s.color.at(x, y, 1), 128);
      EXPECT_EQ(s.color.at(x, y, 2), 0);
      EXPECT_FLOAT_EQ(s.depth.at(x, y), 5.0f);
    }
}

TEST(NormalSketch, NearerTriangleWins) {
  CadModel two;
  two.vertices = {{-1, -1, 4}, {1, -1, 4}, {0, 1, 4}, {-1, -1, 6}, {1, 1, 6}, {-1, 1, 6}};
  two.faces = {Eigen::Vector3i(3, 4, 5), Eigen::Vector3i(0, 1, 2)};
  const auto s = render_normal_sketch(two, Pose::identity(), kSmall, {0, 0, 128, 128});
  const int x = 64, y = 64;  // covered by both
  EXPECT_EQ(s.face_id.at(x, y), 1);
  EXPECT_FLOAT_EQ(s.depth.at(x, y), 4.0f);
}

TEST(NormalSketch, UnitCubeAtFortyFiveDegreesMatchesOracle) {
  CadModel cube;
  for (int i = 0; i < 8; ++i) cube.vertices.emplace_back(i & 1 ? 0.5 : -0.5, i & 2 ? 0.5 : -0.5, i & 4 ? 0.5 : -0.5);
  for (const auto& q : {std::array{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}}) {
    cube.faces.emplace_back(q[0], q[1], q[2]);
    cube.faces.emplace_back(q[0], q[2], q[3]);
  }
  const Pose pose{Eigen::AngleAxisd(M_PI / 4, Vector3::UnitY()).toRotationMatrix() *
                      Eigen::AngleAxisd(0.3, Vector3::UnitX()).toRotationMatrix(),
                  Vector3(0, 0, 6)};
  const Rect vp{0, 0, 128, 128};
  const auto s = render_normal_sketch(cube, pose, kSmall, vp);
  const auto ref = uftest::raycast(cube, pose, kSmall, vp, false);
  long long same = 0;
  for (std::size_t i = 0; i < ref.face.data.size(); ++i) same += s.face_id.data[i] == ref.face.data[i];
  EXPECT_GE(double(same) / double(ref.face.data.size()), 0.995);
}

TEST(RenderAppearance, NoMotionKeepsSilhouette) {
  std::mt19937_64 rng(48);
  const CadModel cad = make_car_cad(7);
  const Pose pose = random_view(rng);
  const Rect vp = projected_viewport(cad, pose, kSmall, 0);
  const auto baked = bake_appearance(cad, uftest::random_image(rng, vp.width, vp.height), vp, pose, kSmall);
  const auto app = render_appearance(cad, baked, pose, kSmall, vp);
  const auto sketch = render_normal_sketch(cad, pose, kSmall, vp);
  EXPECT_EQ(uftest::silhouette_iou(app, sketch), 1.0);
}

TEST(FaceNormals, RotateWithThePose) {
  std::mt19937_64 rng(49);
  const CadModel cad = make_car_cad(8);
  const Pose pose = random_view(rng);
  const Matrix3 extra = uftest::random_rotation(rng);
  const auto base = face_normals(cad, pose);
  const auto turned = face_normals(cad, {extra * pose.rotation, extra * pose.translation});
  for (std::size_t f = 0; f < base.size(); ++f) EXPECT_LT((extra * base[f] - turned[f]).norm(), 1e-9);
}
