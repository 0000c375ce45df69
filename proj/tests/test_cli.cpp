#include <gtest/gtest.h>

#include <fstream>
#include <regex>
#include <sstream>

#include "support.hpp"
#include "urbanfuture/cli.hpp"
#include "urbanfuture/metrics.hpp"
#include "urbanfuture/sceneio.hpp"

using namespace urbanfuture;
namespace fs = std::filesystem;

namespace {

const fs::path kShipped = fs::path(UF_TEST_DATA) / "synthetic_bundle";

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "urbanfuture");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(int(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// Value of `key=...` in kv output.
std::string kv_value(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (line.rfind(key + "=", 0) == 0) return line.substr(key.size() + 1);
  return "";
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Leaves only the first three keypoints of frame 0 visible.
void hide_keypoints(const fs::path& bundle) {
  std::ifstream in(bundle / "keypoints.txt");
  std::ostringstream out;
  std::string line;
  int block = -1, row = 0;
  while (std::getline(in, line)) {
    if (line.rfind("frame ", 0) == 0) {
      ++block;
      row = 0;
      out << line << '\n';
      continue;
    }
    if (block == 0 && !line.empty() && line[0] != '#' && row++ >= 3) line.back() = '0';
    out << line << '\n';
  }
  in.close();
  std::ofstream(bundle / "keypoints.txt") << out.str();
}

}  // namespace

TEST(Cli, PoseOnShippedBundle) {
  const auto r = run({"--format", "kv", "pose", "--bundle", kShipped.string(), "--vehicle", "1"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_LT(std::stod(kv_value(r.out, "residual_px")), 1e-6);
  EXPECT_EQ(kv_value(r.out, "converged"), "yes");
  EXPECT_EQ(kv_value(r.out, "approximate_intrinsics"), "no");
  EXPECT_NEAR(std::stod(kv_value(r.out, "yaw_deg")), 0.0, 1e-6);
}

TEST(Cli, PoseYawOnlyHasZeroRollPitch) {
  const auto dir = uftest::scratch_dir("cli_yaw");
  const auto r = run({"--format", "kv", "pose", "--bundle", kShipped.string(), "--vehicle", "1", "--frame", "4",
                      "--yaw-only", "--overlay", (dir / "overlay.png").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(std::stod(kv_value(r.out, "roll_deg")), 0.0);
  EXPECT_EQ(std::stod(kv_value(r.out, "pitch_deg")), 0.0);
  EXPECT_EQ(kv_value(r.out, "mode"), "yaw-only");
  EXPECT_EQ(read_png(dir / "overlay.png").width, 640);
}

TEST(Cli, PoseWithThreeKeypointsFails) {
  const auto dir = uftest::scratch_dir("cli_three_kps");
  fs::copy(kShipped, dir, fs::copy_options::recursive);
  hide_keypoints(dir);
  const auto r = run({"pose", "--bundle", dir.string(), "--vehicle", "1"});
  EXPECT_EQ(r.code, kExitFailure);
  EXPECT_NE(r.err.find("insufficient-correspondences"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({"pose", "--vehicle", "1"}).code, kExitUsage);
  EXPECT_EQ(run({"generate", "--bundle", "x", "--out", "y", "--mode", "cartoon"}).code, kExitUsage);
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
  EXPECT_EQ(run({"pose", "--bundle", "/nonexistent", "--vehicle", "1"}).code, kExitFailure);
}

TEST(Cli, BackgroundCommand) {
  const auto dir = uftest::scratch_dir("cli_background");
  const auto r = run({"--format", "kv", "background", "--bundle", kShipped.string(), "--out", (dir / "bg.png").string(),
                      "--valid-mask", (dir / "valid.png").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(kv_value(r.out, "invalid_pixels"), "0");
  const auto bg = read_png(dir / "bg.png");
  EXPECT_EQ(bg.width, 640);
  EXPECT_EQ(bg.height, 360);
}

TEST(Cli, GenerateWithoutVehiclesIsBackground) {
  const auto dir = uftest::scratch_dir("cli_none");
  const auto r = run({"generate", "--bundle", kShipped.string(), "--out", dir.string(), "--vehicles", "none"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto bg = read_png(dir / "background.png");
  const auto m = read_manifest(dir);
  ASSERT_EQ(m.frames.size(), 5u);
  for (const auto& f : m.frames) EXPECT_EQ(to_rgb(read_png(dir / f.path)).data, to_rgb(bg).data) << f.path;
}

TEST(Cli, ThreePolylinesGiveThreeClips) {
  const auto dir = uftest::scratch_dir("cli_three");
  std::ofstream(dir / "paths.txt") << "# three futures\n"
                                   << "ahead 175.5 190.5 260 190.5 330 190.5\n"
                                   << "left 175.5 190.5 220 180 250 160\n"
                                   << "right 175.5 190.5 220 200 240 230\n";
  const auto r = run({"--format", "kv", "generate", "--bundle", kShipped.string(), "--out", (dir / "out").string(),
                      "--trajectories", (dir / "paths.txt").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* name : {"ahead", "left", "right"}) {
    const auto m = read_manifest(dir / "out" / name);
    EXPECT_EQ(m.clip_id, std::string("synthetic-") + name);
    ASSERT_EQ(m.frames.size(), 5u);
    ASSERT_EQ(m.plans.size(), 1u);
    EXPECT_TRUE(fs::exists(dir / "out" / name / "frame_005.png"));
  }
  const Pose end_left = read_manifest(dir / "out" / "left").plans[0].targets.back().pose;
  const Pose end_right = read_manifest(dir / "out" / "right").plans[0].targets.back().pose;
  EXPECT_GT((end_left.translation - end_right.translation).norm(), 1.0);
}

TEST(Cli, EvalOfGroundTruthCopy) {
  const auto dir = uftest::scratch_dir("cli_eval_gt");
  const auto bundle = load_bundle(kShipped);
  std::vector<ImageU8> frames;
  for (int k = 1; k <= 5; ++k) frames.push_back(bundle.load_frame(2 * k));
  OutputManifest m;
  m.clip_id = "gt";
  write_outputs(dir, frames, m);
  const auto r = run({"--format", "kv", "eval", "--predicted", dir.string(), "--bundle", kShipped.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* label : {"+0.2s", "+0.4s", "+0.6s", "+0.8s", "+1.0s"}) {
    EXPECT_EQ(std::stod(kv_value(r.out, std::string("mse@") + label)), 0.0);
    EXPECT_NEAR(std::stod(kv_value(r.out, std::string("ssim@") + label)), 1.0, 1e-12);
    EXPECT_EQ(kv_value(r.out, std::string("fid@") + label), "skipped");
    EXPECT_EQ(kv_value(r.out, std::string("is@") + label), "skipped");
  }
  const auto table = run({"eval", "--predicted", dir.string(), "--bundle", kShipped.string()});
  EXPECT_NE(table.out.find("skipped"), std::string::npos);
  EXPECT_NE(table.out.find("+1.0s"), std::string::npos);
}

TEST(Cli, EvalMatchesDirectMetricCalls) {
  const auto dir = uftest::scratch_dir("cli_eval_toy");
  ASSERT_EQ(run({"generate", "--bundle", kShipped.string(), "--out", dir.string()}).code, kExitOk);
  const auto feats = dir / "features";
  fs::create_directories(feats);
  Eigen::MatrixXd a = Eigen::MatrixXd::Random(6, 3), b = Eigen::MatrixXd::Random(6, 3);
  write_matrix_file(feats / "target_1.ufm", a);
  write_matrix_file(feats / "predicted_1.ufm", b);
  const auto r = run({"--format", "kv", "eval", "--predicted", dir.string(), "--bundle", kShipped.string(),
                      "--features-dir", feats.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto bundle = load_bundle(kShipped);
  const Rect box = bundle.track(1)->at_frame(2)->box.to_rect().intersect({0, 0, 640, 360});
  const ImageU8 gt = crop(bundle.load_frame(2), box);
  const ImageU8 pred = crop(to_rgb(read_png(dir / "frame_001.png")), box);
  EXPECT_EQ(kv_value(r.out, "crops@+0.2s"), "1");
  EXPECT_NEAR(std::stod(kv_value(r.out, "mse@+0.2s")), mse(gt, pred), 1e-9);
  EXPECT_NEAR(std::stod(kv_value(r.out, "ssim@+0.2s")), ssim(gt, pred), 1e-12);
  const double want_fid = fid(feature_stats(read_matrix_file(feats / "target_1.ufm")),
                              feature_stats(read_matrix_file(feats / "predicted_1.ufm")));
  EXPECT_NEAR(std::stod(kv_value(r.out, "fid@+0.2s")), want_fid, 1e-9);
  EXPECT_EQ(kv_value(r.out, "fid@+0.4s"), "skipped");
}

TEST(Cli, GenerateIsDeterministic) {
  const auto a = uftest::scratch_dir("cli_det_a"), b = uftest::scratch_dir("cli_det_b");
  for (const auto& d : {a, b}) {
    const auto r = run({"generate", "--bundle", kShipped.string(), "--out", d.string(), "--mode", "appearance",
                        "--trajectory", "stationary", "--trajectory", "quarter_turn"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
  }
  int compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a);
    EXPECT_EQ(file_bytes(entry.path()), file_bytes(b / rel)) << rel;
    ++compared;
  }
  EXPECT_EQ(compared, 1 + 2 * 6);
}

TEST(Cli, ConfigFileSuppliesOptions) {
  const auto dir = uftest::scratch_dir("cli_config");
  std::ofstream(dir / "uf.ini") << "[pose]\nbundle=" << kShipped.string() << "\nvehicle=1\nframe=2\n";
  const auto r = run({"--format", "kv", "--config", (dir / "uf.ini").string(), "pose"});
  ASSERT_EQ(r.code, kExitOk) << r.err << r.out;
  EXPECT_EQ(kv_value(r.out, "frame"), "2");
}
