#include "urbanfuture/cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "urbanfuture/error.hpp"
#include "urbanfuture/httpd.hpp"
#include "urbanfuture/metrics.hpp"
#include "urbanfuture/pipeline.hpp"

namespace urbanfuture {

namespace fs = std::filesystem;

namespace {

enum class Level { Quiet, Error, Warn, Info, Debug };

class Log {
 public:
  explicit Log(std::ostream& err) : err_(err) {
    const char* env = std::getenv("URBANFUTURE_LOG");
    const std::string v = env ? env : "";
    if (v == "quiet") level_ = Level::Quiet;
    else if (v == "error") level_ = Level::Error;
    else if (v == "info") level_ = Level::Info;
    else if (v == "debug") level_ = Level::Debug;
  }
  void error(const std::string& m) const { emit(Level::Error, "error", m); }
  void warn(const std::string& m) const { emit(Level::Warn, "warning", m); }
  void info(const std::string& m) const { emit(Level::Info, "info", m); }

 private:
  void emit(Level l, const char* tag, const std::string& m) const {
    if (int(l) <= int(level_)) err_ << tag << ": " << m << '\n';
  }
  std::ostream& err_;
  Level level_{Level::Warn};
};

struct Output {
  std::ostream& out;
  bool kv;
  void row(const std::string& key, const std::string& value) const {
    if (kv) out << key << '=' << value << '\n';
    else out << std::left << std::setw(24) << key << value << '\n';
  }
};

std::string num(double v, int precision = 17) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

std::string_view stop_name(StopReason r) {
  switch (r) {
    case StopReason::Gradient: return "gradient";
    case StopReason::ResidualChange: return "residual-change";
    case StopReason::Damping: return "damping";
    case StopReason::MaxIterations: return "max-iterations";
  }
  return "unknown";
}

void draw_marker(ImageU8& img, const Vector2& p, const std::array<std::uint8_t, 3>& color, int radius, bool cross) {
  const int cx = int(std::lround(p.x())), cy = int(std::lround(p.y()));
  for (int d = -radius; d <= radius; ++d) {
    const std::array<std::pair<int, int>, 4> pts = cross
        ? std::array<std::pair<int, int>, 4>{{{cx + d, cy + d}, {cx + d, cy - d}, {cx + d, cy + d}, {cx + d, cy - d}}}
        : std::array<std::pair<int, int>, 4>{{{cx + d, cy - radius}, {cx + d, cy + radius}, {cx - radius, cy + d}, {cx + radius, cy + d}}};
    for (const auto& [x, y] : pts) {
      if (x < 0 || y < 0 || x >= img.width || y >= img.height) continue;
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = color[std::size_t(c)];
    }
  }
}

std::vector<int> parse_vehicle_list(const std::string& list, const SceneBundle& bundle, int frame) {
  if (list == "all") return eligible_vehicles(bundle, frame);
  if (list == "none") return {};
  std::vector<int> ids;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int id = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      ids.push_back(id);
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidArgument, "bad vehicle id '" + item + "' (expected all, none or a comma list)");
    }
  }
  for (int id : ids) {
    if (!bundle.track(id)) throw Error(ErrorKind::NotFound, "vehicle " + std::to_string(id) + " is not tracked");
  }
  return ids;
}

struct PoseArgs {
  std::string bundle;
  int frame{0};
  int vehicle{0};
  bool yaw_only{false};
  std::string overlay;
};

int cmd_pose(const PoseArgs& a, const Output& o, const Log& log) {
  const SceneBundle bundle = load_bundle(a.bundle);
  if (bundle.approximate_intrinsics) log.warn("bundle has no intrinsics; using approximate intrinsics");
  const Pose e = scene_extrinsics(bundle);
  SolverOptions opts;
  opts.yaw_only = a.yaw_only;
  const VehicleSolve s = solve_vehicle(bundle, e, a.frame, a.vehicle, opts);
  const SolveReport& r = s.report;
  const Attitude att = r.attitude;
  const AxisAngle aa = rotation_to_axis_angle(r.pose.rotation);
  o.row("vehicle", std::to_string(a.vehicle));
  o.row("frame", std::to_string(a.frame));
  o.row("mode", a.yaw_only ? "yaw-only" : "full");
  o.row("hypothesis", std::to_string(r.hypothesis));
  o.row("iterations", std::to_string(r.iterations));
  o.row("converged", r.converged ? "yes" : "no");
  o.row("stop_reason", std::string(stop_name(r.stop_reason)));
  o.row("residual_px", num(r.final_residual));
  o.row("roll_deg", num(rad2deg(att.roll)));
  o.row("pitch_deg", num(rad2deg(att.pitch)));
  o.row("yaw_deg", num(rad2deg(att.yaw)));
  o.row("axis_angle", num(aa.v.x()) + " " + num(aa.v.y()) + " " + num(aa.v.z()));
  o.row("translation", num(r.pose.translation.x()) + " " + num(r.pose.translation.y()) + " " +
                           num(r.pose.translation.z()));
  o.row("approximate_intrinsics", bundle.approximate_intrinsics ? "yes" : "no");

  if (!a.overlay.empty()) {
    ImageU8 img = bundle.load_frame(a.frame);
    const CadModel& cad = *bundle.cad_for(a.vehicle);
    for (const auto& k : bundle.keypoints_for(a.frame, a.vehicle)->keypoints) {
      draw_marker(img, k.position, {40, 220, 60}, 4, false);
      const Vector3 pc = r.pose * cad.keypoint(k.name);
      if (pc.z() > kMinDepth) draw_marker(img, project_camera_point(bundle.intrinsics, pc), {235, 40, 40}, 3, true);
    }
    write_png(a.overlay, img);
    o.row("overlay", a.overlay);
  }
  return kExitOk;
}

struct BackgroundArgs {
  std::string bundle;
  std::string out;
  std::string valid_mask;
  double dilation{0.1};
};

int cmd_background(const BackgroundArgs& a, const Output& o) {
  const SceneBundle bundle = load_bundle(a.bundle);
  const BackgroundModel bg = scene_background(bundle, bundle.load_frames(), a.dilation);
  write_png(a.out, bg.image);
  if (!a.valid_mask.empty()) write_png(a.valid_mask, bg.valid_mask);
  long long invalid = 0;
  for (auto v : bg.valid_mask.data) invalid += v == 0;
  o.row("background", a.out);
  o.row("invalid_pixels", std::to_string(invalid));
  return kExitOk;
}

struct GenerateArgs {
  std::string bundle;
  std::string out;
  std::string vehicles{"all"};
  std::optional<double> horizon;
  std::optional<double> timestep;
  std::string mode{"normals"};
  std::string trajectories;
  std::vector<std::string> trajectory_names;
  std::optional<int> trajectory_vehicle;
  int reference_frame{0};
  bool align_first_heading{false};
  bool smooth_heading{false};
  bool per_pixel_depth{false};
  bool yaw_only{false};
};

int cmd_generate(const GenerateArgs& a, const Output& o, const Log& log) {
  const SceneBundle bundle = load_bundle(a.bundle);
  if (bundle.approximate_intrinsics) log.warn("bundle has no intrinsics; using approximate intrinsics");
  if (a.reference_frame < 0 || a.reference_frame >= bundle.frame_count) {
    throw Error(ErrorKind::CrossReference, "reference frame " + std::to_string(a.reference_frame) + " outside clip");
  }
  GenerateOptions opts;
  opts.reference_frame = a.reference_frame;
  opts.horizon = a.horizon.value_or(bundle.config.horizon);
  opts.timestep = a.timestep.value_or(bundle.config.timestep);
  opts.mode = parse_render_mode(a.mode);
  opts.align_first_heading = a.align_first_heading;
  opts.smooth_heading = a.smooth_heading;
  opts.per_pixel_depth_test = a.per_pixel_depth;
  step_count(opts.horizon, opts.timestep);
  SolverOptions solver;
  solver.yaw_only = a.yaw_only;

  std::vector<NamedPolyline> polylines;
  if (!a.trajectories.empty()) {
    std::ifstream in(a.trajectories);
    if (!in) throw Error(ErrorKind::MissingFile, "missing trajectory file " + a.trajectories);
    polylines = parse_trajectories(in, a.trajectories);
  }
  for (const auto& name : a.trajectory_names) {
    const NamedPolyline* p = bundle.trajectory(name);
    if (!p) throw Error(ErrorKind::NotFound, "bundle has no trajectory '" + name + "'");
    polylines.push_back(*p);
  }

  const std::vector<int> vehicles = parse_vehicle_list(a.vehicles, bundle, a.reference_frame);
  const int polyline_vehicle = a.trajectory_vehicle.value_or(vehicles.empty() ? -1 : vehicles.front());
  if (!polylines.empty() && std::find(vehicles.begin(), vehicles.end(), polyline_vehicle) == vehicles.end()) {
    throw Error(ErrorKind::InvalidArgument, "trajectories need a selected vehicle to follow them");
  }

  const Pose e = scene_extrinsics(bundle);
  log.info("building background from " + std::to_string(bundle.frame_count) + " frames");
  const BackgroundModel bg = scene_background(bundle, bundle.load_frames());
  const ImageU8 reference = bundle.load_frame(a.reference_frame);
  log.info("solving " + std::to_string(vehicles.size()) + " vehicle pose(s)");
  const SolveOutcome solved = solve_vehicles(bundle, e, a.reference_frame, vehicles, solver);
  for (const auto& w : solved.warnings) log.warn(w);
  for (const auto& s : solved.solved) {
    log.info("vehicle " + std::to_string(s.vehicle_id) + " residual " + num(s.report.final_residual, 6) + " px");
  }

  const fs::path out_dir(a.out);
  fs::create_directories(out_dir);
  write_png(out_dir / "background.png", bg.image);

  struct Job {
    std::string name;
    std::optional<PolylineOverride> polyline;
  };
  std::vector<Job> jobs;
  if (polylines.empty()) jobs.push_back({"", std::nullopt});
  for (const auto& p : polylines) jobs.push_back({p.name, PolylineOverride{polyline_vehicle, p.points}});

  for (const auto& job : jobs) {
    GeneratedClip clip = generate_clip(bundle, e, bg, reference, solved.solved, job.polyline, opts);
    clip.warnings.insert(clip.warnings.begin(), solved.warnings.begin(), solved.warnings.end());
    for (std::size_t i = solved.warnings.size(); i < clip.warnings.size(); ++i) log.warn(clip.warnings[i]);
    const std::string clip_id = bundle.clip_id + "-" + (job.name.empty() ? "track" : job.name);
    const std::string hash = fnv1a_hex(options_digest(bundle, vehicles, job.polyline, opts, solver));
    const fs::path dir = job.name.empty() ? out_dir : out_dir / job.name;
    const OutputManifest m = write_outputs(dir, clip.frames, clip_manifest(bundle, clip_id, clip, opts, hash));
    o.row("clip", clip_id);
    o.row("clip_dir", dir.string());
    o.row("frames", std::to_string(m.frames.size()));
    o.row("vehicles", std::to_string(m.plans.size()));
  }
  return kExitOk;
}

struct EvalArgs {
  std::string predicted;
  std::string bundle;
  std::string features_dir;
  int splits{1};
};

int cmd_eval(const EvalArgs& a, std::ostream& out, bool kv, const Log& log) {
  const SceneBundle bundle = load_bundle(a.bundle);
  const OutputManifest m = read_manifest(a.predicted);
  std::vector<HorizonInput> horizons;
  for (const auto& f : m.frames) {
    HorizonInput h;
    h.offset = f.t;
    const int gt = m.reference_frame + int(std::lround(f.t * bundle.config.fps));
    if (gt < bundle.frame_count) {
      h.ground_truth = bundle.load_frame(gt);
      for (const auto& t : bundle.tracks) {
        if (const auto* e = t.at_frame(gt)) h.boxes.emplace_back(t.vehicle_id, e->box);
      }
    }
    const fs::path pred = fs::path(a.predicted) / f.path;
    if (fs::exists(pred)) h.predicted = to_rgb(read_png(pred));
    if (!h.ground_truth) {
      throw Error(ErrorKind::MissingHorizon, "no ground-truth frame " + std::to_string(gt) + " for horizon " +
                                                 horizon_label(f.t));
    }
    if (!a.features_dir.empty()) {
      auto load = [&](const char* stem) -> std::optional<Eigen::MatrixXd> {
        const fs::path p = fs::path(a.features_dir) / (std::string(stem) + "_" + std::to_string(f.index) + ".ufm");
        if (!fs::exists(p)) return std::nullopt;
        return read_matrix_file(p);
      };
      h.features = {load("target"), load("predicted"), load("probs")};
    }
    horizons.push_back(std::move(h));
  }
  const ClipReport report = evaluate_clip(horizons, {}, a.splits);
  for (const auto& h : report.horizons) {
    for (const auto& n : h.notes) log.info(horizon_label(h.offset) + ": " + n);
  }
  if (bundle.approximate_intrinsics || m.approximate_intrinsics) log.warn("scene uses approximate intrinsics");
  out << (kv ? format_key_values(report) : format_table(report));
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  const Log log(err);
  CLI::App app{"Future urban scene generation from a single traffic-camera frame", "urbanfuture"};
  app.set_version_flag("--version", std::string(tool_version()));
  app.set_config("--config", "", "key = value file overriding defaults ([subcommand] sections)");
  app.require_subcommand(1);
  std::string format = "table";
  app.add_option("--format", format, "Output format")->check(CLI::IsMember({"table", "kv"}))->capture_default_str();

  PoseArgs pose;
  auto* p = app.add_subcommand("pose", "Solve one vehicle's pose and write a reprojection overlay");
  p->add_option("--bundle", pose.bundle, "Scene bundle directory")->required();
  p->add_option("--frame", pose.frame, "Frame index")->capture_default_str();
  p->add_option("--vehicle", pose.vehicle, "Vehicle id")->required();
  p->add_flag("--yaw-only", pose.yaw_only, "Constrain the vehicle to the ground plane (yaw and translation)");
  p->add_option("--overlay", pose.overlay, "Write observed (green) vs reprojected (red) keypoints here");

  BackgroundArgs bg;
  auto* b = app.add_subcommand("background", "Median clean plate with tracked vehicles masked out");
  b->add_option("--bundle", bg.bundle, "Scene bundle directory")->required();
  b->add_option("--out", bg.out, "Output PNG")->required();
  b->add_option("--valid-mask", bg.valid_mask, "Optional PNG of pixels with unmasked samples");
  b->add_option("--dilation", bg.dilation, "Box dilation per side, fraction of box size")->capture_default_str();

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Render and composite future frames");
  g->add_option("--bundle", gen.bundle, "Scene bundle directory")->required();
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--vehicles", gen.vehicles, "all, none, or comma-separated vehicle ids")->capture_default_str();
  g->add_option("--horizon", gen.horizon, "Seconds (bundle default)");
  g->add_option("--timestep", gen.timestep, "Seconds (bundle default)");
  g->add_option("--mode", gen.mode, "Render mode")->check(CLI::IsMember({"normals", "appearance"}))->capture_default_str();
  g->add_option("--trajectories", gen.trajectories, "File of named pixel polylines, one clip each");
  g->add_option("--trajectory", gen.trajectory_names, "Named polyline shipped with the bundle (repeatable)");
  g->add_option("--trajectory-vehicle", gen.trajectory_vehicle, "Vehicle that follows the polylines (first selected)");
  g->add_option("--reference-frame", gen.reference_frame, "Input frame")->capture_default_str();
  g->add_flag("--align-first-heading", gen.align_first_heading, "Turn the vehicle onto the first path segment");
  g->add_flag("--smooth-heading", gen.smooth_heading, "3-sample moving average of headings");
  g->add_flag("--per-pixel-depth", gen.per_pixel_depth, "Resolve overlaps between vehicles per pixel");
  g->add_flag("--yaw-only", gen.yaw_only, "Yaw-only pose solve");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score generated frames against the ground-truth bundle");
  e->add_option("--predicted", ev.predicted, "Directory written by generate")->required();
  e->add_option("--bundle", ev.bundle, "Ground-truth scene bundle")->required();
  e->add_option("--features-dir", ev.features_dir, "target_K.ufm, predicted_K.ufm and probs_K.ufm per horizon K");
  e->add_option("--splits", ev.splits, "Inception score splits")->capture_default_str();

  std::string host = "127.0.0.1";
  int port = 8080;
  std::string sessions_dir = "sessions";
  auto* s = app.add_subcommand("serve", "HTTP session service");
  s->add_option("--host", host)->capture_default_str();
  s->add_option("--port", port)->capture_default_str();
  s->add_option("--sessions-dir", sessions_dir, "Where session state is kept")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const Output o{out, format == "kv"};
  try {
    if (*p) return cmd_pose(pose, o, log);
    if (*b) return cmd_background(bg, o);
    if (*g) return cmd_generate(gen, o, log);
    if (*e) return cmd_eval(ev, out, o.kv, log);
    if (*s) {
      log.info("listening on " + host + ":" + std::to_string(port));
      return serve(host, port, sessions_dir) == 0 ? kExitOk : kExitFailure;
    }
  } catch (const Error& ex) {
    log.error(std::string(to_string(ex.kind())) + ": " + ex.what());
    return kExitFailure;
  } catch (const std::exception& ex) {
    log.error(ex.what());
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace urbanfuture
