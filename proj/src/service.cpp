#include "urbanfuture/service.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "urbanfuture/error.hpp"

namespace urbanfuture {

namespace fs = std::filesystem;

Session::Session(std::string id, SceneBundle bundle, fs::path dir)
    : id_(std::move(id)), bundle_(std::move(bundle)), dir_(std::move(dir)), extrinsics_(scene_extrinsics(bundle_)) {}

SessionDescriptor Session::descriptor() const {
  SessionDescriptor d;
  d.session_id = id_;
  d.clip_id = bundle_.clip_id;
  d.frame_count = bundle_.frame_count;
  d.width = bundle_.width;
  d.height = bundle_.height;
  d.approximate_intrinsics = bundle_.approximate_intrinsics;
  for (const auto& t : bundle_.tracks) {
    VehicleSummary v;
    v.vehicle_id = t.vehicle_id;
    if (const auto a = bundle_.cad_assignments.find(t.vehicle_id); a != bundle_.cad_assignments.end()) {
      v.cad_id = a->second;
    }
    if (const auto* e = t.at_frame(0)) v.box = e->box;
    d.vehicles.push_back(v);
  }
  for (const auto& [cid, cad] : bundle_.cads) d.cad_ids.push_back(cid);
  for (const auto& t : bundle_.trajectories) d.trajectories.push_back(t.name);
  return d;
}

const BackgroundModel& Session::background() {
  std::lock_guard lock(mutex_);
  if (!background_) background_ = scene_background(bundle_, bundle_.load_frames());
  return *background_;
}

ImageU8 Session::frame(int n) const { return bundle_.load_frame(n); }

const VehicleSolve& Session::cached_solve(int frame, int vehicle_id) {
  const auto key = std::make_pair(frame, vehicle_id);
  if (const auto it = solves_.find(key); it != solves_.end()) {
    ++solve_hits_;
    return it->second;
  }
  ++solve_count_;
  return solves_.emplace(key, solve_vehicle(bundle_, extrinsics_, frame, vehicle_id)).first->second;
}

FutureResult Session::generate(const FutureRequest& req) {
  const BackgroundModel& bg = background();
  std::lock_guard lock(mutex_);
  if (!bundle_.track(req.vehicle_id)) {
    throw Error(ErrorKind::NotFound, "vehicle " + std::to_string(req.vehicle_id) + " is not tracked");
  }
  GenerateOptions opts;
  opts.reference_frame = req.reference_frame;
  opts.horizon = req.horizon;
  opts.timestep = req.timestep;
  opts.mode = req.mode;
  opts.align_first_heading = req.align_first_heading;
  const PolylineOverride polyline{req.vehicle_id, req.polyline};
  const std::string digest = options_digest(bundle_, {req.vehicle_id}, polyline, opts, {});
  const std::string hash = fnv1a_hex(digest);
  const std::string clip_id = "c" + hash.substr(0, 12);

  if (const auto it = clips_.find(clip_id); it != clips_.end()) return {it->second, true};
  const fs::path clip_dir = dir_ / "clips" / clip_id;
  if (fs::exists(clip_dir / kOutputManifest)) {
    OutputManifest m = read_manifest(clip_dir);
    if (m.options_hash == hash) {
      clips_.emplace(clip_id, m);
      return {m, true};
    }
  }

  if (req.polyline.size() < 2) throw Error(ErrorKind::InvalidArgument, "polyline needs at least two points");
  step_count(req.horizon, req.timestep);
  if (req.reference_frame < 0 || req.reference_frame >= bundle_.frame_count) {
    throw Error(ErrorKind::CrossReference, "reference frame " + std::to_string(req.reference_frame) + " outside clip");
  }
  const VehicleSolve& solve = cached_solve(req.reference_frame, req.vehicle_id);
  const ImageU8 reference = bundle_.load_frame(req.reference_frame);
  GeneratedClip clip = generate_clip(bundle_, extrinsics_, bg, reference, {solve}, polyline, opts);
  if (clip.plans.empty()) {
    throw Error(ErrorKind::InvalidArgument, clip.warnings.empty() ? "vehicle could not be planned" : clip.warnings.front());
  }
  OutputManifest m = write_outputs(clip_dir, clip.frames, clip_manifest(bundle_, clip_id, clip, opts, hash));
  clips_.emplace(clip_id, m);
  return {m, false};
}

std::string Session::clip_frame_png(const std::string& clip_id, int k) const {
  std::lock_guard lock(mutex_);
  const auto it = clips_.find(clip_id);
  if (it == clips_.end()) throw Error(ErrorKind::NotFound, "no clip " + clip_id);
  if (k < 1 || k > int(it->second.frames.size())) {
    throw Error(ErrorKind::NotFound, "clip " + clip_id + " has no frame " + std::to_string(k));
  }
  const fs::path p = dir_ / "clips" / clip_id / it->second.frames[std::size_t(k - 1)].path;
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::NotFound, "missing clip frame " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int Session::solve_count() const {
  std::lock_guard lock(mutex_);
  return solve_count_;
}

int Session::solve_cache_hits() const {
  std::lock_guard lock(mutex_);
  return solve_hits_;
}

SessionManager::SessionManager(fs::path sessions_dir) : dir_(std::move(sessions_dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir_.string() + ": " + ec.message());
  for (const auto& entry : fs::directory_iterator(dir_)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > 1 && name[0] == 's') {
      try {
        next_ = std::max(next_, std::stoi(name.substr(1)) + 1);
      } catch (const std::exception&) {
      }
    }
  }
}

SessionDescriptor SessionManager::open(const fs::path& bundle_path) {
  if (!fs::is_directory(bundle_path) || !fs::exists(bundle_path / kBundleManifest)) {
    throw Error(ErrorKind::NotFound, "no bundle at " + bundle_path.string());
  }
  SceneBundle bundle = load_bundle(bundle_path);
  std::lock_guard lock(mutex_);
  char id[16];
  std::snprintf(id, sizeof id, "s%04d", next_++);
  const fs::path dir = dir_ / id;
  fs::create_directories(dir);
  std::ofstream(dir / "session.txt") << "bundle=" << fs::absolute(bundle_path).string() << '\n';
  auto session = std::make_shared<Session>(id, std::move(bundle), dir);
  sessions_.emplace(id, session);
  return session->descriptor();
}

std::shared_ptr<Session> SessionManager::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorKind::NotFound, "no session " + id);
  return it->second;
}

}  // namespace urbanfuture
