#include "urbanfuture/sceneio.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "urbanfuture/error.hpp"

#ifndef URBANFUTURE_VERSION
#define URBANFUTURE_VERSION "0.0.0"
#endif

namespace urbanfuture {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void parse_fail(const std::string& source, int line, const std::string& what) {
  throw Error(ErrorKind::ParseError, source + ":" + std::to_string(line) + ": " + what);
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Content of a line with any '#' comment removed and whitespace trimmed.
std::string_view content(std::string_view line) {
  const auto hash = line.find('#');
  return trim(hash == std::string_view::npos ? line : line.substr(0, hash));
}

std::vector<std::string_view> split(std::string_view s, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(delim, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t b = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

std::optional<double> to_double(std::string_view s) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<int> to_int(std::string_view s) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

double need_double(std::string_view s, const std::string& source, int line, const char* what) {
  const auto v = to_double(s);
  if (!v) parse_fail(source, line, std::string("bad ") + what + " '" + std::string(s) + "'");
  return *v;
}

int need_int(std::string_view s, const std::string& source, int line, const char* what) {
  const auto v = to_int(s);
  if (!v) parse_fail(source, line, std::string("bad ") + what + " '" + std::string(s) + "'");
  return *v;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ifstream open_input(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorKind::MissingFile, "missing file " + p.string());
  return in;
}

std::ofstream open_output(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + p.string());
  return out;
}

std::string pose_text(const Pose& p) {
  std::string s;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) s += num(p.rotation(r, c)) + " ";
  }
  s += num(p.translation.x()) + " " + num(p.translation.y()) + " " + num(p.translation.z());
  return s;
}

Pose parse_pose(const std::vector<std::string_view>& t, std::size_t offset, const std::string& source, int line) {
  if (t.size() != offset + 12) parse_fail(source, line, "pose needs 12 numbers");
  Pose p;
  for (int i = 0; i < 9; ++i) p.rotation(i / 3, i % 3) = need_double(t[offset + std::size_t(i)], source, line, "pose value");
  for (int i = 0; i < 3; ++i) p.translation[i] = need_double(t[offset + 9 + std::size_t(i)], source, line, "pose value");
  return p;
}

bool same_pose(const Pose& a, const Pose& b) {
  return a.rotation == b.rotation && a.translation == b.translation;
}

}  // namespace

std::string_view tool_version() { return URBANFUTURE_VERSION; }

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& source) {
  std::map<std::string, std::string> kv;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    const auto c = content(line);
    if (c.empty()) continue;
    const auto eq = c.find('=');
    if (eq == std::string_view::npos) parse_fail(source, n, "expected key = value");
    const std::string key(trim(c.substr(0, eq)));
    if (key.empty()) parse_fail(source, n, "empty key");
    if (!kv.emplace(key, std::string(trim(c.substr(eq + 1)))).second) {
      parse_fail(source, n, "duplicate key '" + key + "'");
    }
  }
  return kv;
}

std::vector<VehicleTrack> parse_tracks(std::istream& in, const std::string& source) {
  std::map<int, VehicleTrack> by_id;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    const auto c = content(line);
    if (c.empty()) continue;
    const auto f = split(c, ',');
    if (f[0] == "frame") continue;  // header row
    if (f.size() < 7) parse_fail(source, n, "expected frame,id,x,y,w,h,confidence");
    TrackEntry e;
    e.frame = need_int(f[0], source, n, "frame");
    const int id = need_int(f[1], source, n, "vehicle id");
    e.box = {need_double(f[2], source, n, "x"), need_double(f[3], source, n, "y"),
             need_double(f[4], source, n, "width"), need_double(f[5], source, n, "height")};
    e.confidence = need_double(f[6], source, n, "confidence");
    if (e.frame < 0) parse_fail(source, n, "negative frame");
    if (e.box.width <= 0 || e.box.height <= 0) parse_fail(source, n, "box size must be positive");
    auto& track = by_id[id];
    track.vehicle_id = id;
    if (track.at_frame(e.frame)) {
      parse_fail(source, n, "duplicate row for vehicle " + std::to_string(id) + " frame " + std::to_string(e.frame));
    }
    track.entries.push_back(e);
  }
  std::vector<VehicleTrack> out;
  for (auto& [id, t] : by_id) {
    std::sort(t.entries.begin(), t.entries.end(),
              [](const TrackEntry& a, const TrackEntry& b) { return a.frame < b.frame; });
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<KeypointObservation> parse_keypoints(std::istream& in, const std::string& source) {
  std::vector<KeypointObservation> out;
  std::set<std::pair<int, int>> seen;
  int header_line = 0;
  auto finish = [&](int line) {
    if (!out.empty() && out.back().keypoints.size() != kKeypointCount) {
      parse_fail(source, line, "block started at line " + std::to_string(header_line) + " has " +
                                   std::to_string(out.back().keypoints.size()) + " keypoints, expected 12");
    }
  };
  std::string line;
  int n = 1;
  for (; std::getline(in, line); ++n) {
    const auto c = content(line);
    if (c.empty()) continue;
    const auto t = tokens(c);
    if (t[0] == "frame") {
      finish(n);
      if (t.size() != 4 || t[2] != "vehicle") parse_fail(source, n, "expected 'frame F vehicle V'");
      KeypointObservation obs;
      obs.frame = need_int(t[1], source, n, "frame");
      obs.vehicle_id = need_int(t[3], source, n, "vehicle id");
      if (!seen.insert({obs.frame, obs.vehicle_id}).second) parse_fail(source, n, "duplicate keypoint block");
      header_line = n;
      out.push_back(std::move(obs));
      continue;
    }
    if (out.empty()) parse_fail(source, n, "keypoint row before any 'frame F vehicle V' header");
    if (t.size() != 5) parse_fail(source, n, "expected 'name u v confidence visible'");
    const auto name = parse_keypoint_name(t[0]);
    if (!name) parse_fail(source, n, "unknown keypoint '" + std::string(t[0]) + "'");
    auto& kps = out.back().keypoints;
    for (const auto& k : kps) {
      if (k.name == *name) parse_fail(source, n, "duplicate keypoint '" + std::string(t[0]) + "'");
    }
    Keypoint2D k;
    k.name = *name;
    k.position = {need_double(t[1], source, n, "u"), need_double(t[2], source, n, "v")};
    k.confidence = need_double(t[3], source, n, "confidence");
    const int vis = need_int(t[4], source, n, "visibility");
    if (vis != 0 && vis != 1) parse_fail(source, n, "visibility must be 0 or 1");
    k.visible = vis == 1;
    kps.push_back(k);
  }
  finish(n);
  return out;
}

GroundHomography parse_homography(std::istream& in, const std::string& source) {
  std::vector<double> values;
  std::string line;
  int n = 1;
  for (; std::getline(in, line); ++n) {
    for (auto t : tokens(content(line))) {
      if (values.size() == 9) parse_fail(source, n, "more than 9 homography entries");
      values.push_back(need_double(t, source, n, "homography entry"));
    }
  }
  if (values.size() != 9) parse_fail(source, n, "expected 9 homography entries, got " + std::to_string(values.size()));
  GroundHomography h;
  for (int i = 0; i < 9; ++i) h.h(i / 3, i % 3) = values[std::size_t(i)];
  if (!h.valid()) throw Error(ErrorKind::DegenerateHomography, source + ": homography is singular");
  return h;
}

CameraIntrinsics parse_intrinsics(std::istream& in, const std::string& source) {
  const auto kv = parse_key_values(in, source);
  auto get = [&](const char* key) -> std::string_view {
    const auto it = kv.find(key);
    if (it == kv.end()) parse_fail(source, 0, std::string("missing key '") + key + "'");
    return it->second;
  };
  CameraIntrinsics k;
  k.fx = need_double(get("fx"), source, 0, "fx");
  k.fy = need_double(get("fy"), source, 0, "fy");
  k.cx = need_double(get("cx"), source, 0, "cx");
  k.cy = need_double(get("cy"), source, 0, "cy");
  k.width = need_int(get("width"), source, 0, "width");
  k.height = need_int(get("height"), source, 0, "height");
  if (!k.valid()) throw Error(ErrorKind::InvalidArgument, source + ": intrinsics are not valid");
  return k;
}

std::map<int, int> parse_cad_assignments(std::istream& in, const std::string& source) {
  std::map<int, int> out;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    const auto t = tokens(content(line));
    if (t.empty()) continue;
    if (t.size() != 2) parse_fail(source, n, "expected 'vehicle_id cad_id'");
    const int vid = need_int(t[0], source, n, "vehicle id");
    const int cid = need_int(t[1], source, n, "cad id");
    if (cid < 1 || cid > 10) parse_fail(source, n, "cad id " + std::to_string(cid) + " outside 1..10");
    if (!out.emplace(vid, cid).second) parse_fail(source, n, "vehicle " + std::to_string(vid) + " assigned twice");
  }
  return out;
}

std::vector<NamedPolyline> parse_trajectories(std::istream& in, const std::string& source) {
  std::vector<NamedPolyline> out;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    const auto t = tokens(content(line));
    if (t.empty()) continue;
    if (t.size() < 5 || (t.size() - 1) % 2 != 0) {
      parse_fail(source, n, "expected 'name u1 v1 u2 v2 ...' with at least two points");
    }
    NamedPolyline p{std::string(t[0]), {}};
    for (const auto& q : out) {
      if (q.name == p.name) parse_fail(source, n, "duplicate trajectory '" + p.name + "'");
    }
    for (std::size_t i = 1; i < t.size(); i += 2) {
      p.points.emplace_back(need_double(t[i], source, n, "u"), need_double(t[i + 1], source, n, "v"));
    }
    out.push_back(std::move(p));
  }
  return out;
}

fs::path SceneBundle::frame_path(int frame) const {
  char name[32];
  std::snprintf(name, sizeof name, "%06d.png", frame);
  return root / layout.frames_dir / name;
}

ImageU8 SceneBundle::load_frame(int frame) const {
  if (frame < 0 || frame >= frame_count) {
    throw Error(ErrorKind::CrossReference, "frame " + std::to_string(frame) + " outside clip of " +
                                               std::to_string(frame_count) + " frames");
  }
  const auto p = frame_path(frame);
  if (!fs::exists(p)) throw Error(ErrorKind::MissingFile, "missing frame " + p.string());
  return to_rgb(read_png(p));
}

std::vector<ImageU8> SceneBundle::load_frames() const {
  std::vector<ImageU8> frames;
  frames.reserve(std::size_t(frame_count));
  for (int i = 0; i < frame_count; ++i) frames.push_back(load_frame(i));
  return frames;
}

const VehicleTrack* SceneBundle::track(int vehicle_id) const {
  for (const auto& t : tracks) {
    if (t.vehicle_id == vehicle_id) return &t;
  }
  return nullptr;
}

const KeypointObservation* SceneBundle::keypoints_for(int frame, int vehicle_id) const {
  for (const auto& k : keypoints) {
    if (k.frame == frame && k.vehicle_id == vehicle_id) return &k;
  }
  return nullptr;
}

const CadModel* SceneBundle::cad_for(int vehicle_id) const {
  const auto a = cad_assignments.find(vehicle_id);
  if (a == cad_assignments.end()) return nullptr;
  const auto c = cads.find(a->second);
  return c == cads.end() ? nullptr : &c->second;
}

const NamedPolyline* SceneBundle::trajectory(std::string_view name) const {
  for (const auto& t : trajectories) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

SceneBundle load_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::MissingFile, "bundle directory not found: " + dir.string());
  const fs::path manifest = dir / kBundleManifest;
  auto min = open_input(manifest);
  const auto kv = parse_key_values(min, manifest.string());
  auto opt = [&](const char* key) -> std::optional<std::string> {
    const auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  };
  auto req = [&](const char* key) {
    auto v = opt(key);
    if (!v) throw Error(ErrorKind::ParseError, manifest.string() + ": missing key '" + key + "'");
    return *v;
  };
  auto real = [&](const char* key, double fallback) {
    const auto v = opt(key);
    if (!v) return fallback;
    const auto d = to_double(*v);
    if (!d) throw Error(ErrorKind::ParseError, manifest.string() + ": bad value for '" + key + "'");
    return *d;
  };

  SceneBundle b;
  b.root = dir;
  b.clip_id = req("clip_id");
  const auto fc = to_int(req("frame_count"));
  if (!fc || *fc < 1) throw Error(ErrorKind::ParseError, manifest.string() + ": bad frame_count");
  b.frame_count = *fc;
  b.layout.frames_dir = opt("frames_dir").value_or(b.layout.frames_dir);
  b.layout.tracks = req("tracks");
  b.layout.keypoints = req("keypoints");
  b.layout.homography = req("homography");
  b.layout.cad_assignments = req("cad_assignments");
  b.layout.cad_dir = opt("cad_dir").value_or(b.layout.cad_dir);
  b.layout.intrinsics = opt("intrinsics").value_or("");
  b.layout.trajectories = opt("trajectories").value_or("");
  b.config.fps = real("fps", b.config.fps);
  b.config.timestep = real("timestep", b.config.timestep);
  b.config.horizon = real("horizon", b.config.horizon);
  if (!(b.config.fps > 0)) throw Error(ErrorKind::InvalidArgument, manifest.string() + ": fps must be positive");
  step_count(b.config.horizon, b.config.timestep);

  for (int i = 0; i < b.frame_count; ++i) {
    if (!fs::exists(b.frame_path(i))) throw Error(ErrorKind::MissingFile, "missing frame " + b.frame_path(i).string());
  }
  const ImageU8 first = read_png(b.frame_path(0));
  b.width = first.width;
  b.height = first.height;

  auto load_part = [&](const std::string& rel, auto&& parser) {
    const fs::path p = dir / rel;
    auto in = open_input(p);
    return parser(in, p.string());
  };
  b.tracks = load_part(b.layout.tracks, parse_tracks);
  b.keypoints = load_part(b.layout.keypoints, parse_keypoints);
  b.homography = load_part(b.layout.homography, parse_homography);
  b.cad_assignments = load_part(b.layout.cad_assignments, parse_cad_assignments);
  if (!b.layout.intrinsics.empty()) {
    b.intrinsics = load_part(b.layout.intrinsics, parse_intrinsics);
  } else {
    b.intrinsics = CameraIntrinsics::approximate(b.width, b.height);
    b.approximate_intrinsics = true;
  }
  if (!b.layout.trajectories.empty()) b.trajectories = load_part(b.layout.trajectories, parse_trajectories);

  for (const auto& t : b.tracks) {
    for (const auto& e : t.entries) {
      if (e.frame >= b.frame_count) {
        throw Error(ErrorKind::CrossReference, "track row for vehicle " + std::to_string(t.vehicle_id) +
                                                   " references frame " + std::to_string(e.frame) + " of a " +
                                                   std::to_string(b.frame_count) + "-frame clip");
      }
    }
  }
  for (const auto& k : b.keypoints) {
    const auto* t = b.track(k.vehicle_id);
    if (!t || !t->at_frame(k.frame)) {
      throw Error(ErrorKind::CrossReference, "keypoints for vehicle " + std::to_string(k.vehicle_id) +
                                                 " at frame " + std::to_string(k.frame) + " have no track entry");
    }
  }
  for (const auto& [vid, cid] : b.cad_assignments) {
    if (!b.track(vid)) {
      throw Error(ErrorKind::CrossReference, "cad assignment names unknown vehicle " + std::to_string(vid));
    }
    if (b.cads.count(cid)) continue;
    const fs::path mesh = dir / b.layout.cad_dir / (std::to_string(cid) + ".obj");
    const fs::path kps = dir / b.layout.cad_dir / (std::to_string(cid) + ".keypoints");
    for (const auto& p : {mesh, kps}) {
      if (!fs::exists(p)) throw Error(ErrorKind::MissingFile, "missing cad file " + p.string());
    }
    b.cads.emplace(cid, load_cad(cid, mesh, kps));
  }
  return b;
}

void write_bundle(const SceneBundle& b, const fs::path& dir, const std::vector<ImageU8>& frames) {
  if (int(frames.size()) != b.frame_count) {
    throw Error(ErrorKind::DimensionMismatch, "bundle declares " + std::to_string(b.frame_count) +
                                                  " frames but " + std::to_string(frames.size()) + " were given");
  }
  std::error_code ec;
  fs::create_directories(dir / b.layout.frames_dir, ec);
  fs::create_directories(dir / b.layout.cad_dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());

  SceneBundle placed = b;
  placed.root = dir;
  for (int i = 0; i < b.frame_count; ++i) write_png(placed.frame_path(i), frames[std::size_t(i)]);

  {
    auto out = open_output(dir / b.layout.tracks);
    out << "# frame,id,x,y,w,h,confidence\n";
    for (const auto& t : b.tracks) {
      for (const auto& e : t.entries) {
        out << e.frame << ',' << t.vehicle_id << ',' << num(e.box.x) << ',' << num(e.box.y) << ','
            << num(e.box.width) << ',' << num(e.box.height) << ',' << num(e.confidence) << '\n';
      }
    }
  }
  {
    auto out = open_output(dir / b.layout.keypoints);
    out << "# name u v confidence visible\n";
    for (const auto& k : b.keypoints) {
      out << "frame " << k.frame << " vehicle " << k.vehicle_id << '\n';
      for (const auto& p : k.keypoints) {
        out << to_string(p.name) << ' ' << num(p.position.x()) << ' ' << num(p.position.y()) << ' '
            << num(p.confidence) << ' ' << (p.visible ? 1 : 0) << '\n';
      }
    }
  }
  {
    auto out = open_output(dir / b.layout.homography);
    out << "# ground homography, row-major, maps pixel (u, v, 1) to world ground (x, y, 1)\n";
    for (int r = 0; r < 3; ++r) {
      out << num(b.homography.h(r, 0)) << ' ' << num(b.homography.h(r, 1)) << ' ' << num(b.homography.h(r, 2)) << '\n';
    }
  }
  if (!b.approximate_intrinsics) {
    auto out = open_output(dir / b.layout.intrinsics);
    out << "fx = " << num(b.intrinsics.fx) << "\nfy = " << num(b.intrinsics.fy) << "\ncx = " << num(b.intrinsics.cx)
        << "\ncy = " << num(b.intrinsics.cy) << "\nwidth = " << b.intrinsics.width
        << "\nheight = " << b.intrinsics.height << '\n';
  }
  {
    auto out = open_output(dir / b.layout.cad_assignments);
    out << "# vehicle_id cad_id\n";
    for (const auto& [vid, cid] : b.cad_assignments) out << vid << ' ' << cid << '\n';
  }
  for (const auto& [cid, cad] : b.cads) {
    write_cad(cad, dir / b.layout.cad_dir / (std::to_string(cid) + ".obj"),
              dir / b.layout.cad_dir / (std::to_string(cid) + ".keypoints"));
  }
  if (!b.trajectories.empty()) {
    auto out = open_output(dir / b.layout.trajectories);
    out << "# name u1 v1 u2 v2 ... (frame pixels)\n";
    for (const auto& t : b.trajectories) {
      out << t.name;
      for (const auto& p : t.points) out << ' ' << num(p.x()) << ' ' << num(p.y());
      out << '\n';
    }
  }

  auto out = open_output(dir / kBundleManifest);
  out << "clip_id = " << b.clip_id << '\n'
      << "frames_dir = " << b.layout.frames_dir << '\n'
      << "frame_count = " << b.frame_count << '\n'
      << "tracks = " << b.layout.tracks << '\n'
      << "keypoints = " << b.layout.keypoints << '\n'
      << "homography = " << b.layout.homography << '\n';
  if (!b.approximate_intrinsics) out << "intrinsics = " << b.layout.intrinsics << '\n';
  out << "cad_assignments = " << b.layout.cad_assignments << '\n'
      << "cad_dir = " << b.layout.cad_dir << '\n';
  if (!b.trajectories.empty()) out << "trajectories = " << b.layout.trajectories << '\n';
  out << "fps = " << num(b.config.fps) << '\n'
      << "timestep = " << num(b.config.timestep) << '\n'
      << "horizon = " << num(b.config.horizon) << '\n';
}

bool operator==(const PlanSummary& a, const PlanSummary& b) {
  if (a.vehicle_id != b.vehicle_id || !same_pose(a.source_pose, b.source_pose) ||
      a.targets.size() != b.targets.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.targets.size(); ++i) {
    if (a.targets[i].t != b.targets[i].t || !same_pose(a.targets[i].pose, b.targets[i].pose)) return false;
  }
  return true;
}

bool operator==(const OutputManifest& a, const OutputManifest& b) {
  return a.clip_id == b.clip_id && a.reference_frame == b.reference_frame && a.timestep == b.timestep &&
         a.horizon == b.horizon && a.mode == b.mode && a.frames == b.frames && a.plans == b.plans &&
         a.warnings == b.warnings && a.tool_version == b.tool_version && a.options_hash == b.options_hash &&
         a.approximate_intrinsics == b.approximate_intrinsics;
}

OutputManifest write_outputs(const fs::path& dir, const std::vector<ImageU8>& frames, OutputManifest m) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  m.frames.clear();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%03d.png", int(i + 1));
    write_png(dir / name, frames[i]);
    m.frames.push_back({int(i + 1), double(i + 1) * m.timestep, name});
  }
  if (m.tool_version.empty()) m.tool_version = std::string(tool_version());

  std::ostringstream os;
  os << "clip_id=" << m.clip_id << '\n'
     << "reference_frame=" << m.reference_frame << '\n'
     << "timestep=" << num(m.timestep) << '\n'
     << "horizon=" << num(m.horizon) << '\n'
     << "mode=" << m.mode << '\n'
     << "approximate_intrinsics=" << (m.approximate_intrinsics ? 1 : 0) << '\n'
     << "tool_version=" << m.tool_version << '\n'
     << "options_hash=" << m.options_hash << '\n'
     << "frame_count=" << m.frames.size() << '\n';
  for (const auto& f : m.frames) {
    os << "frame." << f.index << ".t=" << num(f.t) << '\n' << "frame." << f.index << ".path=" << f.path << '\n';
  }
  os << "vehicle_count=" << m.plans.size() << '\n';
  for (std::size_t i = 0; i < m.plans.size(); ++i) {
    const auto& p = m.plans[i];
    os << "vehicle." << i << ".id=" << p.vehicle_id << '\n'
       << "vehicle." << i << ".source=" << pose_text(p.source_pose) << '\n'
       << "vehicle." << i << ".target_count=" << p.targets.size() << '\n';
    for (std::size_t k = 0; k < p.targets.size(); ++k) {
      os << "vehicle." << i << ".target." << k << '=' << num(p.targets[k].t) << ' ' << pose_text(p.targets[k].pose)
         << '\n';
    }
  }
  os << "warning_count=" << m.warnings.size() << '\n';
  for (std::size_t i = 0; i < m.warnings.size(); ++i) os << "warning." << i << '=' << m.warnings[i] << '\n';
  auto out = open_output(dir / kOutputManifest);
  out << os.str();
  if (!out) throw Error(ErrorKind::Io, "failed writing " + (dir / kOutputManifest).string());
  return m;
}

OutputManifest read_manifest(const fs::path& dir) {
  const fs::path path = dir / kOutputManifest;
  const std::string source = path.string();
  auto in = open_input(path);
  const auto kv = parse_key_values(in, source);
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw Error(ErrorKind::ParseError, source + ": missing key '" + key + "'");
    return it->second;
  };
  auto real = [&](const std::string& key) { return need_double(get(key), source, 0, key.c_str()); };
  auto integer = [&](const std::string& key) { return need_int(get(key), source, 0, key.c_str()); };

  OutputManifest m;
  m.clip_id = get("clip_id");
  m.reference_frame = integer("reference_frame");
  m.timestep = real("timestep");
  m.horizon = real("horizon");
  m.mode = get("mode");
  m.approximate_intrinsics = integer("approximate_intrinsics") != 0;
  m.tool_version = get("tool_version");
  m.options_hash = get("options_hash");
  const int frames = integer("frame_count");
  for (int k = 1; k <= frames; ++k) {
    const std::string p = "frame." + std::to_string(k);
    m.frames.push_back({k, real(p + ".t"), get(p + ".path")});
  }
  const int vehicles = integer("vehicle_count");
  for (int i = 0; i < vehicles; ++i) {
    const std::string p = "vehicle." + std::to_string(i);
    PlanSummary s;
    s.vehicle_id = integer(p + ".id");
    s.source_pose = parse_pose(tokens(get(p + ".source")), 0, source, 0);
    const int targets = integer(p + ".target_count");
    for (int k = 0; k < targets; ++k) {
      const auto t = tokens(get(p + ".target." + std::to_string(k)));
      if (t.empty()) parse_fail(source, 0, "empty target entry");
      s.targets.push_back({need_double(t[0], source, 0, "target time"), parse_pose(t, 1, source, 0)});
    }
    m.plans.push_back(std::move(s));
  }
  const int warnings = integer("warning_count");
  for (int i = 0; i < warnings; ++i) m.warnings.push_back(get("warning." + std::to_string(i)));
  return m;
}

}  // namespace urbanfuture
