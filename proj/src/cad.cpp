#include "urbanfuture/cad.hpp"

#include <bitset>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

namespace urbanfuture {

namespace {

Error parse_error(ErrorKind kind, int line, const std::string& what) {
  return Error(kind, "line " + std::to_string(line) + ": " + what);
}

int parse_face_index(const std::string& token, int line) {
  const std::string head = token.substr(0, token.find('/'));
  try {
    std::size_t used = 0;
    const int idx = std::stoi(head, &used);
    if (used != head.size()) throw std::invalid_argument(head);
    return idx;
  } catch (const std::exception&) {
    throw parse_error(ErrorKind::MalformedMesh, line, "bad face index '" + token + "'");
  }
}

}  // namespace

std::optional<KeypointName> parse_keypoint_name(std::string_view s) {
  for (int i = 0; i < kKeypointCount; ++i) {
    if (kKeypointNames[std::size_t(i)] == s) return KeypointName(i);
  }
  return std::nullopt;
}

double CadModel::ground_offset() const {
  double zmin = 0.0;
  for (const auto& v : vertices) zmin = std::min(zmin, v.z());
  return -zmin;
}

double CadModel::bbox_diagonal() const {
  if (vertices.empty()) return 0.0;
  Vector3 lo = vertices.front(), hi = vertices.front();
  for (const auto& v : vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return (hi - lo).norm();
}

CadModel load_cad(int id, std::istream& mesh, std::istream& keypoints) {
  CadModel cad;
  cad.id = id;

  std::string text;
  int line_no = 0;
  std::vector<std::vector<int>> polygons;
  std::vector<int> polygon_lines;
  while (std::getline(mesh, text)) {
    ++line_no;
    std::istringstream ls(text);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z) || !std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
        throw parse_error(ErrorKind::MalformedMesh, line_no, "vertex needs three finite reals");
      }
      cad.vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      while (ls >> tok) poly.push_back(parse_face_index(tok, line_no));
      if (poly.size() < 3) {
        throw parse_error(ErrorKind::MalformedMesh, line_no, "face needs at least three vertices");
      }
      polygons.push_back(std::move(poly));
      polygon_lines.push_back(line_no);
    }
  }
  if (cad.vertices.empty() || polygons.empty()) {
    throw Error(ErrorKind::EmptyMesh, "mesh has no vertices or no faces");
  }
  const int n = int(cad.vertices.size());
  for (std::size_t p = 0; p < polygons.size(); ++p) {
    auto& poly = polygons[p];
    for (int& idx : poly) {
      // OBJ allows negative indices relative to the end of the vertex list.
      idx = idx > 0 ? idx - 1 : n + idx;
      if (idx < 0 || idx >= n) {
        throw parse_error(ErrorKind::MalformedMesh, polygon_lines[p], "face index out of range");
      }
    }
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
      cad.faces.emplace_back(poly[0], poly[k], poly[k + 1]);
    }
  }

  std::bitset<kKeypointCount> seen;
  line_no = 0;
  while (std::getline(keypoints, text)) {
    ++line_no;
    std::istringstream ls(text);
    std::string name;
    if (!(ls >> name) || name[0] == '#') continue;
    const auto kp = parse_keypoint_name(name);
    if (!kp) throw parse_error(ErrorKind::ParseError, line_no, "unknown keypoint '" + name + "'");
    double x, y, z;
    if (!(ls >> x >> y >> z)) {
      throw parse_error(ErrorKind::ParseError, line_no, "keypoint needs three reals");
    }
    if (seen.test(std::size_t(*kp))) {
      throw parse_error(ErrorKind::ParseError, line_no, "duplicate keypoint '" + name + "'");
    }
    seen.set(std::size_t(*kp));
    cad.keypoints[std::size_t(*kp)] = Vector3(x, y, z);
  }
  for (int i = 0; i < kKeypointCount; ++i) {
    if (!seen.test(std::size_t(i))) {
      throw Error(ErrorKind::MissingKeypoint,
                  "missing keypoint '" + std::string(kKeypointNames[std::size_t(i)]) + "'");
    }
  }

  Vector3 centroid = Vector3::Zero();
  for (const auto& v : cad.vertices) centroid += v;
  centroid /= double(cad.vertices.size());
  for (auto& v : cad.vertices) v -= centroid;
  for (auto& k : cad.keypoints) k -= centroid;

  const double diag = cad.bbox_diagonal();
  if (diag < 1.0 || diag > 8.0) {
    throw Error(ErrorKind::MalformedMesh,
                "mesh bounding-box diagonal " + std::to_string(diag) + " m outside [1, 8]");
  }
  return cad;
}

CadModel load_cad(int id, const std::filesystem::path& mesh_path,
                  const std::filesystem::path& keypoint_path) {
  std::ifstream mesh(mesh_path);
  if (!mesh) throw Error(ErrorKind::MissingFile, "cannot open mesh " + mesh_path.string());
  std::ifstream kp(keypoint_path);
  if (!kp) throw Error(ErrorKind::MissingFile, "cannot open keypoints " + keypoint_path.string());
  try {
    return load_cad(id, mesh, kp);
  } catch (const Error& e) {
    throw Error(e.kind(), mesh_path.filename().string() + ": " + e.what());
  }
}

void write_cad(const CadModel& cad, const std::filesystem::path& mesh_path,
               const std::filesystem::path& keypoint_path) {
  std::ofstream mesh(mesh_path);
  std::ofstream kp(keypoint_path);
  if (!mesh || !kp) throw Error(ErrorKind::Io, "cannot write CAD files for model " + std::to_string(cad.id));
  mesh << std::setprecision(17);
  kp << std::setprecision(17);
  mesh << "# vehicle frame: +x forward, +y left, +z up (meters)\n";
  for (const auto& v : cad.vertices) mesh << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& f : cad.faces) mesh << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  for (int i = 0; i < kKeypointCount; ++i) {
    const auto& k = cad.keypoints[std::size_t(i)];
    kp << kKeypointNames[std::size_t(i)] << ' ' << k.x() << ' ' << k.y() << ' ' << k.z() << '\n';
  }
}

}  // namespace urbanfuture
