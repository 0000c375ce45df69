#include "urbanfuture/httpd.hpp"

#include <httplib.h>

#include <json.hpp>

namespace urbanfuture {

using nlohmann::json;

namespace {

json pose_json(const Pose& p) {
  json r = json::array();
  for (int i = 0; i < 9; ++i) r.push_back(p.rotation(i / 3, i % 3));
  return {{"rotation", r}, {"translation", {p.translation.x(), p.translation.y(), p.translation.z()}}};
}

json box_json(const Box& b) { return {{"x", b.x}, {"y", b.y}, {"width", b.width}, {"height", b.height}}; }

json descriptor_json(const SessionDescriptor& d) {
  json vehicles = json::array();
  for (const auto& v : d.vehicles) {
    vehicles.push_back({{"vehicle_id", v.vehicle_id},
                        {"cad_id", v.cad_id ? json(*v.cad_id) : json(nullptr)},
                        {"box", v.box ? box_json(*v.box) : json(nullptr)}});
  }
  return {{"session_id", d.session_id},
          {"clip_id", d.clip_id},
          {"frame_count", d.frame_count},
          {"width", d.width},
          {"height", d.height},
          {"approximate_intrinsics", d.approximate_intrinsics},
          {"vehicles", vehicles},
          {"cad_ids", d.cad_ids},
          {"trajectories", d.trajectories}};
}

json manifest_json(const std::string& session, const FutureResult& r) {
  const auto& m = r.manifest;
  json frames = json::array();
  for (const auto& f : m.frames) {
    frames.push_back({{"index", f.index},
                      {"t", f.t},
                      {"url", "/sessions/" + session + "/clips/" + m.clip_id + "/frame/" + std::to_string(f.index)}});
  }
  json plans = json::array();
  for (const auto& p : m.plans) {
    json targets = json::array();
    for (const auto& t : p.targets) {
      json tp = pose_json(t.pose);
      tp["t"] = t.t;
      targets.push_back(tp);
    }
    plans.push_back({{"vehicle_id", p.vehicle_id}, {"source_pose", pose_json(p.source_pose)}, {"targets", targets}});
  }
  return {{"clip_id", m.clip_id},
          {"reference_frame", m.reference_frame},
          {"timestep", m.timestep},
          {"horizon", m.horizon},
          {"mode", m.mode},
          {"frames", frames},
          {"plans", plans},
          {"warnings", m.warnings},
          {"options_hash", m.options_hash},
          {"approximate_intrinsics", m.approximate_intrinsics},
          {"cached", r.cached}};
}

FutureRequest parse_future_request(const json& body) {
  FutureRequest req;
  req.vehicle_id = body.at("vehicle_id").get<int>();
  for (const auto& p : body.at("polyline")) {
    if (!p.is_array() || p.size() != 2) throw Error(ErrorKind::InvalidArgument, "polyline points must be [u, v]");
    req.polyline.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  req.horizon = body.value("horizon", req.horizon);
  req.timestep = body.value("timestep", req.timestep);
  req.mode = parse_render_mode(body.value("mode", std::string("normals")));
  req.reference_frame = body.value("reference_frame", req.reference_frame);
  req.align_first_heading = body.value("align_first_heading", req.align_first_heading);
  return req;
}

void send_error(httplib::Response& res, int status, std::string_view kind, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", kind}, {"message", message}}.dump(), "application/json");
}

// Runs a handler, turning exceptions into structured error responses.
template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, http_status(e.kind()), to_string(e.kind()), e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "parse-error", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

void send_png(httplib::Response& res, const std::string& bytes) { res.set_content(bytes, "image/png"); }

int to_index(const std::string& s) {
  try {
    return std::stoi(s);
  } catch (const std::exception&) {
    throw Error(ErrorKind::InvalidArgument, "bad index '" + s + "'");
  }
}

}  // namespace

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotFound:
    case ErrorKind::MissingFile:
      return 404;
    case ErrorKind::Io:
      return 500;
    case ErrorKind::InsufficientCorrespondences:
    case ErrorKind::DegenerateConfiguration:
    case ErrorKind::Divergence:
    case ErrorKind::PointBehindCamera:
    case ErrorKind::HorizonExceedsTrajectory:
      return 422;
    default:
      return 400;
  }
}

void install_routes(httplib::Server& server, SessionManager& sessions) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Post("/sessions", guarded([&](const httplib::Request& req, httplib::Response& res) {
                const json body = json::parse(req.body);
                const auto d = sessions.open(body.at("bundle").get<std::string>());
                res.status = 201;
                res.set_content(descriptor_json(d).dump(), "application/json");
              }));
  server.Get(R"(/sessions/([^/]+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
               res.set_content(descriptor_json(sessions.get(req.matches[1])->descriptor()).dump(), "application/json");
             }));
  server.Get(R"(/sessions/([^/]+)/frame/(-?\d+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
               const auto s = sessions.get(req.matches[1]);
               const int n = to_index(req.matches[2]);
               if (n < 0 || n >= s->bundle().frame_count) {
                 throw Error(ErrorKind::NotFound, "no frame " + std::to_string(n));
               }
               send_png(res, encode_png(s->frame(n)));
             }));
  server.Get(R"(/sessions/([^/]+)/background)", guarded([&](const httplib::Request& req, httplib::Response& res) {
               send_png(res, encode_png(sessions.get(req.matches[1])->background().image));
             }));
  server.Post(R"(/sessions/([^/]+)/futures)", guarded([&](const httplib::Request& req, httplib::Response& res) {
                const auto s = sessions.get(req.matches[1]);
                const FutureResult r = s->generate(parse_future_request(json::parse(req.body)));
                res.set_content(manifest_json(s->id(), r).dump(), "application/json");
              }));
  server.Get(R"(/sessions/([^/]+)/clips/([^/]+)/frame/(-?\d+))",
             guarded([&](const httplib::Request& req, httplib::Response& res) {
               send_png(res, sessions.get(req.matches[1])->clip_frame_png(req.matches[2], to_index(req.matches[3])));
             }));
}

int serve(const std::string& host, int port, const std::filesystem::path& sessions_dir) {
  SessionManager sessions(sessions_dir);
  httplib::Server server;
  install_routes(server, sessions);
  return server.listen(host, port) ? 0 : 1;
}

}  // namespace urbanfuture
