#pragma once

#include <filesystem>
#include <string>

#include "urbanfuture/error.hpp"
#include "urbanfuture/service.hpp"

namespace httplib {
class Server;
}

namespace urbanfuture {

// HTTP status used for an error kind in JSON error responses.
int http_status(ErrorKind kind);

// Installs the session routes on `server`:
//   POST /sessions                          {"bundle": path}
//   GET  /sessions/{id}
//   GET  /sessions/{id}/frame/{n}
//   GET  /sessions/{id}/background
//   POST /sessions/{id}/futures             {"vehicle_id", "polyline", "horizon", "timestep", "mode"}
//   GET  /sessions/{id}/clips/{cid}/frame/{k}
// JSON bodies in and out, PNG images, permissive CORS.
void install_routes(httplib::Server& server, SessionManager& sessions);

// Blocks serving on host:port until the process is stopped.
int serve(const std::string& host, int port, const std::filesystem::path& sessions_dir);

}  // namespace urbanfuture
