#include <gtest/gtest.h>

#include <set>
#include <thread>

// Eigen first: resolv.h, pulled in by httplib, defines a _res macro.
#include "support.hpp"
#include "urbanfuture/httpd.hpp"

#include <httplib.h>
#include <json.hpp>

using namespace urbanfuture;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kShipped = fs::path(UF_TEST_DATA) / "synthetic_bundle";

class HttpdTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    sessions_ = std::make_unique<SessionManager>(uftest::scratch_dir("httpd_sessions"));
    server_ = std::make_unique<httplib::Server>();
    install_routes(*server_, *sessions_);
    port_ = server_->bind_to_any_port("127.0.0.1");
    thread_ = std::thread([] { server_->listen_after_bind(); });
    server_->wait_until_ready();
  }
  static void TearDownTestSuite() {
    server_->stop();
    thread_.join();
    server_.reset();
    sessions_.reset();
  }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(60, 0);
    return c;
  }

  json open_session() {
    auto res = client().Post("/sessions", json{{"bundle", kShipped.string()}}.dump(), "application/json");
    EXPECT_TRUE(res);
    EXPECT_EQ(res->status, 201) << res->body;
    return json::parse(res->body);
  }

  json post_future(const std::string& sid, const json& body, int expect_status = 200) {
    auto res = client().Post("/sessions/" + sid + "/futures", body.dump(), "application/json");
    EXPECT_TRUE(res);
    EXPECT_EQ(res->status, expect_status) << res->body;
    return json::parse(res->body);
  }

  static json polyline(const NamedPolyline& p) {
    json pts = json::array();
    for (const auto& v : p.points) pts.push_back({v.x(), v.y()});
    return pts;
  }

  static inline std::unique_ptr<SessionManager> sessions_;
  static inline std::unique_ptr<httplib::Server> server_;
  static inline std::thread thread_;
  static inline int port_{0};
};

}  // namespace

TEST_F(HttpdTest, OpenSessionReturnsDescriptor) {
  const json d = open_session();
  EXPECT_EQ(d["clip_id"], "synthetic");
  EXPECT_EQ(d["frame_count"], 12);
  EXPECT_EQ(d["width"], 640);
  EXPECT_EQ(d["approximate_intrinsics"], false);
  ASSERT_EQ(d["vehicles"].size(), 1u);
  EXPECT_EQ(d["vehicles"][0]["vehicle_id"], 1);
  EXPECT_EQ(d["vehicles"][0]["cad_id"], 3);
  auto res = client().Get("/sessions/" + d["session_id"].get<std::string>());
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body), d);
}

TEST_F(HttpdTest, TwoOpensGiveDistinctIds) {
  EXPECT_NE(open_session()["session_id"], open_session()["session_id"]);
}

TEST_F(HttpdTest, BadPathsAreNotFound) {
  auto res = client().Post("/sessions", json{{"bundle", "/nonexistent/bundle"}}.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);
  EXPECT_EQ(json::parse(res->body)["error"], "not-found");
  res = client().Get("/sessions/s9999");
  EXPECT_EQ(res->status, 404);
  res = client().Post("/sessions", "{not json", "application/json");
  EXPECT_EQ(res->status, 400);
}

TEST_F(HttpdTest, FramesAndBackgroundArePng) {
  const std::string sid = open_session()["session_id"];
  for (const std::string path : {"/frame/0", "/frame/11", "/background"}) {
    auto res = client().Get("/sessions/" + sid + path);
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200) << path;
    EXPECT_EQ(res->get_header_value("Content-Type"), "image/png");
    EXPECT_EQ(res->body.substr(1, 3), "PNG");
  }
  EXPECT_EQ(client().Get("/sessions/" + sid + "/frame/12")->status, 404);
}

TEST_F(HttpdTest, StationaryPolylineGivesFiveFrames) {
  const std::string sid = open_session()["session_id"];
  const auto bundle = load_bundle(kShipped);
  const json m = post_future(sid, {{"vehicle_id", 1}, {"polyline", polyline(*bundle.trajectory("stationary"))}});
  ASSERT_EQ(m["frames"].size(), 5u);
  EXPECT_EQ(m["cached"], false);
  EXPECT_NEAR(m["frames"][4]["t"].get<double>(), 1.0, 1e-12);
  const auto& target = m["plans"][0]["targets"][4];
  EXPECT_EQ(target["translation"], m["plans"][0]["source_pose"]["translation"]);
  for (const auto& f : m["frames"]) {
    auto res = client().Get(f["url"].get<std::string>());
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(res->get_header_value("Content-Type"), "image/png");
  }
  const json again = post_future(sid, {{"vehicle_id", 1}, {"polyline", polyline(*bundle.trajectory("stationary"))}});
  EXPECT_EQ(again["cached"], true);
  EXPECT_EQ(again["clip_id"], m["clip_id"]);
}

TEST_F(HttpdTest, ThreePolylinesReuseTheSolve) {
  const std::string sid = open_session()["session_id"];
  const json paths[] = {json::array({{175.5, 190.5}, {260, 190.5}, {330, 190.5}}),
                        json::array({{175.5, 190.5}, {220, 180}, {250, 160}}),
                        json::array({{175.5, 190.5}, {220, 200}, {240, 230}})};
  std::set<std::string> clips;
  for (const auto& p : paths) {
    const json m = post_future(sid, {{"vehicle_id", 1}, {"polyline", p}, {"mode", "appearance"}});
    EXPECT_EQ(m["frames"].size(), 5u);
    EXPECT_EQ(m["mode"], "appearance");
    clips.insert(m["clip_id"].get<std::string>());
  }
  EXPECT_EQ(clips.size(), 3u);
  const auto session = sessions_->get(sid);
  EXPECT_EQ(session->solve_count(), 1);
  EXPECT_EQ(session->solve_cache_hits(), 2);
}

TEST_F(HttpdTest, RequestErrors) {
  const std::string sid = open_session()["session_id"];
  EXPECT_EQ(post_future(sid, {{"vehicle_id", 1}, {"polyline", json::array({{1, 2}})}}, 400)["error"],
            "invalid-argument");
  EXPECT_EQ(post_future(sid, {{"vehicle_id", 9}, {"polyline", json::array({{1, 2}, {3, 4}})}}, 404)["error"],
            "not-found");
  post_future(sid, {{"polyline", json::array({{1, 2}, {3, 4}})}}, 400);
  EXPECT_EQ(client().Get("/sessions/" + sid + "/clips/nope/frame/1")->status, 404);
}

TEST_F(HttpdTest, CorsHeaders) {
  auto res = client().Options("/sessions");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 204);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
  const std::string sid = open_session()["session_id"];
  EXPECT_EQ(client().Get("/sessions/" + sid)->get_header_value("Access-Control-Allow-Origin"), "*");
}

TEST(HttpStatus, ErrorKindMapping) {
  EXPECT_EQ(http_status(ErrorKind::NotFound), 404);
  EXPECT_EQ(http_status(ErrorKind::InsufficientCorrespondences), 422);
  EXPECT_EQ(http_status(ErrorKind::Io), 500);
  EXPECT_EQ(http_status(ErrorKind::ParseError), 400);
}
