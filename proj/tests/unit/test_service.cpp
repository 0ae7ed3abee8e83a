#include "nanowb/service.hpp"
#include "support.hpp"

#include <doctest.h>
#include <httplib.h>

#include <chrono>
#include <thread>

using namespace nanowb;

namespace {

const char* kTinyScene = R"({
  "scene_version": 1,
  "kind": "meso-simulation",
  "materials": [{"name": "al", "rho0": 2.7, "K": 70, "G": 26, "sigma_y": 0.1}],
  "meso": {
    "material": "al",
    "grid": {"nx": 8, "ny": 8, "width": 1.6, "height": 1.6},
    "grains": {"count": 3},
    "schedule": {"load": {"target_strain": 0.01, "ramp_transits": 5, "hold_transits": 1}, "frames": 2}
  }
})";

struct Live {
  testing::TempDir dir{"service"};
  Service service{dir.path()};
  int port = service.start_background();
  httplib::Client client{"127.0.0.1", port};

  Json post(const std::string& path, const std::string& body, int want) {
    const auto res = client.Post(path, body, "application/json");
    REQUIRE(res);
    CHECK(res->status == want);
    CHECK(res->get_header_value("Content-Type").find("application/json") == 0);
    return Json::parse(res->body);
  }
  Json get(const std::string& path, int want) {
    const auto res = client.Get(path);
    REQUIRE(res);
    CHECK(res->status == want);
    return Json::parse(res->body);
  }
  Json wait_done(const std::string& job) {
    Json m;
    for (int k = 0; k < 600; ++k) {
      m = get("/api/v1/jobs/" + job, 200);
      if (m["status"] == "done" || m["status"] == "failed") break;
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    return m;
  }
};

}  // namespace

TEST_CASE("health and CORS preflight") {
  Live live;
  CHECK(live.get("/api/v1/health", 200)["status"] == "ok");
  const auto res = live.client.Options("/api/v1/scenes");
  REQUIRE(res);
  CHECK(res->status == 204);
  CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");
}

TEST_CASE("unknown ids give 404 with an error body") {
  Live live;
  CHECK(live.get("/api/v1/jobs/0123456789abcdef", 404).contains("error"));
  CHECK(live.get("/api/v1/jobs/not-an-id", 404).contains("error"));
  CHECK(live.get("/api/v1/jobs/0123456789abcdef/bands", 404).contains("error"));
  CHECK(live.get("/api/v1/scenes/0123456789abcdef", 404).contains("error"));
  CHECK(live.post("/api/v1/jobs", R"({"scene_id": "0123456789abcdef"})", 404).contains("error"));
}

TEST_CASE("invalid scene gives 422 listing every error") {
  Live live;
  Json doc = Json::parse(kTinyScene);
  doc["meso"]["grains"]["delta"] = 1.5;
  doc["meso"]["grid"]["ny"] = 2.5;
  doc["extra"] = true;
  const Json body = live.post("/api/v1/scenes", doc.dump(), 422);
  REQUIRE(body["errors"].size() == 3);
  std::set<std::string> paths;
  for (const auto& e : body["errors"]) paths.insert(e["path"].get<std::string>());
  CHECK(paths == std::set<std::string>{"/meso/grains/delta", "/meso/grid/ny", "/extra"});
  CHECK(live.post("/api/v1/scenes", "{oops", 422)["errors"].size() == 1);
  live.post("/api/v1/jobs", R"({"scene": 1})", 422);
}

TEST_CASE("lattice preview counts and cap") {
  Live live;
  const Json fcc = live.post("/api/v1/lattice/preview",
                             R"({"kind": "fcc", "a": 4.05, "species": "Al", "extents": [3, 3, 3]})", 200);
  CHECK(fcc["count"] == 108);
  CHECK(fcc["atoms"].size() == 108);
  CHECK(fcc["atoms"][0]["species"] == "Al");

  const Json ball = live.post("/api/v1/lattice/preview", R"({"shape": "fullerene", "radius": 3.5})", 200);
  CHECK(ball["count"] == 60);

  const Json big = live.post("/api/v1/lattice/preview", R"({"kind": "fcc", "a": 4.05, "extents": [24, 24, 24]})", 413);
  CHECK(big["count"] == 55296);
  CHECK(big["cap"] == 50000);
  live.post("/api/v1/lattice/preview", R"({"kind": "fcc", "a": -1})", 422);
}

TEST_CASE("scene to job to results") {
  Live live;
  const Json created = live.post("/api/v1/scenes", kTinyScene, 201);
  const std::string sid = created["scene_id"];
  CHECK(sid.size() == 16);
  CHECK(live.post("/api/v1/scenes", kTinyScene, 201)["scene_id"] == sid);
  CHECK(live.get("/api/v1/scenes/" + sid, 200)["meso"]["grid"]["nx"] == 8);

  const std::string job = live.post("/api/v1/jobs", Json{{"scene_id", sid}}.dump(), 202)["job_id"];
  CHECK(job == sid);
  const Json m = live.wait_done(job);
  REQUIRE(m["status"] == "done");
  CHECK(m["progress"] == 1.0);

  const Json f = live.get("/api/v1/jobs/" + job + "/fields/eq_plastic", 200);
  CHECK(f["name"] == "eq_plastic");
  CHECK(f["frame"] == 1);
  CHECK(f["nx"] == 8);
  CHECK(f["values"].size() == 64);
  CHECK(f["bounds"]["xmax"].get<double>() > f["bounds"]["xmin"].get<double>());
  CHECK(live.get("/api/v1/jobs/" + job + "/fields/eq_plastic?frame=0", 200)["frame"] == 0);
  live.get("/api/v1/jobs/" + job + "/fields/eq_plastic?frame=9", 404);
  live.get("/api/v1/jobs/" + job + "/fields/eq_plastic?frame=x", 422);
  live.get("/api/v1/jobs/" + job + "/fields/sigma_xy", 404);

  const Json h = live.get("/api/v1/jobs/" + job + "/history", 200);
  CHECK(h["columns"][0] == "time");
  CHECK(h["rows"].size() > 10);
  CHECK(h["rows"][0].size() == h["columns"].size());

  const Json b = live.get("/api/v1/jobs/" + job + "/bands", 200);
  CHECK(b["bands"].is_array());

  // Re-submitting a finished scene returns the same job without rerunning.
  CHECK(live.post("/api/v1/jobs", Json{{"scene_id", sid}}.dump(), 202)["job_id"] == job);
}

TEST_CASE("result routes give 409 until the job is done") {
  Live live;
  const SceneSpec scene = parse_scene_text(kTinyScene);
  prepare_run(scene, live.service.queue().root());
  const std::string id = scene_id(scene);
  CHECK(live.get("/api/v1/jobs/" + id, 200)["status"] == "queued");
  const Json conflict = live.get("/api/v1/jobs/" + id + "/bands", 409);
  CHECK(conflict["status"] == "queued");
  live.get("/api/v1/jobs/" + id + "/history", 409);
  live.get("/api/v1/jobs/" + id + "/fields/eq_plastic", 409);
}
