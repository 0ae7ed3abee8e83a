#include "nanowb/service.hpp"

#include "nanowb/errors.hpp"

#include <httplib.h>

#include <cmath>
#include <regex>
#include <thread>

namespace nanowb {
namespace {

constexpr const char* kJson = "application/json; charset=utf-8";

void send(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send(res, status, {{"error", message}});
}

Json issues_json(const std::vector<ValidationIssue>& issues) {
  Json list = Json::array();
  for (const auto& i : issues) list.push_back({{"path", i.path}, {"message", i.message}});
  return list;
}

bool valid_id(const std::string& id) { return std::regex_match(id, std::regex("[0-9a-f]{16}")); }

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(); }

Json atoms_json(const std::vector<Atom>& atoms) {
  Json list = Json::array();
  for (const auto& a : atoms) list.push_back({{"species", a.species}, {"x", a.r.x}, {"y", a.r.y}, {"z", a.r.z}});
  return {{"count", atoms.size()}, {"atoms", list}};
}

}  // namespace

struct Service::Impl {
  fs::path data;
  fs::path scenes;
  JobQueue queue;
  httplib::Server server;
  std::thread thread;

  Impl(fs::path d, int workers) : data(std::move(d)), scenes(data / "scenes"), queue(data / "runs", workers) {
    fs::create_directories(scenes);
    routes();
  }

  // Returns the run directory when the job exists, else writes 404.
  std::optional<fs::path> find_run(const std::string& id, httplib::Response& res) {
    const fs::path dir = queue.root() / id;
    std::error_code ec;
    if (!valid_id(id) || !fs::exists(dir / "manifest.json", ec)) {
      send_error(res, 404, "unknown job '" + id + "'");
      return std::nullopt;
    }
    return dir;
  }

  // Result routes: 404 for unknown ids, 409 until the run is done.
  std::optional<std::pair<fs::path, Json>> finished_run(const std::string& id, httplib::Response& res) {
    const auto dir = find_run(id, res);
    if (!dir) return std::nullopt;
    Json m = read_manifest(*dir);
    const std::string status = m.value("status", "");
    if (status != "done") {
      send(res, 409, {{"error", "job is not finished"}, {"status", status}});
      return std::nullopt;
    }
    return std::make_pair(*dir, std::move(m));
  }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(R"(/api/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      } catch (...) {
        send_error(res, 500, "internal error");
      }
    });

    server.Get("/api/v1/health", [](const httplib::Request&, httplib::Response& res) {
      send(res, 200, {{"status", "ok"}});
    });

    server.Post("/api/v1/scenes", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        const SceneSpec scene = parse_scene_text(req.body);
        const std::string id = scene_id(scene);
        write_file_atomic(scenes / (id + ".json"), scene_to_json(scene).dump(2) + "\n");
        send(res, 201, {{"scene_id", id}});
      } catch (const ValidationError& e) {
        send(res, 422, {{"error", "scene validation failed"}, {"errors", issues_json(e.issues())}});
      }
    });

    server.Get(R"(/api/v1/scenes/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      const fs::path p = scenes / (id + ".json");
      std::error_code ec;
      if (!valid_id(id) || !fs::exists(p, ec)) return send_error(res, 404, "unknown scene '" + id + "'");
      res.status = 200;
      res.set_content(read_file(p), kJson);
    });

    server.Post("/api/v1/jobs", [this](const httplib::Request& req, httplib::Response& res) {
      Json body;
      try {
        body = Json::parse(req.body);
      } catch (const Json::parse_error& e) {
        return send(res, 422, {{"error", "invalid JSON"}, {"errors", Json::array({{{"path", ""}, {"message", e.what()}}})}});
      }
      if (!body.is_object() || !body.contains("scene_id") || !body["scene_id"].is_string())
        return send(res, 422, {{"error", "body must be {\"scene_id\": string}"},
                               {"errors", Json::array({{{"path", "/scene_id"}, {"message", "is required"}}})}});
      const std::string id = body["scene_id"];
      const fs::path p = scenes / (id + ".json");
      std::error_code ec;
      if (!valid_id(id) || !fs::exists(p, ec)) return send_error(res, 404, "unknown scene '" + id + "'");
      const SceneSpec scene = parse_scene_text(read_file(p));
      const std::string job = queue.submit(scene);
      send(res, 202, {{"job_id", job}});
    });

    server.Get(R"(/api/v1/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto dir = find_run(req.matches[1], res);
      if (!dir) return;
      res.status = 200;
      res.set_content(read_file(*dir / "manifest.json"), kJson);
    });

    server.Get(R"(/api/v1/jobs/([^/]+)/fields/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto run = finished_run(req.matches[1], res);
      if (!run) return;
      const std::string name = req.matches[2];
      const auto& frames = run->second["frames"];
      long long want = -1;
      if (req.has_param("frame")) {
        try {
          want = std::stoll(req.get_param_value("frame"));
        } catch (const std::exception&) {
          return send_error(res, 422, "frame must be an integer");
        }
      }
      const Json* pick = nullptr;
      for (const auto& f : frames) {
        if (f.value("field", "") != name) continue;
        if (want < 0 ? (!pick || f.value("index", 0) >= pick->value("index", 0)) : f.value("index", -1) == want)
          pick = &f;
      }
      if (!pick) return send_error(res, 404, "no frame for field '" + name + "'");
      const FieldFrame fr = read_field_csv((run->first / pick->value("file", "")).string());
      Json values = Json::array();
      for (double v : fr.values) values.push_back(number_or_null(v));
      send(res, 200,
           {{"name", fr.name},
            {"frame", pick->value("index", 0)},
            {"time", fr.time},
            {"nx", fr.nx},
            {"ny", fr.ny},
            {"bounds", {{"xmin", fr.xmin}, {"xmax", fr.xmax}, {"ymin", fr.ymin}, {"ymax", fr.ymax}}},
            {"values", values}});
    });

    server.Get(R"(/api/v1/jobs/([^/]+)/history)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto run = finished_run(req.matches[1], res);
      if (!run) return;
      const fs::path p = run->first / "history.csv";
      std::error_code ec;
      if (!fs::exists(p, ec)) return send_error(res, 404, "this run has no history");
      std::istringstream in(read_file(p));
      std::string line;
      std::getline(in, line);
      Json columns = Json::array();
      {
        std::istringstream ls(line);
        std::string c;
        while (std::getline(ls, c, ',')) columns.push_back(c);
      }
      Json rows = Json::array();
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        Json row = Json::array();
        std::istringstream ls(line);
        std::string c;
        while (std::getline(ls, c, ',')) row.push_back(number_or_null(std::strtod(c.c_str(), nullptr)));
        rows.push_back(row);
      }
      send(res, 200, {{"columns", columns}, {"rows", rows}});
    });

    server.Get(R"(/api/v1/jobs/([^/]+)/bands)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto run = finished_run(req.matches[1], res);
      if (!run) return;
      const fs::path p = run->first / "bands.json";
      std::error_code ec;
      if (!fs::exists(p, ec)) return send_error(res, 404, "this run has no bands");
      res.status = 200;
      res.set_content(read_file(p), kJson);
    });

    server.Post("/api/v1/lattice/preview", [](const httplib::Request& req, httplib::Response& res) {
      Json body;
      try {
        body = Json::parse(req.body);
      } catch (const Json::parse_error& e) {
        return send(res, 422, {{"error", "invalid JSON"}, {"errors", Json::array({{{"path", ""}, {"message", e.what()}}})}});
      }
      try {
        if (body.is_object() && body.contains("shape")) {
          ParticleSpec p = parse_particle_spec(body);
          p.lattice.max_atoms = std::min<std::size_t>(p.lattice.max_atoms, 8 * kPreviewCap);
          const auto atoms = build_particle(p);
          if (atoms.size() > kPreviewCap)
            return send(res, 413, {{"error", "preview exceeds the atom cap"}, {"count", atoms.size()}, {"cap", kPreviewCap}});
          return send(res, 200, atoms_json(atoms));
        }
        const LatticeSpec spec = parse_lattice_spec(body);
        const std::size_t n = lattice_atom_count(spec);
        if (n > kPreviewCap)
          return send(res, 413, {{"error", "preview exceeds the atom cap"}, {"count", n}, {"cap", kPreviewCap}});
        send(res, 200, atoms_json(build_lattice(spec)));
      } catch (const ValidationError& e) {
        send(res, 422, {{"error", "spec validation failed"}, {"errors", issues_json(e.issues())}});
      } catch (const TooLarge& e) {
        send(res, 413, {{"error", e.what()}, {"count", e.requested()}, {"cap", kPreviewCap}});
      } catch (const Error& e) {
        send(res, 422, {{"error", e.what()}, {"errors", Json::array({{{"path", ""}, {"message", e.what()}}})}});
      }
    });
  }
};

Service::Service(fs::path data_dir, int workers) : impl_(std::make_unique<Impl>(std::move(data_dir), workers)) {}

Service::~Service() { stop(); }

bool Service::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int Service::start_background(const std::string& host) {
  const int port = impl_->server.bind_to_any_port(host);
  if (port <= 0) throw Error("could not bind a port on " + host);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void Service::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

JobQueue& Service::queue() { return impl_->queue; }

}  // namespace nanowb
