#include "nanowb/runner.hpp"

#include "nanowb/errors.hpp"
#include "nanowb/mesogen.hpp"
#include "nanowb/recovery.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace nanowb {

void write_file_atomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FileError(tmp.string(), "cannot open for writing");
    out << text;
    out.flush();
    if (!out) throw FileError(tmp.string(), "write failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw FileError(path.string(), "rename failed: " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError(path.string(), "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_manifest(const fs::path& run_dir) { return Json::parse(read_file(run_dir / "manifest.json")); }

std::string history_to_csv(const std::vector<HistoryRow>& rows) {
  std::string out =
      "time,avg_strain,avg_stress,kinetic_energy,internal_energy,external_work,plastic_work,viscous_work,"
      "hourglass_work\n";
  for (const auto& r : rows) {
    for (double v : {r.time, r.avg_strain, r.avg_stress, r.kinetic, r.internal, r.external_work, r.plastic_work,
                     r.viscous_work}) {
      out += format_sci9(v);
      out += ',';
    }
    out += format_sci9(r.hourglass_work);
    out += '\n';
  }
  return out;
}

Json bands_to_json(const std::vector<Band>& bands, const FieldFrame& f, const BandOptions& options) {
  Json list = Json::array();
  std::vector<double> widths;
  double angle_sum = 0.0;
  for (const auto& b : bands) {
    list.push_back({{"cells", b.cells},
                    {"cell_count", b.cells.size()},
                    {"angle_deg", b.angle_deg},
                    {"axis_deg", b.axis_deg},
                    {"width", b.width},
                    {"length", b.length},
                    {"peak", b.peak},
                    {"mean", b.mean},
                    {"centroid", Json::array({b.centroid.x, b.centroid.y})}});
    widths.push_back(b.width);
    angle_sum += b.angle_deg;
  }
  Json summary = {{"count", bands.size()}};
  if (!bands.empty()) {
    std::sort(widths.begin(), widths.end());
    const std::size_t n = widths.size();
    const double median = n % 2 ? widths[n / 2] : 0.5 * (widths[n / 2 - 1] + widths[n / 2]);
    summary["mean_angle_deg"] = angle_sum / static_cast<double>(n);
    summary["median_width"] = median;
  }
  const double mean = mean_value(f), peak = max_value(f);
  return {{"field", f.name},
          {"time", f.time},
          {"nx", f.nx},
          {"ny", f.ny},
          {"threshold_factor", options.threshold_factor},
          {"min_cells", options.min_cells},
          {"load_axis_deg", options.load_axis_deg},
          {"field_mean", std::isfinite(mean) ? Json(mean) : Json()},
          {"field_max", std::isfinite(peak) ? Json(peak) : Json()},
          {"summary", summary},
          {"bands", list}};
}

FieldFrame grain_frame(const Grid2D& grid, const GrainMap& grains) {
  FieldFrame f;
  f.name = "grain_id";
  f.nx = grid.nx;
  f.ny = grid.ny;
  f.xmin = *std::min_element(grid.node_x.begin(), grid.node_x.end());
  f.xmax = *std::max_element(grid.node_x.begin(), grid.node_x.end());
  f.ymin = *std::min_element(grid.node_y.begin(), grid.node_y.end());
  f.ymax = *std::max_element(grid.node_y.begin(), grid.node_y.end());
  f.values.assign(grains.grain_id.begin(), grains.grain_id.end());
  f.validate();
  return f;
}

namespace {

Json base_manifest(const SceneSpec& scene, const std::string& id) {
  return {{"run_id", id},
          {"scene_id", id},
          {"kind", to_string(scene.kind)},
          {"status", "queued"},
          {"progress", 0.0},
          {"wall_time_s", 0.0},
          {"quasi_static", nullptr},
          {"warnings", Json::array()},
          {"frames", Json::array()},
          {"artifacts", Json::array()},
          {"stats", Json::object()},
          {"error", nullptr}};
}

void write_manifest(const fs::path& dir, const Json& m) { write_file_atomic(dir / "manifest.json", m.dump(2) + "\n"); }

Json error_json(const std::exception& e) {
  Json j = {{"message", e.what()}, {"type", "error"}};
  if (const auto* t = dynamic_cast<const MeshTangled*>(&e)) {
    j["type"] = "mesh-tangled";
    j["cell"] = t->cell();
  } else if (const auto* n = dynamic_cast<const NumericalFailure*>(&e)) {
    j["type"] = "numerical-failure";
    j["step"] = n->step();
    j["cell"] = n->cell();
  } else if (dynamic_cast<const ParticleCollision*>(&e)) {
    j["type"] = "particle-collision";
  } else if (dynamic_cast<const TooLarge*>(&e)) {
    j["type"] = "too-large";
  } else if (dynamic_cast<const EmptyParticle*>(&e)) {
    j["type"] = "empty-particle";
  } else if (dynamic_cast<const FileError*>(&e)) {
    j["type"] = "file-error";
  } else if (dynamic_cast<const InvalidArgument*>(&e)) {
    j["type"] = "invalid-argument";
  }
  return j;
}

void run_meso(const SceneSpec& scene, const fs::path& dir, Json& m, const std::function<void(double)>& progress) {
  const SimulationSetup setup = make_setup(scene);
  const RunResult res = run(setup, progress);
  fs::create_directories(dir / "frames");

  const std::size_t nf = setup.fields.size();
  for (std::size_t idx = 0; idx < res.frames.size(); ++idx) {
    const auto& f = res.frames[idx];
    const std::size_t k = idx / nf;
    const std::string stem = "frames/" + f.name + "_" + std::to_string(k);
    export_field_csv(f, (dir / (stem + ".csv")).string());
    Json entry = {{"field", f.name}, {"index", k}, {"time", f.time}, {"file", stem + ".csv"}};
    if (scene.outputs.png) {
      export_field_png(f, (dir / (stem + ".png")).string());
      entry["png"] = stem + ".png";
    }
    m["frames"].push_back(entry);
  }

  write_file_atomic(dir / "history.csv", history_to_csv(res.history));
  m["artifacts"].push_back("history.csv");

  export_field_csv(grain_frame(setup.grid, setup.grains), (dir / "grains.csv").string());
  m["artifacts"].push_back("grains.csv");

  FieldFrame intensity;
  for (auto it = res.frames.rbegin(); it != res.frames.rend(); ++it)
    if (it->name == "eq_plastic") {
      intensity = *it;
      break;
    }
  const auto bands = detect_bands(intensity, scene.outputs.bands);
  write_file_atomic(dir / "bands.json", bands_to_json(bands, intensity, scene.outputs.bands).dump(2) + "\n");
  m["artifacts"].push_back("bands.json");

  Json warnings = Json::array();
  for (const auto& w : res.warnings) warnings.push_back(w);

  if (scene.outputs.recovered_stress) {
    const auto& g = res.final_grid;
    const double h = std::max(scene.meso->grid.width / g.nx, scene.meso->grid.height / g.ny);
    StressRecovery rec(samples_from_cells(g, res.final_cells), free_side_tractions(g), {2.5 * h, 4, 1.5, 1e12});
    const double xmin = *std::min_element(g.node_x.begin(), g.node_x.end());
    const double xmax = *std::max_element(g.node_x.begin(), g.node_x.end());
    const double ymin = *std::min_element(g.node_y.begin(), g.node_y.end());
    const double ymax = *std::max_element(g.node_y.begin(), g.node_y.end());
    const auto rf = recover_field(rec, g.nx, g.ny, xmin, xmax, ymin, ymax, res.end_time);
    for (const FieldFrame* f : {&rf.xx, &rf.yy, &rf.xy}) {
      const std::string file = "frames/" + f->name + ".csv";
      export_field_csv(*f, (dir / file).string());
      m["frames"].push_back({{"field", f->name}, {"index", 0}, {"time", f->time}, {"file", file}});
    }
    for (const auto& w : rf.warnings) warnings.push_back(w);
  }

  const auto gs = grain_statistics(setup.grid, setup.grains);
  const auto& e = res.energy;
  m["quasi_static"] = res.quasi_static;
  m["warnings"] = warnings;
  m["stats"] = {{"steps", res.steps},
                {"end_time", res.end_time},
                {"ramp_time", res.ramp_time},
                {"grains", gs.count},
                {"mean_grain_diameter", gs.mean_diameter},
                {"max_eq_plastic", max_value(intensity)},
                {"mean_eq_plastic", mean_value(intensity)},
                {"final_avg_strain", res.history.back().avg_strain},
                {"continuity_excess", res.continuity_excess},
                {"nodes_split", res.nodes_split},
                {"max_von_mises_ratio", res.max_von_mises_ratio},
                {"energy",
                 {{"external_work", e.external_work},
                  {"kinetic", e.kinetic},
                  {"elastic", e.elastic},
                  {"plastic", e.plastic},
                  {"viscous", e.viscous},
                  {"hourglass", e.hourglass},
                  {"mismatch", e.mismatch()}}},
                {"bands", bands.size()}};
}

void run_lattice(const SceneSpec& scene, const fs::path& dir, Json& m) {
  const auto& l = *scene.lattice;
  const auto matrix = build_lattice(l.matrix);
  std::vector<std::vector<Atom>> particles;
  for (const auto& p : l.particles) particles.push_back(build_particle(p));
  const auto comp = assemble(matrix, particles, l.placements, l.clearance, l.max_atoms);
  std::size_t particle_atoms = comp.atoms.size() - comp.matrix_kept;
  write_xyz(comp.atoms, (dir / "atoms.xyz").string(),
            "composite matrix=" + std::to_string(comp.matrix_kept) + " removed=" +
                std::to_string(comp.matrix_removed) + " particle_atoms=" + std::to_string(particle_atoms));
  m["artifacts"].push_back("atoms.xyz");
  Json per = Json::array();
  for (const auto& p : particles) per.push_back(p.size());
  m["stats"] = {{"atoms", comp.atoms.size()},
                {"matrix_atoms", matrix.size()},
                {"matrix_kept", comp.matrix_kept},
                {"matrix_removed", comp.matrix_removed},
                {"particle_atoms", particle_atoms},
                {"atoms_per_particle", per},
                {"placements", l.placements.size()}};
}

}  // namespace

void prepare_run(const SceneSpec& scene, const fs::path& root) {
  const std::string id = scene_id(scene);
  const fs::path dir = root / id;
  fs::create_directories(dir);
  write_file_atomic(dir / "scene.json", scene_to_json(scene).dump(2) + "\n");
  write_manifest(dir, base_manifest(scene, id));
}

Json run_scene(const SceneSpec& scene, const fs::path& root, const std::function<void(double)>& progress) {
  const std::string id = scene_id(scene);
  const fs::path dir = root / id;
  fs::create_directories(dir);
  write_file_atomic(dir / "scene.json", scene_to_json(scene).dump(2) + "\n");
  Json m = base_manifest(scene, id);
  m["status"] = "running";
  write_manifest(dir, m);

  const auto start = std::chrono::steady_clock::now();
  double last = 0.0;
  auto report = [&](double frac) {
    if (progress) progress(frac);
    if (frac >= last + 0.02 && frac < 1.0) {
      last = frac;
      Json live = m;
      live["progress"] = std::round(frac * 1000.0) / 1000.0;
      write_manifest(dir, live);
    }
  };

  try {
    if (scene.kind == SceneKind::meso_simulation) {
      run_meso(scene, dir, m, report);
    } else {
      run_lattice(scene, dir, m);
    }
    m["status"] = "done";
    m["progress"] = 1.0;
  } catch (const std::exception& e) {
    m["status"] = "failed";
    m["error"] = error_json(e);
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  m["wall_time_s"] = std::round(wall * 1000.0) / 1000.0;
  write_manifest(dir, m);
  return m;
}

JobQueue::JobQueue(fs::path root, int workers) : root_(std::move(root)) {
  if (workers < 1) throw InvalidArgument("job queue needs at least one worker");
  fs::create_directories(root_);
  for (int k = 0; k < workers; ++k) threads_.emplace_back([this] { worker(); });
}

JobQueue::~JobQueue() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  for (auto& t : threads_) t.join();
}

std::string JobQueue::submit(const SceneSpec& scene) {
  const std::string id = scene_id(scene);
  std::lock_guard lock(mu_);
  const auto it = state_.find(id);
  if (it != state_.end() && it->second != "failed") return id;
  if (it == state_.end()) {
    std::error_code ec;
    if (fs::exists(root_ / id / "manifest.json", ec)) {
      try {
        if (read_manifest(root_ / id).value("status", "") == "done") {
          state_[id] = "done";
          return id;
        }
      } catch (const std::exception&) {
      }
    }
  }
  prepare_run(scene, root_);
  state_[id] = "queued";
  pending_.emplace_back(id, scene);
  cv_.notify_one();
  return id;
}

bool JobQueue::wait(const std::string& id) {
  std::unique_lock lock(mu_);
  if (!state_.count(id)) return fs::exists(root_ / id / "manifest.json");
  done_cv_.wait(lock, [&] { return state_[id] == "done" || state_[id] == "failed"; });
  return true;
}

void JobQueue::worker() {
  for (;;) {
    std::pair<std::string, SceneSpec> job;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return stop_ || !pending_.empty(); });
      if (stop_) return;
      job = std::move(pending_.front());
      pending_.pop_front();
      state_[job.first] = "running";
    }
    std::string status = "failed";
    try {
      status = run_scene(job.second, root_).value("status", "failed");
    } catch (const std::exception&) {
    }
    {
      std::lock_guard lock(mu_);
      state_[job.first] = status;
    }
    done_cv_.notify_all();
  }
}

}  // namespace nanowb
