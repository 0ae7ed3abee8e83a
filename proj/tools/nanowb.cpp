// nanowb command-line tool: scenes, lattices, simulation runs, post-processing and
// the HTTP service. Exit codes: 0 success, 1 usage or validation error, 2 runtime failure.

#include "nanowb/errors.hpp"
#include "nanowb/lattice.hpp"
#include "nanowb/mesogen.hpp"
#include "nanowb/runner.hpp"
#include "nanowb/scene.hpp"
#include "nanowb/service.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <iostream>

using namespace nanowb;

namespace {

struct Usage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Json load_json(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ValidationError({{"", std::string("invalid JSON: ") + e.what()}});
  }
}

const Json* find_manifest_frame(const Json& manifest, const std::string& field, int frame) {
  const Json* pick = nullptr;
  for (const auto& f : manifest["frames"]) {
    if (f.value("field", "") != field) continue;
    if (frame < 0 ? (!pick || f.value("index", 0) >= pick->value("index", 0)) : f.value("index", -1) == frame)
      pick = &f;
  }
  return pick;
}

FieldFrame load_run_frame(const fs::path& run_dir, const std::string& field, int frame) {
  const Json m = read_manifest(run_dir);
  if (m.value("status", "") != "done") throw Usage("run is not done (status " + m.value("status", "?") + ")");
  const Json* pick = find_manifest_frame(m, field, frame);
  if (!pick) throw Usage("run has no frame for field '" + field + "'");
  return read_field_csv((run_dir / pick->value("file", "")).string());
}

int cmd_scene_validate(const std::string& file, bool print) {
  const SceneSpec scene = load_scene(file);
  if (print) std::cout << scene_to_json(scene).dump(2) << "\n";
  std::cout << "valid " << to_string(scene.kind) << " scene " << scene_id(scene) << "\n";
  return 0;
}

int cmd_lattice_build(const std::string& spec_file, const std::string& out) {
  const Json doc = load_json(spec_file);
  std::vector<Atom> atoms;
  std::string comment;
  if (doc.is_object() && doc.contains("shape")) {
    const ParticleSpec p = parse_particle_spec(doc);
    atoms = build_particle(p);
    comment = to_string(p.shape) + " particle";
  } else {
    const LatticeSpec s = parse_lattice_spec(doc);
    atoms = build_lattice(s);
    comment = to_string(s.kind) + " a=" + doc.value("a", Json(0.0)).dump() + " extents=" +
              std::to_string(s.repeats[0]) + "x" + std::to_string(s.repeats[1]) + "x" + std::to_string(s.repeats[2]);
  }
  write_xyz(atoms, out, comment);
  std::cout << out << "\n";
  std::cerr << atoms.size() << " atoms\n";
  return 0;
}

int cmd_composite(const std::string& file, const std::string& out) {
  const SceneSpec scene = load_scene(file);
  if (!scene.lattice) throw Usage("scene has no lattice section");
  const auto& l = *scene.lattice;
  const auto matrix = build_lattice(l.matrix);
  std::vector<std::vector<Atom>> particles;
  for (const auto& p : l.particles) particles.push_back(build_particle(p));
  const auto comp = assemble(matrix, particles, l.placements, l.clearance, l.max_atoms);
  write_xyz(comp.atoms, out,
            "composite matrix=" + std::to_string(comp.matrix_kept) + " removed=" +
                std::to_string(comp.matrix_removed) + " particle_atoms=" +
                std::to_string(comp.atoms.size() - comp.matrix_kept));
  std::cout << out << "\n";
  std::cerr << comp.atoms.size() << " atoms (" << comp.matrix_kept << " matrix kept, " << comp.matrix_removed
            << " removed)\n";
  return 0;
}

int cmd_meso_gen(const std::string& file, const std::string& out, const std::string& png) {
  const SceneSpec scene = load_scene(file);
  if (!scene.meso) throw Usage("scene has no meso section");
  const auto& m = *scene.meso;
  const Grid2D grid = build_grid(m.grid.nx, m.grid.ny, m.grid.width, m.grid.height);
  const GrainMap grains = make_grains(m, grid);
  const FieldFrame f = grain_frame(grid, grains);
  export_field_csv(f, out);
  std::cout << out << "\n";
  if (!png.empty()) {
    FieldFrame y = f;
    y.name = "yield_factor";
    for (std::size_t c = 0; c < y.values.size(); ++c) y.values[c] = grains.yield_factor[grains.grain_id[c]];
    export_field_png(y, png);
    std::cout << png << "\n";
  }
  const auto st = grain_statistics(grid, grains);
  std::fprintf(stderr, "%d grains, mean diameter %.3f um, median aspect %.3f\n", st.count, st.mean_diameter,
               st.median_aspect);
  return 0;
}

int cmd_sim_run(const std::string& file, const std::string& out, bool quiet) {
  const SceneSpec scene = load_scene(file);
  int last = -1;
  const Json m = run_scene(scene, out, [&](double f) {
    const int pct = static_cast<int>(f * 100.0);
    if (!quiet && pct / 5 != last / 5) {
      std::fprintf(stderr, "\r%3d%%", pct);
      std::fflush(stderr);
      last = pct;
    }
  });
  if (!quiet) std::fprintf(stderr, "\n");
  const fs::path dir = fs::path(out) / m.value("run_id", "");
  if (m.value("status", "") != "done") {
    std::cerr << "run failed: " << m["error"].dump() << "\n";
    std::cout << dir.string() << "\n";
    return 2;
  }
  std::cout << dir.string() << "\n";
  std::cout << (dir / "manifest.json").string() << "\n";
  for (const auto& f : m["frames"]) std::cout << (dir / f.value("file", "")).string() << "\n";
  for (const auto& a : m["artifacts"]) std::cout << (dir / a.get<std::string>()).string() << "\n";
  for (const auto& w : m["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
  return 0;
}

int cmd_post_bands(const std::string& run_dir, double threshold, int min_cells, bool json) {
  const FieldFrame f = load_run_frame(run_dir, "eq_plastic", -1);
  BandOptions opt;
  opt.threshold_factor = threshold;
  opt.min_cells = min_cells;
  const auto bands = detect_bands(f, opt);
  if (json) {
    std::cout << bands_to_json(bands, f, opt).dump(2) << "\n";
    return 0;
  }
  std::printf("field mean %.6g  max %.6g  threshold %.6g\n", mean_value(f), max_value(f),
              threshold * mean_value(f));
  std::printf("%4s %7s %9s %9s %9s %9s %9s\n", "band", "cells", "angle", "width", "length", "peak", "mean");
  for (std::size_t k = 0; k < bands.size(); ++k) {
    const auto& b = bands[k];
    std::printf("%4zu %7zu %9.2f %9.4f %9.4f %9.5f %9.5f\n", k, b.cells.size(), b.angle_deg, b.width, b.length,
                b.peak, b.mean);
  }
  return 0;
}

int cmd_post_plot(const std::string& run_dir, const std::string& field, int frame, const std::string& out,
                  int scale) {
  const FieldFrame f = load_run_frame(run_dir, field, frame);
  export_field_png(f, out, scale);
  std::cout << out << "\n";
  return 0;
}

Service* g_service = nullptr;
void on_signal(int) {
  if (g_service) g_service->stop();
}

int cmd_serve(int port, const std::string& data, const std::string& host, int workers) {
  Service svc(data, workers);
  g_service = &svc;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "serving http://" << host << ":" << port << "/api/v1 (data " << data << ")" << std::endl;
  const bool ok = svc.listen(host, port);
  g_service = nullptr;
  if (!ok) {
    std::cerr << "could not listen on " << host << ":" << port << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nanowb: mesoscale plasticity solver and nanocomposite workbench"};
  app.require_subcommand(1);

  auto* scene = app.add_subcommand("scene", "Scene documents")->require_subcommand(1);
  auto* validate = scene->add_subcommand("validate", "Validate a scene file");
  std::string scene_file;
  bool print_scene = false;
  validate->add_option("file", scene_file, "Scene JSON")->required();
  validate->add_flag("--print", print_scene, "Print the normalized scene");

  auto* lattice = app.add_subcommand("lattice", "Crystal lattices")->require_subcommand(1);
  auto* lbuild = lattice->add_subcommand("build", "Build a lattice or particle from a JSON spec");
  std::string spec_file, out;
  lbuild->add_option("spec", spec_file, "Lattice or particle spec JSON")->required();
  lbuild->add_option("-o,--output", out, "Output XYZ file")->required();

  auto* composite = app.add_subcommand("composite", "Nanocomposites")->require_subcommand(1);
  auto* assemble_cmd = composite->add_subcommand("assemble", "Assemble a lattice-composite scene");
  assemble_cmd->add_option("scene", scene_file, "Scene JSON")->required();
  assemble_cmd->add_option("-o,--output", out, "Output XYZ file")->required();

  auto* meso = app.add_subcommand("meso", "Mesovolume microstructure")->require_subcommand(1);
  auto* gen = meso->add_subcommand("gen", "Generate the grain map of a meso scene");
  std::string png;
  gen->add_option("scene", scene_file, "Scene JSON")->required();
  gen->add_option("-o,--output", out, "Output grain-id CSV")->required();
  gen->add_option("--png", png, "Also render the yield-factor map");

  auto* sim = app.add_subcommand("sim", "Simulation runs")->require_subcommand(1);
  auto* run_cmd = sim->add_subcommand("run", "Run a scene into <dir>/<run_id>");
  bool quiet = false;
  run_cmd->add_option("scene", scene_file, "Scene JSON")->required();
  run_cmd->add_option("-o,--output", out, "Runs directory")->required();
  run_cmd->add_flag("-q,--quiet", quiet, "No progress output");

  auto* post = app.add_subcommand("post", "Post-processing of run directories")->require_subcommand(1);
  auto* bands = post->add_subcommand("bands", "Detect localization bands in the final eq_plastic frame");
  std::string run_dir;
  double threshold = 3.0;
  int min_cells = 10;
  bool as_json = false;
  bands->add_option("run", run_dir, "Run directory")->required();
  bands->add_option("--threshold", threshold, "Threshold as a multiple of the mean")->check(CLI::PositiveNumber);
  bands->add_option("--min-cells", min_cells, "Minimum cells per band")->check(CLI::PositiveNumber);
  bands->add_flag("--json", as_json, "Print JSON instead of a table");
  auto* plot = post->add_subcommand("plot", "Render a field frame to PNG");
  std::string field = "eq_plastic";
  int frame = -1, scale = 0;
  plot->add_option("run", run_dir, "Run directory")->required();
  plot->add_option("--field", field, "Field name");
  plot->add_option("--frame", frame, "Frame index (default: last)");
  plot->add_option("--scale", scale, "Pixels per cell (default: auto)");
  plot->add_option("-o,--output", out, "Output PNG")->required();

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  int port = 8080, workers = 1;
  std::string data = "data", host = "127.0.0.1";
  serve->add_option("--port", port, "TCP port")->check(CLI::Range(1, 65535));
  serve->add_option("--data", data, "Data directory");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--workers", workers, "Job worker threads")->check(CLI::Range(1, 64));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (validate->parsed()) return cmd_scene_validate(scene_file, print_scene);
    if (lbuild->parsed()) return cmd_lattice_build(spec_file, out);
    if (assemble_cmd->parsed()) return cmd_composite(scene_file, out);
    if (gen->parsed()) return cmd_meso_gen(scene_file, out, png);
    if (run_cmd->parsed()) return cmd_sim_run(scene_file, out, quiet);
    if (bands->parsed()) return cmd_post_bands(run_dir, threshold, min_cells, as_json);
    if (plot->parsed()) return cmd_post_plot(run_dir, field, frame, out, scale);
    if (serve->parsed()) return cmd_serve(port, data, host, workers);
  } catch (const ValidationError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const Usage& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::cerr << app.help();
  return 1;
}
