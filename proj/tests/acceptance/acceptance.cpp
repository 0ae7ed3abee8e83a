// Acceptance suite: one PASS/FAIL line per headline criterion. Exit code is the
// number of failed criteria.

#include "../common/scenarios.hpp"
#include "nanowb/errors.hpp"
#include "nanowb/lattice.hpp"
#include "nanowb/recovery.hpp"
#include "nanowb/runner.hpp"
#include "nanowb/service.hpp"

#include <httplib.h>
#include <unistd.h>

#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>

using namespace nanowb;

namespace {

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

// Runs a criterion, turning any exception into a FAIL line.
void criterion(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
  try {
    const auto [ok, detail] = body();
    report(name, ok, detail);
  } catch (const std::exception& e) {
    report(name, false, std::string("exception: ") + e.what());
  }
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Scratch {
  fs::path path;
  explicit Scratch(const std::string& tag) {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("nanowb_accept_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string scene_path(const std::string& name) { return std::string(NANOWB_SCENES_DIR) + "/" + name; }

// Every artifact of a run, by relative path: SHA-256 of the bytes (manifest without wall time).
std::map<std::string, std::string> artifact_hashes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).generic_string();
    if (rel == "manifest.json") {
      Json m = read_manifest(dir);
      m.erase("wall_time_s");
      out[rel] = sha256_hex(m.dump());
    } else {
      out[rel] = sha256_hex(read_file(e.path()));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

struct MesoRun {
  Json manifest;
  Json bands;
  std::map<std::string, std::string> hashes;
};

MesoRun run_mesovolume(const fs::path& root) {
  const SceneSpec scene = load_scene(scene_path("mesovolume.json"));
  MesoRun r;
  r.manifest = run_scene(scene, root);
  const fs::path dir = root / scene_id(scene);
  if (r.manifest.value("status", "") != "done") throw Error("mesovolume run failed: " + r.manifest["error"].dump());
  r.bands = Json::parse(read_file(dir / "bands.json"));
  r.hashes = artifact_hashes(dir);
  return r;
}

void mesovolume_criteria(const MesoRun& run) {
  const Json& stats = run.manifest["stats"];
  const Json& summary = run.bands["summary"];
  const int count = summary.value("count", 0);
  const double wall = run.manifest["wall_time_s"].get<double>();
  const double peak = stats["max_eq_plastic"].get<double>();
  const double mean = stats["mean_eq_plastic"].get<double>();

  criterion("mesovolume (a) band angle", [&] {
    if (count == 0) return std::make_pair(false, std::string("no bands detected"));
    const double angle = summary["mean_angle_deg"].get<double>();
    return std::make_pair(angle >= 35.0 && angle <= 55.0,
                          fmt("%d bands, mean acute angle to load axis %.2f deg (need 35..55); %d grains, mean "
                              "diameter %.2f um",
                              count, angle, stats["grains"].get<int>(), stats["mean_grain_diameter"].get<double>()));
  });
  criterion("mesovolume (b) localization", [&] {
    return std::make_pair(peak >= 0.10 && peak >= 10.0 * mean,
                          fmt("max eq_plastic %.4f (need >= 0.10), mean %.5f, ratio %.1f (need >= 10)", peak, mean,
                              peak / mean));
  });
  criterion("mesovolume (c) band width", [&] {
    if (count == 0) return std::make_pair(false, std::string("no bands detected"));
    const double width = summary["median_width"].get<double>();
    return std::make_pair(width >= 0.3 && width <= 1.6,
                          fmt("median band width %.3f um (need 0.3..1.6)", width));
  });
  criterion("mesovolume runtime", [&] {
    return std::make_pair(wall <= 600.0, fmt("%.1f s for %ld steps (need <= 600 s)", wall,
                                             stats["steps"].get<long>()));
  });
  criterion("energy ledger", [&] {
    const Json& e = stats["energy"];
    const double w = e["external_work"].get<double>(), mis = e["mismatch"].get<double>();
    return std::make_pair(w > 0.0 && std::abs(mis) <= 0.01 * w,
                          fmt("external work %.6g, mismatch %.3g (%.2e of W, need <= 1e-2); plastic %.6g, "
                              "kinetic %.3g, elastic %.6g, viscous %.3g",
                              w, mis, std::abs(mis) / w, e["plastic"].get<double>(), e["kinetic"].get<double>(),
                              e["elastic"].get<double>(), e["viscous"].get<double>()));
  });
}

// ---------------------------------------------------------------------------

std::pair<bool, std::string> patch_criterion() {
  const auto r = scenarios::elastic_patch(10, 10);
  return {r.max_deviation <= 1e-6 && r.max_eq_plastic == 0.0,
          fmt("max relative deviation %.2e (need <= 1e-6), max eq_plastic %.1e (need 0), von Mises %.5f GPa",
              r.max_deviation, r.max_eq_plastic, r.von_mises)};
}

std::pair<bool, std::string> wave_criterion() {
  const auto r = scenarios::wave_speed(100, 4);
  const double err = r.measured / r.expected - 1.0;
  return {std::abs(err) <= 0.03 && r.seconds <= 10.0,
          fmt("front speed %.5f um/us vs %.5f (%+.2f%%, need within 3%%), %.3f s (need <= 10 s)", r.measured,
              r.expected, 100.0 * err, r.seconds)};
}

std::pair<bool, std::string> constitutive_criterion() {
  std::vector<std::pair<std::string, SimulationSetup>> runs = {
      {"plane-strain", scenarios::grained_tension(StressMode::plane_strain)},
      {"plane-stress", scenarios::grained_tension(StressMode::plane_stress)},
      {"hardening", scenarios::grained_tension(StressMode::plane_strain, 2.0)},
      {"mesovolume", make_setup(load_scene(scene_path("mesovolume.json")))},
  };
  bool ok = true;
  double ratio = 0.0, trace = 0.0, cosine = 1.0;
  long updates = 0, steps = 0;
  for (const auto& [name, setup] : runs) {
    const auto r = scenarios::admissibility(setup);
    ok = ok && r.plastic_updates > 0;
    ratio = std::max(ratio, r.max_vm_ratio);
    trace = std::max(trace, r.max_trace);
    cosine = std::min(cosine, r.min_cosine);
    updates += r.plastic_updates;
    steps += r.steps;
  }
  const double sub1 = scenarios::shear_substep_error(1), sub10 = scenarios::shear_substep_error(10);
  ok = ok && ratio <= 1.0 + 1e-8 && trace <= 1e-12 && cosine >= 1.0 - 1e-10 && sub1 <= 1e-3 && sub10 <= 1e-3;
  return {ok, fmt("%zu runs, %ld steps, %ld plastic updates: max vM/yield - 1 = %.1e (need <= 1e-8), max |tr "
                  "deps_p| %.1e (need <= 1e-12), 1 - min cosine %.1e (need <= 1e-10); single-cell shear vs 1000 "
                  "sub-steps %.1e / %.1e (1 / 10 steps, need <= 1e-3)",
                  runs.size(), steps, updates, ratio - 1.0, trace, 1.0 - cosine, sub1, sub10)};
}

std::pair<bool, std::string> objectivity_criterion() {
  const auto r = scenarios::rigid_rotation(1000.0);
  return {r.max_vm_change <= 0.01, fmt("max per-cell von Mises change %.2e (need <= 1e-2), deviator error after "
                                       "90 deg %.2e, %ld steps",
                                       r.max_vm_change, r.max_tensor_error, r.steps)};
}

std::pair<bool, std::string> mls_criterion() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> ux(0.0, 4.0), uy(0.0, 3.0);
  using F = std::function<std::array<double, 3>(Vec2)>;
  const std::pair<const char*, F> fields[] = {
      {"constant", [](Vec2) { return std::array<double, 3>{0.25, -0.4, 0.1}; }},
      {"linear", [](Vec2 p) { return std::array<double, 3>{0.3 * p.x - 0.2 * p.y, 1.0 + 0.5 * p.y, -0.1 * p.x}; }},
      {"quadratic",
       [](Vec2 p) {
         return std::array<double, 3>{1.0 + 0.3 * p.x - 1.7 * p.y + 0.9 * p.x * p.y, -1.7 * p.y * p.y + 0.2,
                                      0.9 * p.x * p.x - 0.4 * p.x * p.y + 0.5};
       }},
  };
  double worst = 0.0;
  for (const auto& [name, f] : fields) {
    std::vector<StressSample> samples;
    for (int k = 0; k < 400; ++k) {
      const Vec2 p{ux(rng), uy(rng)};
      const auto s = f(p);
      samples.push_back({p, s[0], s[1], s[2]});
    }
    StressRecovery rec(samples, {}, {0.6});
    for (int k = 0; k < 200; ++k) {
      const Vec2 q{0.3 + 3.4 * (k % 20) / 19.0, 0.3 + 2.4 * (k / 20) / 9.0};
      const auto want = f(q);
      const auto got = rec.evaluate(q);
      const double scale = std::max({std::abs(want[0]), std::abs(want[1]), std::abs(want[2])});
      worst = std::max({worst, std::abs(got.xx - want[0]) / scale, std::abs(got.yy - want[1]) / scale,
                        std::abs(got.xy - want[2]) / scale});
    }
  }

  // Boundary queries against a non-polynomial field with known traction on the left edge.
  const auto g = [](Vec2 p) {
    return std::array<double, 3>{1.0 + 0.4 * std::sin(1.3 * p.x) * std::cos(0.7 * p.y), 0.3 * std::cos(p.x + p.y),
                                 0.2 * std::sin(0.9 * p.y) * std::exp(-0.5 * p.x)};
  };
  std::vector<StressSample> samples;
  for (int j = 0; j < 12; ++j)
    for (int i = 0; i < 12; ++i) {
      const Vec2 p{(i + 0.5) * 0.25, (j + 0.5) * 0.25};
      const auto s = g(p);
      samples.push_back({p, s[0], s[1], s[2]});
    }
  std::vector<TractionSample> tractions;
  for (int j = 0; j < 12; ++j) {
    const Vec2 p{0.0, (j + 0.5) * 0.25};
    const auto s = g(p);
    tractions.push_back({p, {-1.0, 0.0}, {-s[0], -s[2]}});
  }
  StressRecovery rec(samples, tractions, {0.8});
  double traction_err = 0.0;
  for (const auto& t : tractions) {
    const auto r = rec.evaluate(t.x);
    const double res = std::hypot(-r.xx - t.traction.x, -r.xy - t.traction.y);
    traction_err = std::max(traction_err, res / std::hypot(t.traction.x, t.traction.y));
  }
  return {worst <= 1e-8 && traction_err <= 0.01,
          fmt("constant/linear/quadratic max relative error %.2e (need <= 1e-8); boundary traction residual "
              "%.2e (need <= 1e-2)",
              worst, traction_err)};
}

LatticeSpec cubic(LatticeKind kind, double a, const std::string& species, int n) {
  LatticeSpec s;
  s.kind = kind;
  s.a = a;
  s.species = species;
  s.repeats = {n, n, n};
  return s;
}

std::pair<bool, std::string> lattice_criterion() {
  const std::size_t sc = build_lattice(cubic(LatticeKind::sc, 3.0, "X", 1)).size();
  const std::size_t bcc = build_lattice(cubic(LatticeKind::bcc, 2.87, "Fe", 1)).size();
  const std::size_t fcc1 = build_lattice(cubic(LatticeKind::fcc, 4.05, "Al", 1)).size();
  const std::size_t dia = build_lattice(cubic(LatticeKind::diamond, 3.567, "C", 1)).size();
  const std::size_t fcc3 = build_lattice(cubic(LatticeKind::fcc, 4.05, "Al", 3)).size();

  ParticleSpec ball;
  ball.shape = ParticleShape::fullerene;
  ball.radius = 3.55;
  const auto c60 = build_particle(ball);
  double radius_err = 0.0;
  for (const auto& a : c60)
    radius_err = std::max(radius_err, std::abs(std::sqrt(a.r.x * a.r.x + a.r.y * a.r.y + a.r.z * a.r.z) - 3.55));

  // Sphere embedded in a small fcc block, checked against every matrix/particle pair.
  const auto matrix = build_lattice(cubic(LatticeKind::fcc, 4.05, "Al", 6));
  ParticleSpec sphere;
  sphere.shape = ParticleShape::sphere;
  sphere.lattice = cubic(LatticeKind::diamond, 3.567, "C", 1);
  sphere.radius = 5.0;
  const auto particle = build_particle(sphere);
  Placement pl;
  pl.translation = {12.45, 11.95, 12.25};
  const double clearance = 2.0;
  const auto comp = assemble(matrix, {particle}, {pl}, clearance);
  std::size_t oracle = 0;
  for (const auto& m : matrix) {
    bool hit = false;
    for (const auto& p : particle) {
      const double dx = m.r.x - (p.r.x + pl.translation.x), dy = m.r.y - (p.r.y + pl.translation.y),
                   dz = m.r.z - (p.r.z + pl.translation.z);
      hit = hit || dx * dx + dy * dy + dz * dz < clearance * clearance;
    }
    oracle += hit;
  }
  const bool ok = sc == 1 && bcc == 2 && fcc1 == 4 && dia == 8 && fcc3 == 108 && c60.size() == 60 &&
                  radius_err <= 1e-9 && comp.matrix_removed == oracle && oracle > 0;
  return {ok, fmt("sc/bcc/fcc/diamond %zu/%zu/%zu/%zu, fcc 3x3x3 %zu, fullerene %zu atoms (radius error %.1e), "
                  "embedding removed %zu vs all-pairs %zu",
                  sc, bcc, fcc1, dia, fcc3, c60.size(), radius_err, comp.matrix_removed, oracle)};
}

std::pair<bool, std::string> determinism_criterion(const MesoRun& first, const fs::path& second_root) {
  const MesoRun second = run_mesovolume(second_root);
  bool ok = first.hashes == second.hashes;
  std::size_t files = first.hashes.size();
  std::string diff;
  for (const auto& [f, h] : first.hashes) {
    const auto it = second.hashes.find(f);
    if (it == second.hashes.end() || it->second != h) diff += " " + f;
  }
  for (const char* name : {"small_meso.json", "composite.json"}) {
    const SceneSpec scene = load_scene(scene_path(name));
    Scratch a("det"), b("det");
    const Json ma = run_scene(scene, a.path), mb = run_scene(scene, b.path);
    const auto ha = artifact_hashes(a.path / scene_id(scene)), hb = artifact_hashes(b.path / scene_id(scene));
    ok = ok && ma["status"] == "done" && ha == hb;
    if (ha != hb) diff += std::string(" ") + name;
    files += ha.size();
  }
  return {ok, fmt("%zu artifacts over 3 scenes re-run, SHA-256 identical (manifest compared without wall time)%s",
                  files, diff.empty() ? "" : ("; differing:" + diff).c_str())};
}

std::pair<bool, std::string> api_criterion() {
  Scratch data("api");
  Service service(data.path);
  const int port = service.start_background();
  httplib::Client client("127.0.0.1", port);
  std::ostringstream log;
  bool ok = true;

  const auto missing = client.Get("/api/v1/jobs/0123456789abcdef");
  const bool not_found = missing && missing->status == 404 && Json::parse(missing->body).contains("error");
  log << "GET unknown job -> " << (missing ? missing->status : -1);
  ok = ok && not_found;

  Json bad = Json::parse(read_file(scene_path("small_meso.json")));
  bad["meso"]["grains"]["delta"] = 1.5;
  bad["meso"]["schedule"]["frames"] = 0;
  bad["unexpected"] = 1;
  const auto invalid = client.Post("/api/v1/scenes", bad.dump(), "application/json");
  std::set<std::string> paths;
  if (invalid && invalid->status == 422) {
    const Json body = Json::parse(invalid->body);
    for (const auto& e : body["errors"]) paths.insert(e["path"].get<std::string>());
  }
  const bool all_listed = paths == std::set<std::string>{"/meso/grains/delta", "/meso/schedule/frames", "/unexpected"};
  log << "; POST invalid scene -> " << (invalid ? invalid->status : -1) << " with " << paths.size() << "/3 errors";
  ok = ok && all_listed;

  const auto preview = client.Post("/api/v1/lattice/preview", read_file(scene_path("fcc.json")), "application/json");
  const std::size_t atoms =
      preview && preview->status == 200 ? Json::parse(preview->body)["atoms"].size() : std::size_t{0};
  log << "; preview fcc 3x3x3 -> " << (preview ? preview->status : -1) << " with " << atoms << " atoms";
  ok = ok && atoms == 108;

  const auto capped = client.Post("/api/v1/lattice/preview", R"({"kind": "fcc", "a": 4.05, "extents": [24, 24, 24]})",
                                  "application/json");
  log << "; oversize preview -> " << (capped ? capped->status : -1);
  ok = ok && capped && capped->status == 413;

  const auto created = client.Post("/api/v1/scenes", read_file(scene_path("composite.json")), "application/json");
  ok = ok && created && created->status == 201;
  if (created && created->status == 201) {
    const std::string sid = Json::parse(created->body)["scene_id"];
    const auto job = client.Post("/api/v1/jobs", Json{{"scene_id", sid}}.dump(), "application/json");
    ok = ok && job && job->status == 202;
    service.queue().wait(sid);
    const auto m = client.Get("/api/v1/jobs/" + sid);
    const bool done = m && m->status == 200 && Json::parse(m->body)["status"] == "done";
    log << "; composite job -> " << (done ? "done" : "not done");
    ok = ok && done;
  }
  service.stop();
  return {ok, log.str()};
}

}  // namespace

int main() {
  std::printf("nanowb acceptance suite\n");
  std::fflush(stdout);

  Scratch meso_a("meso"), meso_b("meso");
  std::optional<MesoRun> meso;
  try {
    meso = run_mesovolume(meso_a.path);
  } catch (const std::exception& e) {
    for (const char* n : {"mesovolume (a) band angle", "mesovolume (b) localization", "mesovolume (c) band width",
                          "mesovolume runtime", "energy ledger"})
      report(n, false, std::string("exception: ") + e.what());
  }
  if (meso) mesovolume_criteria(*meso);

  criterion("elastic patch", patch_criterion);
  criterion("wave speed", wave_criterion);
  criterion("constitutive", constitutive_criterion);
  criterion("objectivity", objectivity_criterion);
  criterion("MLS recovery", mls_criterion);
  criterion("lattice counts", lattice_criterion);
  criterion("determinism", [&]() -> std::pair<bool, std::string> {
    if (!meso) return {false, "mesovolume run unavailable"};
    return determinism_criterion(*meso, meso_b.path);
  });
  criterion("API contract", api_criterion);

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
