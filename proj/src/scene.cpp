#include "nanowb/scene.hpp"

#include "nanowb/errors.hpp"
#include "nanowb/mesogen.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace nanowb {
namespace {

std::string pointer_token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

struct Range {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool lo_open = false;
  bool hi_open = false;

  bool contains(double v) const {
    if (!std::isfinite(v)) return false;
    if (lo_open ? !(v > lo) : !(v >= lo)) return false;
    if (hi_open ? !(v < hi) : !(v <= hi)) return false;
    return true;
  }
  std::string describe() const {
    const std::string l = std::isinf(lo) ? "(-inf" : (lo_open ? "(" : "[") + fmt(lo);
    const std::string h = std::isinf(hi) ? "inf)" : fmt(hi) + (hi_open ? ")" : "]");
    return l + ", " + h;
  }
};

constexpr double kInf = std::numeric_limits<double>::infinity();
Range positive() { return {0.0, kInf, true, false}; }
Range non_negative() { return {0.0, kInf, false, false}; }
Range closed(double lo, double hi) { return {lo, hi, false, false}; }

class Issues {
 public:
  void add(const std::string& path, const std::string& message) { list.push_back({path, message}); }
  std::vector<ValidationIssue> list;
};

// Reads one JSON object, tracking which keys were consumed so leftovers can be flagged.
class ObjectReader {
 public:
  ObjectReader(Issues& issues, const Json* j, std::string path) : issues_(issues), j_(j), path_(std::move(path)) {
    if (j_ && !j_->is_object()) {
      issues_.add(path_, "must be an object");
      j_ = nullptr;
    }
  }
  ~ObjectReader() { finish(); }
  ObjectReader(const ObjectReader&) = delete;
  ObjectReader& operator=(const ObjectReader&) = delete;

  bool valid() const { return j_ != nullptr; }
  const std::string& path() const { return path_; }
  std::string at(const std::string& key) const { return path_ + "/" + pointer_token(key); }

  const Json* child(const std::string& key) {
    seen_.insert(key);
    if (!j_) return nullptr;
    const auto it = j_->find(key);
    if (it == j_->end() || it->is_null()) return nullptr;
    return &*it;
  }
  bool has(const std::string& key) const { return j_ && j_->contains(key) && !(*j_)[key].is_null(); }

  double number(const std::string& key, std::optional<double> def, Range range) {
    const Json* v = child(key);
    if (!v) {
      if (!def && j_) issues_.add(at(key), "is required");
      return def.value_or(0.0);
    }
    if (!v->is_number()) {
      issues_.add(at(key), "must be a number");
      return def.value_or(0.0);
    }
    const double d = v->get<double>();
    if (!range.contains(d)) issues_.add(at(key), "must be in " + range.describe() + ", got " + fmt(d));
    return d;
  }

  long long integer(const std::string& key, std::optional<long long> def, long long lo, long long hi) {
    const Json* v = child(key);
    if (!v) {
      if (!def && j_) issues_.add(at(key), "is required");
      return def.value_or(lo);
    }
    long long out = 0;
    if (v->is_number_integer()) {
      out = v->get<long long>();
    } else if (v->is_number_float() && std::floor(v->get<double>()) == v->get<double>() &&
               std::abs(v->get<double>()) < 9e15) {
      out = static_cast<long long>(v->get<double>());
    } else {
      issues_.add(at(key), "must be an integer");
      return def.value_or(lo);
    }
    if (out < lo || out > hi) {
      issues_.add(at(key), "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "], got " +
                               std::to_string(out));
    }
    return out;
  }

  bool boolean(const std::string& key, bool def) {
    const Json* v = child(key);
    if (!v) return def;
    if (!v->is_boolean()) {
      issues_.add(at(key), "must be true or false");
      return def;
    }
    return v->get<bool>();
  }

  std::string string(const std::string& key, std::optional<std::string> def,
                     const std::vector<std::string>& allowed = {}) {
    const Json* v = child(key);
    if (!v) {
      if (!def && j_) issues_.add(at(key), "is required");
      return def.value_or("");
    }
    if (!v->is_string()) {
      issues_.add(at(key), "must be a string");
      return def.value_or("");
    }
    std::string s = v->get<std::string>();
    if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), s) == allowed.end()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      issues_.add(at(key), "must be one of " + list + ", got '" + s + "'");
    }
    return s;
  }

  std::vector<double> numbers(const std::string& key, std::optional<std::vector<double>> def, std::size_t size) {
    const Json* v = child(key);
    if (!v) {
      if (!def && j_) issues_.add(at(key), "is required");
      return def.value_or(std::vector<double>(size, 0.0));
    }
    if (!v->is_array() || v->size() != size) {
      issues_.add(at(key), "must be an array of " + std::to_string(size) + " numbers");
      return def.value_or(std::vector<double>(size, 0.0));
    }
    std::vector<double> out;
    for (std::size_t k = 0; k < size; ++k) {
      if (!(*v)[k].is_number() || !std::isfinite((*v)[k].get<double>())) {
        issues_.add(at(key) + "/" + std::to_string(k), "must be a finite number");
        out.push_back(0.0);
      } else {
        out.push_back((*v)[k].get<double>());
      }
    }
    return out;
  }

 private:
  void finish() {
    if (!j_) return;
    for (auto it = j_->begin(); it != j_->end(); ++it)
      if (!seen_.count(it.key())) issues_.add(at(it.key()), "unknown field");
  }

  Issues& issues_;
  const Json* j_;
  std::string path_;
  std::set<std::string> seen_;
};

MaterialModel read_material(Issues& issues, const Json& j, const std::string& path) {
  ObjectReader r(issues, &j, path);
  MaterialModel m;
  m.name = r.string("name", std::nullopt);
  if (r.valid() && m.name.empty()) issues.add(r.at("name"), "must be non-empty");
  m.rho0 = r.number("rho0", std::nullopt, positive());
  m.K = r.number("K", std::nullopt, positive());
  m.G = r.number("G", std::nullopt, positive());
  m.sigma_y = r.number("sigma_y", std::nullopt, positive());
  m.hardening = r.number("hardening", 0.0, non_negative());
  return m;
}

LatticeSpec read_lattice(Issues& issues, const Json* j, const std::string& path) {
  ObjectReader r(issues, j, path);
  LatticeSpec s;
  const std::string kind =
      r.string("kind", std::nullopt, {"simple-cubic", "sc", "bcc", "fcc", "diamond", "custom"});
  try {
    s.kind = parse_lattice_kind(kind);
  } catch (const InvalidArgument&) {
    s.kind = LatticeKind::fcc;
  }
  s.a = r.number("a", std::nullopt, positive());
  s.species = r.string("species", "X");
  if (r.valid() && s.species.find_first_of(" \t\r\n") != std::string::npos)
    issues.add(r.at("species"), "must not contain whitespace");
  if (r.valid() && s.species.empty()) issues.add(r.at("species"), "must be non-empty");
  const auto ext = r.numbers("extents", std::vector<double>{1, 1, 1}, 3);
  for (int k = 0; k < 3; ++k) {
    if (!(ext[k] >= 1 && ext[k] <= 1000 && std::floor(ext[k]) == ext[k]))
      issues.add(r.at("extents") + "/" + std::to_string(k), "must be an integer in [1, 1000]");
    s.repeats[k] = static_cast<int>(std::clamp(ext[k], 1.0, 1000.0));
  }
  s.max_atoms = static_cast<std::size_t>(r.integer("max_atoms", 1000000, 1, 10000000));
  const Json* basis = r.child("basis");
  if (s.kind == LatticeKind::custom) {
    if (!basis || !basis->is_array() || basis->empty()) {
      issues.add(r.at("basis"), "custom lattices need a non-empty basis array");
    } else {
      for (std::size_t k = 0; k < basis->size(); ++k) {
        ObjectReader b(issues, &(*basis)[k], r.at("basis") + "/" + std::to_string(k));
        BasisAtom atom;
        atom.species = b.string("species", s.species);
        const auto f = b.numbers("frac", std::nullopt, 3);
        for (int c = 0; c < 3; ++c)
          if (!(f[c] >= 0.0 && f[c] < 1.0)) issues.add(b.at("frac") + "/" + std::to_string(c), "must be in [0, 1)");
        atom.frac = {f[0], f[1], f[2]};
        s.basis.push_back(atom);
      }
    }
  } else if (basis) {
    issues.add(r.at("basis"), "only allowed for kind 'custom'");
  }
  return s;
}

ParticleSpec read_particle(Issues& issues, const Json* j, const std::string& path, bool named) {
  ObjectReader r(issues, j, path);
  ParticleSpec p;
  if (named) {
    p.name = r.string("name", std::nullopt);
    if (r.valid() && p.name.empty()) issues.add(r.at("name"), "must be non-empty");
  } else {
    p.name = r.string("name", "particle");
  }
  const std::string shape = r.string("shape", std::nullopt, {"sphere", "pyramid", "fullerene"});
  try {
    p.shape = parse_particle_shape(shape);
  } catch (const InvalidArgument&) {
    p.shape = ParticleShape::sphere;
  }
  switch (p.shape) {
    case ParticleShape::sphere:
      p.radius = r.number("radius", std::nullopt, positive());
      p.lattice = read_lattice(issues, r.child("lattice"), r.at("lattice"));
      if (r.valid() && !r.has("lattice")) issues.add(r.at("lattice"), "is required for sphere particles");
      break;
    case ParticleShape::pyramid:
      p.base = r.number("base", std::nullopt, positive());
      p.height = r.number("height", std::nullopt, positive());
      p.lattice = read_lattice(issues, r.child("lattice"), r.at("lattice"));
      if (r.valid() && !r.has("lattice")) issues.add(r.at("lattice"), "is required for pyramid particles");
      break;
    case ParticleShape::fullerene:
      p.radius = r.number("radius", std::nullopt, positive());
      p.species = r.string("species", "C");
      if (r.valid() && (p.species.empty() || p.species.find_first_of(" \t\r\n") != std::string::npos))
        issues.add(r.at("species"), "must be a non-empty token");
      if (r.has("lattice")) issues.add(r.at("lattice"), "not used by fullerene particles");
      r.child("lattice");
      break;
  }
  return p;
}

Schedule read_schedule(Issues& issues, const Json* j, const std::string& path) {
  ObjectReader r(issues, j, path);
  Schedule s;
  s.mode = r.string("mode", "plane-strain", {"plane-strain", "plane-stress"}) == "plane-stress"
               ? StressMode::plane_stress
               : StressMode::plane_strain;
  s.thickness = r.number("thickness", 1.0, positive());
  {
    ObjectReader l(issues, r.child("load"), r.at("load"));
    s.load.type = l.string("type", "tension", {"tension", "affine"}) == "affine" ? LoadType::affine : LoadType::tension;
    s.load.target_strain = l.number("target_strain", 0.007, {0.0, 0.2, true, false});
    s.load.ramp_transits = l.number("ramp_transits", 20.0, {0.0, 1000.0, true, false});
    s.load.hold_transits = l.number("hold_transits", 5.0, closed(0.0, 1000.0));
    s.load.lateral_ratio = l.number("lateral_ratio", 0.0, closed(-1.0, 1.0));
  }
  s.dt_safety = r.number("dt_safety", 0.3, {0.0, 0.9, true, false});
  {
    ObjectReader v(issues, r.child("viscosity"), r.at("viscosity"));
    s.c_L = v.number("c_L", 0.1, closed(0.0, 10.0));
    s.c_Q = v.number("c_Q", 2.0, closed(0.0, 10.0));
  }
  s.hourglass = r.number("hourglass", 0.0, closed(0.0, 1.0));
  {
    ObjectReader f(issues, r.child("fracture"), r.at("fracture"));
    s.fracture.enabled = f.boolean("enabled", false);
    s.fracture.eps_frac = f.number("eps_frac", 0.5, positive());
    s.fracture.sigma_frac = f.number("sigma_frac", 1.0, positive());
    s.fracture.check_every = static_cast<int>(f.integer("check_every", 10, 1, 100000));
  }
  s.frames = static_cast<int>(r.integer("frames", 5, 1, 1000));
  return s;
}

Json quaternion_json(const std::array<double, 4>& q) { return Json::array({q[0], q[1], q[2], q[3]}); }

}  // namespace

const MaterialModel& SceneSpec::material(const std::string& name) const {
  for (const auto& m : materials)
    if (m.name == name) return m;
  throw InvalidArgument("unknown material '" + name + "'");
}

std::string to_string(SceneKind kind) {
  return kind == SceneKind::meso_simulation ? "meso-simulation" : "lattice-composite";
}
std::string to_string(StressMode mode) { return mode == StressMode::plane_stress ? "plane-stress" : "plane-strain"; }
std::string to_string(LoadType type) { return type == LoadType::affine ? "affine" : "tension"; }

SceneSpec parse_scene(const Json& doc) {
  Issues issues;
  SceneSpec scene;
  {
    ObjectReader r(issues, &doc, "");
    if (!r.valid()) throw ValidationError(issues.list);

    const Json* ver = r.child("scene_version");
    if (!ver) {
      issues.add("/scene_version", "is required");
    } else if (!ver->is_number_integer() || ver->get<long long>() != kSceneVersion) {
      issues.add("/scene_version", "unsupported version " + ver->dump() + " (expected 1)");
    }

    const std::string kind = r.string("kind", std::nullopt, {"meso-simulation", "lattice-composite"});
    scene.kind = kind == "lattice-composite" ? SceneKind::lattice_composite : SceneKind::meso_simulation;

    const bool has_meso = r.has("meso"), has_lattice = r.has("lattice");
    if (has_meso && has_lattice) issues.add("", "exactly one of 'meso' or 'lattice' may be present");
    if (!has_meso && !has_lattice) issues.add("", "exactly one of 'meso' or 'lattice' is required");
    if (kind == "meso-simulation" && has_lattice && !has_meso)
      issues.add("/lattice", "not allowed for kind 'meso-simulation'");
    if (kind == "lattice-composite" && has_meso && !has_lattice)
      issues.add("/meso", "not allowed for kind 'lattice-composite'");

    if (const Json* mats = r.child("materials")) {
      if (!mats->is_array()) {
        issues.add("/materials", "must be an array");
      } else {
        std::set<std::string> names;
        for (std::size_t k = 0; k < mats->size(); ++k) {
          const std::string p = "/materials/" + std::to_string(k);
          scene.materials.push_back(read_material(issues, (*mats)[k], p));
          if (!scene.materials.back().name.empty() && !names.insert(scene.materials.back().name).second)
            issues.add(p + "/name", "duplicate material name '" + scene.materials.back().name + "'");
        }
      }
    }

    if (const Json* mj = r.child("meso")) {
      ObjectReader m(issues, mj, "/meso");
      MesoScene meso;
      meso.material = m.string("material", std::nullopt);
      if (m.valid() && !meso.material.empty()) {
        const bool found = std::any_of(scene.materials.begin(), scene.materials.end(),
                                       [&](const MaterialModel& mm) { return mm.name == meso.material; });
        if (!found) issues.add("/meso/material", "references unknown material '" + meso.material + "'");
      }
      {
        ObjectReader g(issues, m.child("grid"), "/meso/grid");
        meso.grid.nx = static_cast<int>(g.integer("nx", 150, 1, 2000));
        meso.grid.ny = static_cast<int>(g.integer("ny", 175, 1, 2000));
        meso.grid.width = g.number("width", 27.0, positive());
        meso.grid.height = g.number("height", 31.4, positive());
      }
      {
        ObjectReader g(issues, m.child("grains"), "/meso/grains");
        meso.grains.count = static_cast<int>(g.integer("count", 120, 1, 1000000));
        meso.grains.delta = g.number("delta", 0.3, {0.0, 1.0, false, true});
        meso.grains.seed = static_cast<std::uint64_t>(g.integer("seed", 1, 0, (1LL << 53)));
        meso.grains.relax_iters = static_cast<int>(g.integer("relax_iters", 5, 0, 100));
        if (meso.grains.count > meso.grid.nx * meso.grid.ny)
          issues.add("/meso/grains/count", "exceeds the number of cells (" +
                                               std::to_string(meso.grid.nx * meso.grid.ny) + ")");
      }
      meso.schedule = read_schedule(issues, m.child("schedule"), "/meso/schedule");
      scene.meso = meso;
    }

    if (const Json* lj = r.child("lattice")) {
      ObjectReader l(issues, lj, "/lattice");
      CompositeScene comp;
      comp.matrix = read_lattice(issues, l.child("matrix"), "/lattice/matrix");
      if (l.valid() && !l.has("matrix")) issues.add("/lattice/matrix", "is required");
      std::set<std::string> names;
      if (const Json* parts = l.child("particles")) {
        if (!parts->is_array()) {
          issues.add("/lattice/particles", "must be an array");
        } else {
          for (std::size_t k = 0; k < parts->size(); ++k) {
            const std::string p = "/lattice/particles/" + std::to_string(k);
            comp.particles.push_back(read_particle(issues, &(*parts)[k], p, true));
            if (!comp.particles.back().name.empty() && !names.insert(comp.particles.back().name).second)
              issues.add(p + "/name", "duplicate particle name '" + comp.particles.back().name + "'");
          }
        }
      }
      if (const Json* pls = l.child("placements")) {
        if (!pls->is_array()) {
          issues.add("/lattice/placements", "must be an array");
        } else {
          for (std::size_t k = 0; k < pls->size(); ++k) {
            const std::string p = "/lattice/placements/" + std::to_string(k);
            ObjectReader pr(issues, &(*pls)[k], p);
            Placement pl;
            const std::string name = pr.string("particle", std::nullopt);
            pl.particle = -1;
            for (int q = 0; q < static_cast<int>(comp.particles.size()); ++q)
              if (comp.particles[q].name == name) pl.particle = q;
            if (pr.valid() && pl.particle < 0 && !name.empty())
              issues.add(p + "/particle", "references unknown particle '" + name + "'");
            const auto t = pr.numbers("translation", std::vector<double>{0, 0, 0}, 3);
            pl.translation = {t[0], t[1], t[2]};
            const auto q = pr.numbers("rotation", std::vector<double>{1, 0, 0, 0}, 4);
            pl.rotation = {q[0], q[1], q[2], q[3]};
            const double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
            if (pr.valid() && !(std::abs(norm - 1.0) <= 1e-9))
              issues.add(p + "/rotation", "must be a unit quaternion (norm " + fmt(norm) + ")");
            comp.placement_names.push_back(name);
            comp.placements.push_back(pl);
          }
        }
      }
      comp.clearance = l.number("clearance", 2.0, closed(0.0, 100.0));
      comp.max_atoms = static_cast<std::size_t>(l.integer("max_atoms", 1000000, 1, 10000000));
      scene.lattice = comp;
    }

    {
      ObjectReader o(issues, r.child("outputs"), "/outputs");
      if (const Json* f = o.child("fields")) {
        scene.outputs.fields.clear();
        if (!f->is_array()) {
          issues.add("/outputs/fields", "must be an array of field names");
        } else {
          const auto& known = Simulation::field_names();
          std::set<std::string> seen;
          for (std::size_t k = 0; k < f->size(); ++k) {
            const std::string p = "/outputs/fields/" + std::to_string(k);
            if (!(*f)[k].is_string()) {
              issues.add(p, "must be a string");
              continue;
            }
            const std::string name = (*f)[k].get<std::string>();
            if (std::find(known.begin(), known.end(), name) == known.end())
              issues.add(p, "unknown field '" + name + "'");
            else if (!seen.insert(name).second)
              issues.add(p, "duplicate field '" + name + "'");
            else
              scene.outputs.fields.push_back(name);
          }
        }
      }
      scene.outputs.recovered_stress = o.boolean("recovered_stress", false);
      scene.outputs.png = o.boolean("png", false);
      ObjectReader b(issues, o.child("bands"), "/outputs/bands");
      scene.outputs.bands.threshold_factor = b.number("threshold_factor", 3.0, positive());
      scene.outputs.bands.min_cells = static_cast<int>(b.integer("min_cells", 10, 1, 1000000));
    }
  }
  if (!issues.list.empty()) throw ValidationError(issues.list);
  return scene;
}

SceneSpec parse_scene_text(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ValidationError({{"", std::string("invalid JSON: ") + e.what()}});
  }
  return parse_scene(doc);
}

SceneSpec load_scene(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError(path, "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scene_text(ss.str());
}

Json lattice_to_json(const LatticeSpec& s) {
  Json j = {{"kind", to_string(s.kind)},
            {"a", s.a},
            {"species", s.species},
            {"extents", Json::array({s.repeats[0], s.repeats[1], s.repeats[2]})},
            {"max_atoms", s.max_atoms}};
  if (s.kind == LatticeKind::custom) {
    Json basis = Json::array();
    for (const auto& b : s.basis)
      basis.push_back({{"species", b.species}, {"frac", Json::array({b.frac.x, b.frac.y, b.frac.z})}});
    j["basis"] = basis;
  }
  return j;
}

namespace {
Json particle_to_json(const ParticleSpec& p) {
  Json j = {{"name", p.name}, {"shape", to_string(p.shape)}};
  switch (p.shape) {
    case ParticleShape::sphere:
      j["radius"] = p.radius;
      j["lattice"] = lattice_to_json(p.lattice);
      break;
    case ParticleShape::pyramid:
      j["base"] = p.base;
      j["height"] = p.height;
      j["lattice"] = lattice_to_json(p.lattice);
      break;
    case ParticleShape::fullerene:
      j["radius"] = p.radius;
      j["species"] = p.species;
      break;
  }
  return j;
}
}  // namespace

Json scene_to_json(const SceneSpec& scene) {
  Json j;
  j["scene_version"] = scene.scene_version;
  j["kind"] = to_string(scene.kind);
  Json mats = Json::array();
  for (const auto& m : scene.materials)
    mats.push_back(
        {{"name", m.name}, {"rho0", m.rho0}, {"K", m.K}, {"G", m.G}, {"sigma_y", m.sigma_y}, {"hardening", m.hardening}});
  j["materials"] = mats;
  if (scene.meso) {
    const auto& m = *scene.meso;
    const auto& s = m.schedule;
    j["meso"] = {
        {"material", m.material},
        {"grid", {{"nx", m.grid.nx}, {"ny", m.grid.ny}, {"width", m.grid.width}, {"height", m.grid.height}}},
        {"grains",
         {{"count", m.grains.count},
          {"delta", m.grains.delta},
          {"seed", m.grains.seed},
          {"relax_iters", m.grains.relax_iters}}},
        {"schedule",
         {{"mode", to_string(s.mode)},
          {"thickness", s.thickness},
          {"load",
           {{"type", to_string(s.load.type)},
            {"target_strain", s.load.target_strain},
            {"ramp_transits", s.load.ramp_transits},
            {"hold_transits", s.load.hold_transits},
            {"lateral_ratio", s.load.lateral_ratio}}},
          {"dt_safety", s.dt_safety},
          {"viscosity", {{"c_L", s.c_L}, {"c_Q", s.c_Q}}},
          {"hourglass", s.hourglass},
          {"fracture",
           {{"enabled", s.fracture.enabled},
            {"eps_frac", s.fracture.eps_frac},
            {"sigma_frac", s.fracture.sigma_frac},
            {"check_every", s.fracture.check_every}}},
          {"frames", s.frames}}}};
  }
  if (scene.lattice) {
    const auto& l = *scene.lattice;
    Json parts = Json::array();
    for (const auto& p : l.particles) parts.push_back(particle_to_json(p));
    Json pls = Json::array();
    for (std::size_t k = 0; k < l.placements.size(); ++k) {
      const auto& p = l.placements[k];
      pls.push_back({{"particle", l.placement_names[k]},
                     {"translation", Json::array({p.translation.x, p.translation.y, p.translation.z})},
                     {"rotation", quaternion_json(p.rotation)}});
    }
    j["lattice"] = {{"matrix", lattice_to_json(l.matrix)},
                    {"particles", parts},
                    {"placements", pls},
                    {"clearance", l.clearance},
                    {"max_atoms", l.max_atoms}};
  }
  j["outputs"] = {{"fields", scene.outputs.fields},
                  {"recovered_stress", scene.outputs.recovered_stress},
                  {"png", scene.outputs.png},
                  {"bands",
                   {{"threshold_factor", scene.outputs.bands.threshold_factor},
                    {"min_cells", scene.outputs.bands.min_cells}}}};
  return j;
}

std::string canonical_scene(const SceneSpec& scene) { return scene_to_json(scene).dump(); }

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int k = 0; k < len; ++k) {
    out += hex[digest[k] >> 4];
    out += hex[digest[k] & 15];
  }
  return out;
}

std::string scene_id(const SceneSpec& scene) { return sha256_hex(canonical_scene(scene)).substr(0, 16); }

LatticeSpec parse_lattice_spec(const Json& doc) {
  Issues issues;
  LatticeSpec s = read_lattice(issues, &doc, "");
  if (!issues.list.empty()) throw ValidationError(issues.list);
  return s;
}

ParticleSpec parse_particle_spec(const Json& doc) {
  Issues issues;
  ParticleSpec p = read_particle(issues, &doc, "", false);
  if (!issues.list.empty()) throw ValidationError(issues.list);
  return p;
}

GrainMap make_grains(const MesoScene& meso, const Grid2D& grid) {
  GrainMap g = generate_grains(grid, meso.grains.count, meso.grains.seed, meso.grains.relax_iters);
  return assign_yield(std::move(g), meso.grains.delta, meso.grains.seed);
}

SimulationSetup make_setup(const SceneSpec& scene) {
  if (!scene.meso) throw InvalidArgument("scene has no meso section");
  const auto& meso = *scene.meso;
  SimulationSetup setup;
  setup.grid = build_grid(meso.grid.nx, meso.grid.ny, meso.grid.width, meso.grid.height);
  setup.material = scene.material(meso.material);
  setup.grains = make_grains(meso, setup.grid);
  setup.schedule = meso.schedule;
  setup.fields = scene.outputs.fields;
  if (std::find(setup.fields.begin(), setup.fields.end(), "eq_plastic") == setup.fields.end())
    setup.fields.insert(setup.fields.begin(), "eq_plastic");
  return setup;
}

}  // namespace nanowb
