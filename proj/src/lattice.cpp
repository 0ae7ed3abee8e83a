#include "nanowb/lattice.hpp"

#include "nanowb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_map>

namespace nanowb {

LatticeKind parse_lattice_kind(const std::string& name) {
  if (name == "sc" || name == "simple-cubic") return LatticeKind::sc;
  if (name == "bcc") return LatticeKind::bcc;
  if (name == "fcc") return LatticeKind::fcc;
  if (name == "diamond") return LatticeKind::diamond;
  if (name == "custom") return LatticeKind::custom;
  throw InvalidArgument("unknown lattice kind '" + name + "'");
}

std::string to_string(LatticeKind kind) {
  switch (kind) {
    case LatticeKind::sc: return "simple-cubic";
    case LatticeKind::bcc: return "bcc";
    case LatticeKind::fcc: return "fcc";
    case LatticeKind::diamond: return "diamond";
    case LatticeKind::custom: return "custom";
  }
  return "custom";
}

void LatticeSpec::validate() const {
  if (!(a > 0.0) || !std::isfinite(a)) throw InvalidArgument("lattice: a must be positive and finite");
  for (int r : repeats)
    if (r < 1) throw InvalidArgument("lattice: repeats must be >= 1");
  if (kind == LatticeKind::custom) {
    if (basis.empty()) throw InvalidArgument("lattice: custom kind needs a non-empty basis");
    for (const auto& b : basis) {
      for (double f : {b.frac.x, b.frac.y, b.frac.z})
        if (!(f >= 0.0 && f < 1.0)) throw InvalidArgument("lattice: fractional coordinates must be in [0, 1)");
      if (b.species.empty()) throw InvalidArgument("lattice: basis species must be non-empty");
    }
  } else if (species.empty()) {
    throw InvalidArgument("lattice: species must be non-empty");
  }
}

std::vector<BasisAtom> lattice_basis(const LatticeSpec& spec) {
  const std::string& s = spec.species;
  std::vector<BasisAtom> fcc = {{s, {0, 0, 0}}, {s, {0.5, 0.5, 0}}, {s, {0.5, 0, 0.5}}, {s, {0, 0.5, 0.5}}};
  switch (spec.kind) {
    case LatticeKind::sc: return {{s, {0, 0, 0}}};
    case LatticeKind::bcc: return {{s, {0, 0, 0}}, {s, {0.5, 0.5, 0.5}}};
    case LatticeKind::fcc: return fcc;
    case LatticeKind::diamond: {
      auto out = fcc;
      for (const auto& b : fcc) out.push_back({s, {b.frac.x + 0.25, b.frac.y + 0.25, b.frac.z + 0.25}});
      return out;
    }
    case LatticeKind::custom: return spec.basis;
  }
  return {};
}

std::size_t lattice_atom_count(const LatticeSpec& spec) {
  spec.validate();
  const double n = static_cast<double>(lattice_basis(spec).size()) * spec.repeats[0] * spec.repeats[1] *
                   spec.repeats[2];
  return n > 1e18 ? static_cast<std::size_t>(1e18) : static_cast<std::size_t>(n);
}

std::vector<Atom> build_lattice(const LatticeSpec& spec) {
  const std::size_t count = lattice_atom_count(spec);
  if (count > spec.max_atoms) throw TooLarge(count, spec.max_atoms);
  const auto basis = lattice_basis(spec);
  std::vector<Atom> atoms;
  atoms.reserve(count);
  for (int k = 0; k < spec.repeats[2]; ++k)
    for (int j = 0; j < spec.repeats[1]; ++j)
      for (int i = 0; i < spec.repeats[0]; ++i)
        for (const auto& b : basis)
          atoms.push_back({b.species, {spec.a * (i + b.frac.x), spec.a * (j + b.frac.y), spec.a * (k + b.frac.z)}});
  return atoms;
}

ParticleShape parse_particle_shape(const std::string& name) {
  if (name == "sphere") return ParticleShape::sphere;
  if (name == "pyramid") return ParticleShape::pyramid;
  if (name == "fullerene") return ParticleShape::fullerene;
  throw InvalidArgument("unknown particle shape '" + name + "'");
}

std::string to_string(ParticleShape shape) {
  switch (shape) {
    case ParticleShape::sphere: return "sphere";
    case ParticleShape::pyramid: return "pyramid";
    case ParticleShape::fullerene: return "fullerene";
  }
  return "sphere";
}

void ParticleSpec::validate() const {
  switch (shape) {
    case ParticleShape::sphere:
      if (!(radius > 0.0) || !std::isfinite(radius)) throw InvalidArgument("particle: radius must be positive");
      lattice.validate();
      break;
    case ParticleShape::pyramid:
      if (!(base > 0.0) || !(height > 0.0) || !std::isfinite(base) || !std::isfinite(height))
        throw InvalidArgument("particle: pyramid base and height must be positive");
      lattice.validate();
      break;
    case ParticleShape::fullerene:
      if (!(radius > 0.0) || !std::isfinite(radius)) throw InvalidArgument("particle: radius must be positive");
      if (species.empty()) throw InvalidArgument("particle: species must be non-empty");
      break;
  }
}

namespace {

// Lattice atoms in cells [lo, hi) along each axis, keeping those accepted by `inside`.
template <class Pred>
std::vector<Atom> carve(const LatticeSpec& lat, const std::array<int, 3>& lo, const std::array<int, 3>& hi,
                        Pred inside) {
  const auto basis = lattice_basis(lat);
  const double block = static_cast<double>(basis.size()) * (hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2]);
  if (block > static_cast<double>(lat.max_atoms))
    throw TooLarge(static_cast<std::size_t>(block), lat.max_atoms);
  std::vector<Atom> out;
  for (int k = lo[2]; k < hi[2]; ++k)
    for (int j = lo[1]; j < hi[1]; ++j)
      for (int i = lo[0]; i < hi[0]; ++i)
        for (const auto& b : basis) {
          const Vec3 r{lat.a * (i + b.frac.x), lat.a * (j + b.frac.y), lat.a * (k + b.frac.z)};
          if (inside(r)) out.push_back({b.species, r});
        }
  return out;
}

std::vector<Vec3> truncated_icosahedron() {
  constexpr double phi = std::numbers::phi;
  // Even permutations of (0, +-1, +-3phi), (+-1, +-(2+phi), +-2phi), (+-phi, +-2, +-phi^3).
  const double gens[3][3] = {{0.0, 1.0, 3.0 * phi}, {1.0, 2.0 + phi, 2.0 * phi}, {phi, 2.0, phi * phi * phi}};
  std::vector<Vec3> out;
  for (const auto& g : gens) {
    for (int sx = -1; sx <= 1; sx += 2)
      for (int sy = -1; sy <= 1; sy += 2)
        for (int sz = -1; sz <= 1; sz += 2) {
          if ((g[0] == 0.0 && sx < 0) || (g[1] == 0.0 && sy < 0) || (g[2] == 0.0 && sz < 0)) continue;
          const double v[3] = {sx * g[0], sy * g[1], sz * g[2]};
          for (int rot = 0; rot < 3; ++rot) out.push_back({v[rot % 3], v[(rot + 1) % 3], v[(rot + 2) % 3]});
        }
  }
  return out;
}

}  // namespace

std::vector<Atom> build_particle(const ParticleSpec& spec) {
  spec.validate();
  std::vector<Atom> atoms;
  switch (spec.shape) {
    case ParticleShape::sphere: {
      const int n = static_cast<int>(std::ceil(spec.radius / spec.lattice.a)) + 1;
      const double r2 = spec.radius * spec.radius;
      atoms = carve(spec.lattice, {-n, -n, -n}, {n, n, n},
                    [&](const Vec3& r) { return r.x * r.x + r.y * r.y + r.z * r.z <= r2; });
      break;
    }
    case ParticleShape::pyramid: {
      const double half = 0.5 * spec.base;
      const int nxy = static_cast<int>(std::ceil(half / spec.lattice.a)) + 1;
      const int nz = static_cast<int>(std::ceil(spec.height / spec.lattice.a)) + 1;
      const double eps = 1e-9 * std::max(spec.base, spec.height);
      atoms = carve(spec.lattice, {-nxy, -nxy, -1}, {nxy, nxy, nz}, [&](const Vec3& r) {
        if (r.z < -eps || r.z > spec.height + eps) return false;
        const double lim = half * (1.0 - r.z / spec.height) + eps;
        return std::abs(r.x) <= lim && std::abs(r.y) <= lim;
      });
      break;
    }
    case ParticleShape::fullerene: {
      const auto verts = truncated_icosahedron();
      const double circ = std::sqrt(9.0 * std::numbers::phi + 10.0);
      const double s = spec.radius / circ;
      for (const auto& v : verts) atoms.push_back({spec.species, {v.x * s, v.y * s, v.z * s}});
      break;
    }
  }
  if (atoms.empty()) throw EmptyParticle("particle '" + spec.name + "' contains no atoms");
  return atoms;
}

Vec3 rotate(const std::array<double, 4>& q, const Vec3& v) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  // v' = v + 2w (u x v) + 2 u x (u x v), u = (x, y, z)
  const double tx = 2.0 * (y * v.z - z * v.y);
  const double ty = 2.0 * (z * v.x - x * v.z);
  const double tz = 2.0 * (x * v.y - y * v.x);
  return {v.x + w * tx + (y * tz - z * ty), v.y + w * ty + (z * tx - x * tz), v.z + w * tz + (x * ty - y * tx)};
}

namespace {

struct SpatialHash {
  double h;
  std::unordered_map<std::uint64_t, std::vector<int>> cells;

  static std::uint64_t key(std::int64_t i, std::int64_t j, std::int64_t k) {
    const auto u = [](std::int64_t v) { return static_cast<std::uint64_t>(v + (1 << 20)) & 0x1FFFFF; };
    return (u(i) << 42) | (u(j) << 21) | u(k);
  }
  std::int64_t coord(double v) const { return static_cast<std::int64_t>(std::floor(v / h)); }
  void insert(const Vec3& r, int id) { cells[key(coord(r.x), coord(r.y), coord(r.z))].push_back(id); }

  template <class F>
  void neighbors(const Vec3& r, F&& f) const {
    const auto ci = coord(r.x), cj = coord(r.y), ck = coord(r.z);
    for (std::int64_t k = ck - 1; k <= ck + 1; ++k)
      for (std::int64_t j = cj - 1; j <= cj + 1; ++j)
        for (std::int64_t i = ci - 1; i <= ci + 1; ++i) {
          const auto it = cells.find(key(i, j, k));
          if (it == cells.end()) continue;
          for (int id : it->second)
            if (f(id)) return;
        }
  }
};

double dist2(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace

Composite assemble(const std::vector<Atom>& matrix, const std::vector<std::vector<Atom>>& particles,
                   const std::vector<Placement>& placements, double clearance, std::size_t max_atoms) {
  if (!(clearance >= 0.0) || !std::isfinite(clearance)) throw InvalidArgument("assemble: clearance must be >= 0");

  struct Placed {
    Vec3 r;
    int placement;
    int index;
  };
  std::vector<Placed> placed;
  std::vector<std::string> species;
  for (int p = 0; p < static_cast<int>(placements.size()); ++p) {
    const auto& pl = placements[p];
    if (pl.particle < 0 || pl.particle >= static_cast<int>(particles.size()))
      throw InvalidArgument("assemble: placement " + std::to_string(p) + " references a missing particle");
    const auto& q = pl.rotation;
    const double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    if (!(std::abs(norm - 1.0) <= 1e-9))
      throw InvalidArgument("assemble: placement " + std::to_string(p) + " rotation is not a unit quaternion");
    const auto& atoms = particles[pl.particle];
    for (int a = 0; a < static_cast<int>(atoms.size()); ++a) {
      const Vec3 r = rotate(q, atoms[a].r);
      placed.push_back({{r.x + pl.translation.x, r.y + pl.translation.y, r.z + pl.translation.z}, p, a});
      species.push_back(atoms[a].species);
    }
  }

  Composite out;
  std::vector<char> keep(matrix.size(), 1);
  if (clearance > 0.0 && !placed.empty()) {
    SpatialHash hash{clearance, {}};
    for (int k = 0; k < static_cast<int>(placed.size()); ++k) hash.insert(placed[k].r, k);
    const double c2 = clearance * clearance;

    // Particle-particle separation: report the lowest offending placement pair.
    std::pair<int, int> worst{-1, -1};
    for (int k = 0; k < static_cast<int>(placed.size()); ++k) {
      hash.neighbors(placed[k].r, [&](int other) {
        const int a = placed[k].placement, b = placed[other].placement;
        if (a < b && dist2(placed[k].r, placed[other].r) < c2) {
          if (worst.first < 0 || std::make_pair(a, b) < worst) worst = {a, b};
        }
        return false;
      });
    }
    if (worst.first >= 0) throw ParticleCollision(worst.first, worst.second);

    for (std::size_t m = 0; m < matrix.size(); ++m) {
      hash.neighbors(matrix[m].r, [&](int k) {
        if (dist2(matrix[m].r, placed[k].r) < c2) {
          keep[m] = 0;
          return true;
        }
        return false;
      });
    }
  }

  std::size_t kept = 0;
  for (char k : keep) kept += k ? 1 : 0;
  const std::size_t total = kept + placed.size();
  if (total > max_atoms) throw TooLarge(total, max_atoms);
  out.atoms.reserve(total);
  out.origin.reserve(total);
  for (std::size_t m = 0; m < matrix.size(); ++m) {
    if (!keep[m]) continue;
    out.atoms.push_back(matrix[m]);
    out.origin.push_back({-1, static_cast<int>(m)});
  }
  for (std::size_t k = 0; k < placed.size(); ++k) {
    out.atoms.push_back({species[k], placed[k].r});
    out.origin.push_back({placed[k].placement, placed[k].index});
  }
  out.matrix_kept = kept;
  out.matrix_removed = matrix.size() - kept;
  return out;
}

// ---------------------------------------------------------------------------
// XYZ

namespace {
void append_coord(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  if (std::string_view(buf) == "-0.000000") {
    out += "0.000000";
  } else {
    out += buf;
  }
}
}  // namespace

std::string to_xyz(const std::vector<Atom>& atoms, const std::string& comment) {
  if (comment.find_first_of("\r\n") != std::string::npos)
    throw InvalidArgument("xyz comment must be a single line");
  std::string out = std::to_string(atoms.size()) + "\n" + comment + "\n";
  out.reserve(out.size() + atoms.size() * 40);
  for (const auto& a : atoms) {
    if (a.species.empty() || a.species.find_first_of(" \t\r\n") != std::string::npos)
      throw InvalidArgument("xyz species label must be a non-empty token");
    if (!std::isfinite(a.r.x) || !std::isfinite(a.r.y) || !std::isfinite(a.r.z))
      throw InvalidArgument("xyz coordinates must be finite");
    out += a.species;
    out += ' ';
    append_coord(out, a.r.x);
    out += ' ';
    append_coord(out, a.r.y);
    out += ' ';
    append_coord(out, a.r.z);
    out += '\n';
  }
  return out;
}

void write_xyz(const std::vector<Atom>& atoms, const std::string& path, const std::string& comment) {
  const std::string text = to_xyz(atoms, comment);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError(path, "cannot open for writing");
  out << text;
  if (!out) throw FileError(path, "write failed");
}

std::vector<Atom> parse_xyz(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("xyz: missing atom count");
  std::size_t n = 0;
  {
    std::istringstream ls(line);
    long long v = -1;
    if (!(ls >> v) || v < 0) throw InvalidArgument("xyz: bad atom count '" + line + "'");
    n = static_cast<std::size_t>(v);
  }
  if (!std::getline(in, line)) throw InvalidArgument("xyz: missing comment line");
  std::vector<Atom> atoms;
  atoms.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::getline(in, line)) throw InvalidArgument("xyz: expected " + std::to_string(n) + " atom lines");
    std::istringstream ls(line);
    Atom a;
    if (!(ls >> a.species >> a.r.x >> a.r.y >> a.r.z))
      throw InvalidArgument("xyz: malformed atom line " + std::to_string(k + 3));
    atoms.push_back(std::move(a));
  }
  return atoms;
}

std::vector<Atom> read_xyz(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError(path, "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_xyz(ss.str());
}

}  // namespace nanowb
