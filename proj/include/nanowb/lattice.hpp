#pragma once

// Crystal lattice generation, particle carving and composite assembly.
// Lengths are in angstrom.

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace nanowb {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

struct Atom {
  std::string species;
  Vec3 r;
};

enum class LatticeKind { sc, bcc, fcc, diamond, custom };

struct BasisAtom {
  std::string species;
  Vec3 frac;  // fractional coordinates in [0, 1)
};

struct LatticeSpec {
  LatticeKind kind = LatticeKind::fcc;
  double a = 0.0;  // cubic lattice constant
  std::string species = "X";
  std::vector<BasisAtom> basis;  // used when kind == custom
  std::array<int, 3> repeats{1, 1, 1};
  std::size_t max_atoms = 1000000;

  /// Throws InvalidArgument for a non-positive constant/repeats or an invalid basis.
  void validate() const;
};

LatticeKind parse_lattice_kind(const std::string& name);
std::string to_string(LatticeKind kind);

/// Basis in fractional coordinates (1, 2, 4 or 8 atoms for sc/bcc/fcc/diamond).
std::vector<BasisAtom> lattice_basis(const LatticeSpec& spec);

/// Number of atoms build_lattice would produce.
std::size_t lattice_atom_count(const LatticeSpec& spec);

/// Tiles the basis over repeats[0] x repeats[1] x repeats[2] cells starting at the
/// origin. Order: cell z, y, x, then basis index. Throws TooLarge over max_atoms.
std::vector<Atom> build_lattice(const LatticeSpec& spec);

enum class ParticleShape { sphere, pyramid, fullerene };

struct ParticleSpec {
  std::string name;
  ParticleShape shape = ParticleShape::sphere;
  LatticeSpec lattice;  // sphere and pyramid are carved from this lattice
  double radius = 0.0;  // sphere radius, fullerene circumradius
  double base = 0.0;    // pyramid square base edge
  double height = 0.0;  // pyramid apex height
  std::string species = "C";  // fullerene atoms

  void validate() const;
};

ParticleShape parse_particle_shape(const std::string& name);
std::string to_string(ParticleShape shape);

/// Particle atoms centered on the origin. Sphere: lattice atoms with |r| <= R from a
/// block with an atom at the origin. Pyramid: base centered at the origin in z = 0,
/// apex at +z. Fullerene: the 60 truncated-icosahedron vertices at circumradius R.
/// Throws EmptyParticle when the carve keeps nothing.
std::vector<Atom> build_particle(const ParticleSpec& spec);

/// Rotation is a unit quaternion (w, x, y, z), normalized to 1e-9.
struct Placement {
  int particle = 0;  // index into the particle list
  Vec3 translation;
  std::array<double, 4> rotation{1.0, 0.0, 0.0, 0.0};
};

struct AtomOrigin {
  int source = -1;  // -1 for matrix atoms, else the placement index
  int index = 0;    // index within the matrix or particle atom list
};

struct Composite {
  std::vector<Atom> atoms;
  std::vector<AtomOrigin> origin;
  std::size_t matrix_kept = 0;
  std::size_t matrix_removed = 0;
};

/// Places particles into the matrix, removing matrix atoms closer than `clearance`
/// to any particle atom. Throws ParticleCollision when two placed particles come
/// within `clearance` of each other, TooLarge when the result exceeds max_atoms,
/// InvalidArgument for a bad particle index or a non-unit quaternion.
Composite assemble(const std::vector<Atom>& matrix, const std::vector<std::vector<Atom>>& particles,
                   const std::vector<Placement>& placements, double clearance, std::size_t max_atoms = 1000000);

Vec3 rotate(const std::array<double, 4>& q, const Vec3& v);

/// Plain XYZ: count, comment line, then "species x y z" with 6 decimals, LF endings.
std::string to_xyz(const std::vector<Atom>& atoms, const std::string& comment = "");
void write_xyz(const std::vector<Atom>& atoms, const std::string& path, const std::string& comment = "");
std::vector<Atom> parse_xyz(const std::string& text);
std::vector<Atom> read_xyz(const std::string& path);

}  // namespace nanowb
