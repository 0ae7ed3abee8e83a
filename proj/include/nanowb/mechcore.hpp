#pragma once

// Mesh, material and per-cell state shared by the solver, mesogen and analysis.
//
// Units are fixed: lengths in um, time in us, mass in pg, stress in GPa.
// 1 pg/um^3 * (um/us)^2 = 1 GPa, so no conversion factors appear anywhere.

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace nanowb {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

/// Deviatoric stress (or any symmetric traceless tensor with an out-of-plane zz).
struct Deviator {
  double xx = 0.0;
  double yy = 0.0;
  double xy = 0.0;
  double zz = 0.0;

  /// Full double contraction s:s, counting the xy/yx pair twice.
  double contract(const Deviator& o) const { return xx * o.xx + yy * o.yy + zz * o.zz + 2.0 * xy * o.xy; }
  double von_mises() const { return std::sqrt(1.5 * contract(*this)); }
  double trace() const { return xx + yy + zz; }
};

/// Record of one fracture split: cells in `moved_cells` now reference `duplicate`.
struct SplitRecord {
  int original = 0;
  int duplicate = 0;
  std::vector<int> moved_cells;
};

/// Lagrangian quadrilateral mesh. Nodes are row-major, id = j*(nx+1)+i; cell (i,j)
/// owns nodes (i,j),(i+1,j),(i+1,j+1),(i,j+1) counterclockwise. Fracture appends
/// duplicate nodes past the original (nx+1)*(ny+1) block.
struct Grid2D {
  int nx = 0;
  int ny = 0;
  std::vector<double> node_x;
  std::vector<double> node_y;
  std::vector<std::array<int, 4>> cell_nodes;
  std::vector<SplitRecord> split_nodes;
  /// Original (logical) node each node descends from; identity for unsplit nodes.
  std::vector<int> node_origin;

  int num_nodes() const { return static_cast<int>(node_x.size()); }
  int num_cells() const { return static_cast<int>(cell_nodes.size()); }
  int node_index(int i, int j) const { return j * (nx + 1) + i; }
  int cell_index(int i, int j) const { return j * nx + i; }
  int cell_i(int cell) const { return cell % nx; }
  int cell_j(int cell) const { return cell / nx; }
  int node_i(int node) const { return node_origin[node] % (nx + 1); }
  int node_j(int node) const { return node_origin[node] / (nx + 1); }

  std::array<Vec2, 4> corners(int cell) const;
  Vec2 centroid(int cell) const;
};

/// Shoelace area of a quad given counterclockwise corners (negative when inverted).
double quad_area(const std::array<Vec2, 4>& c);

struct MaterialModel {
  std::string name;
  double rho0 = 0.0;     // pg/um^3
  double K = 0.0;        // bulk modulus, GPa
  double G = 0.0;        // shear modulus, GPa
  double sigma_y = 0.0;  // base yield strength, GPa
  double hardening = 0.0;

  /// Throws InvalidArgument unless every modulus and the density are positive.
  void validate() const;
  double p_wave_modulus() const { return K + 4.0 * G / 3.0; }
  double sound_speed(double rho) const { return std::sqrt(p_wave_modulus() / rho); }
};

/// Per-cell thermomechanical state. Total stress is sigma = -P*delta + s; the
/// artificial viscosity q acts as an extra pressure in the momentum balance only.
struct CellState {
  Deviator s;
  double P = 0.0;
  double q = 0.0;
  double rho = 0.0;
  double V = 0.0;   // current volume (um^3 per unit thickness in plane strain)
  double V0 = 0.0;  // reference volume
  double h = 1.0;   // thickness, evolves only in plane stress
  double mass = 0.0;
  Deviator eps_p;  // accumulated plastic strain tensor
  double eq_plastic = 0.0;
  double yield = 0.0;  // current cell yield strength
  double div_rate = 0.0;  // last volumetric strain rate, used by the time-step control
  double hg_x = 0.0;  // hourglass generalized forces
  double hg_y = 0.0;
  int material = 0;

  double sigma_xx() const { return -P + s.xx; }
  double sigma_yy() const { return -P + s.yy; }
  double sigma_zz() const { return -P + s.zz; }
  double sigma_xy() const { return s.xy; }
};

/// Full symmetric stress with its hydrostatic/deviatoric split.
struct StressTensor {
  double xx = 0.0, yy = 0.0, xy = 0.0, zz = 0.0;
};
StressTensor compose_stress(double P, const Deviator& s);
void split_stress(const StressTensor& sigma, double& P, Deviator& s);

/// Grain tessellation over the cells and per-grain yield scaling.
struct GrainMap {
  std::vector<int> grain_id;         // per cell
  std::vector<double> yield_factor;  // per grain
  std::vector<Vec2> seed_points;     // per grain

  int num_grains() const { return static_cast<int>(seed_points.size()); }
};

/// Regular rectangular mesh with lower-left corner at the origin.
Grid2D build_grid(int nx, int ny, double width, double height);

/// Current volume of one cell (area times thickness). Throws MeshTangled when inverted.
double cell_volume(const Grid2D& grid, int cell, double thickness = 1.0);

/// Lumped nodal masses: every cell gives rho*V/4 to each of its nodes.
std::vector<double> lump_masses(const Grid2D& grid, std::span<const CellState> cells);

/// Initializes one cell per grid cell at rest with material `m`, unit thickness.
std::vector<CellState> make_cells(const Grid2D& grid, const MaterialModel& m, int material_index = 0);

}  // namespace nanowb
