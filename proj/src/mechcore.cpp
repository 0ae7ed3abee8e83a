#include "nanowb/mechcore.hpp"

#include "nanowb/errors.hpp"

#include <numeric>

namespace nanowb {

std::array<Vec2, 4> Grid2D::corners(int cell) const {
  const auto& ids = cell_nodes[cell];
  std::array<Vec2, 4> c;
  for (int a = 0; a < 4; ++a) c[a] = {node_x[ids[a]], node_y[ids[a]]};
  return c;
}

Vec2 Grid2D::centroid(int cell) const {
  const auto c = corners(cell);
  return {0.25 * (c[0].x + c[1].x + c[2].x + c[3].x), 0.25 * (c[0].y + c[1].y + c[2].y + c[3].y)};
}

double quad_area(const std::array<Vec2, 4>& c) {
  // Diagonal form of the shoelace sum; exact for any simple quad.
  return 0.5 * ((c[2].x - c[0].x) * (c[3].y - c[1].y) - (c[3].x - c[1].x) * (c[2].y - c[0].y));
}

void MaterialModel::validate() const {
  if (!(rho0 > 0.0)) throw InvalidArgument("material '" + name + "': rho0 must be positive");
  if (!(K > 0.0)) throw InvalidArgument("material '" + name + "': K must be positive");
  if (!(G > 0.0)) throw InvalidArgument("material '" + name + "': G must be positive");
  if (!(sigma_y > 0.0)) throw InvalidArgument("material '" + name + "': sigma_y must be positive");
  if (!(hardening >= 0.0)) throw InvalidArgument("material '" + name + "': hardening must be >= 0");
}

StressTensor compose_stress(double P, const Deviator& s) {
  return {-P + s.xx, -P + s.yy, s.xy, -P + s.zz};
}

void split_stress(const StressTensor& sigma, double& P, Deviator& s) {
  P = -(sigma.xx + sigma.yy + sigma.zz) / 3.0;
  s = {sigma.xx + P, sigma.yy + P, sigma.xy, sigma.zz + P};
}

Grid2D build_grid(int nx, int ny, double width, double height) {
  if (nx < 1 || ny < 1) throw InvalidArgument("build_grid: nx and ny must be >= 1");
  if (!(width > 0.0) || !(height > 0.0) || !std::isfinite(width) || !std::isfinite(height))
    throw InvalidArgument("build_grid: width and height must be positive and finite");

  Grid2D g;
  g.nx = nx;
  g.ny = ny;
  const int nn = (nx + 1) * (ny + 1);
  g.node_x.resize(nn);
  g.node_y.resize(nn);
  g.node_origin.resize(nn);
  std::iota(g.node_origin.begin(), g.node_origin.end(), 0);
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      const int n = g.node_index(i, j);
      g.node_x[n] = width * i / nx;
      g.node_y[n] = height * j / ny;
    }
  }
  g.cell_nodes.resize(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      g.cell_nodes[g.cell_index(i, j)] = {g.node_index(i, j), g.node_index(i + 1, j),
                                          g.node_index(i + 1, j + 1), g.node_index(i, j + 1)};
    }
  }
  return g;
}

double cell_volume(const Grid2D& grid, int cell, double thickness) {
  if (cell < 0 || cell >= grid.num_cells()) throw InvalidArgument("cell_volume: cell id out of range");
  const double a = quad_area(grid.corners(cell));
  if (!(a > 0.0)) throw MeshTangled(cell, "non-positive cell area");
  return a * thickness;
}

std::vector<double> lump_masses(const Grid2D& grid, std::span<const CellState> cells) {
  std::vector<double> m(grid.num_nodes(), 0.0);
  for (int c = 0; c < grid.num_cells(); ++c) {
    const double quarter = 0.25 * cells[c].rho * cells[c].V;
    for (int n : grid.cell_nodes[c]) m[n] += quarter;
  }
  return m;
}

std::vector<CellState> make_cells(const Grid2D& grid, const MaterialModel& m, int material_index) {
  m.validate();
  std::vector<CellState> cells(grid.num_cells());
  for (int c = 0; c < grid.num_cells(); ++c) {
    auto& s = cells[c];
    s.V = s.V0 = cell_volume(grid, c);
    s.rho = m.rho0;
    s.mass = m.rho0 * s.V0;
    s.yield = m.sigma_y;
    s.material = material_index;
  }
  return cells;
}

}  // namespace nanowb
