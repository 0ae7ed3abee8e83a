#include "nanowb/errors.hpp"
#include "nanowb/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nanowb {
namespace {

struct QuadWeights {
  std::array<double, 4> bx, by;
  double area;
};

QuadWeights quad_weights(const std::array<Vec2, 4>& x) {
  QuadWeights w;
  w.area = 0.0;
  for (int a = 0; a < 4; ++a) {
    w.bx[a] = 0.5 * (x[(a + 1) & 3].y - x[(a + 3) & 3].y);
    w.by[a] = 0.5 * (x[(a + 3) & 3].x - x[(a + 1) & 3].x);
    w.area += w.bx[a] * x[a].x;
  }
  return w;
}

// Flanagan-Belytschko hourglass shape vector, orthogonal to every linear field.
std::array<double, 4> hourglass_vector(const std::array<Vec2, 4>& x, const QuadWeights& w) {
  constexpr double gamma[4] = {1.0, -1.0, 1.0, -1.0};
  double hx = 0.0, hy = 0.0;
  for (int a = 0; a < 4; ++a) {
    hx += gamma[a] * x[a].x;
    hy += gamma[a] * x[a].y;
  }
  std::array<double, 4> g;
  for (int a = 0; a < 4; ++a) g[a] = gamma[a] - (hx * w.bx[a] + hy * w.by[a]) / w.area;
  return g;
}

}  // namespace

Simulation::Simulation(Grid2D grid, std::vector<MaterialModel> materials, std::vector<CellState> cells,
                       Schedule schedule)
    : grid_(std::move(grid)), materials_(std::move(materials)), cells_(std::move(cells)), schedule_(schedule) {
  schedule_.validate();
  if (materials_.empty()) throw InvalidArgument("simulation: at least one material is required");
  for (const auto& m : materials_) m.validate();
  if (static_cast<int>(cells_.size()) != grid_.num_cells())
    throw InvalidArgument("simulation: cell state count does not match the grid");
  for (int c = 0; c < grid_.num_cells(); ++c) {
    const auto& cs = cells_[c];
    if (cs.material < 0 || cs.material >= static_cast<int>(materials_.size()))
      throw InvalidArgument("simulation: cell material index out of range");
    if (!(cs.rho > 0.0) || !(cs.V > 0.0) || !(cs.h > 0.0) || !(cs.mass > 0.0) || !(cs.yield > 0.0))
      throw InvalidArgument("simulation: cell " + std::to_string(c) + " has non-positive rho/V/h/mass/yield");
  }

  const int nn = grid_.num_nodes();
  nodes_.vx.assign(nn, 0.0);
  nodes_.vy.assign(nn, 0.0);
  nodes_.fx.assign(nn, 0.0);
  nodes_.fy.assign(nn, 0.0);
  constraints_.assign(nn, {});
  rx_.assign(nn, 0.0);
  ry_.assign(nn, 0.0);
  rebuild_adjacency();
  nodes_.mass.assign(nn, 0.0);
  for (int n = 0; n < nn; ++n) relump_node(n);

  bounds_[0] = *std::min_element(grid_.node_x.begin(), grid_.node_x.end());
  bounds_[1] = *std::max_element(grid_.node_x.begin(), grid_.node_x.end());
  bounds_[2] = *std::min_element(grid_.node_y.begin(), grid_.node_y.end());
  bounds_[3] = *std::max_element(grid_.node_y.begin(), grid_.node_y.end());
}

CellState& Simulation::cell(int c) {
  forces_dirty_ = true;
  dt_valid_ = false;
  return cells_.at(c);
}

void Simulation::set_velocity(int node, double vx, double vy) {
  nodes_.vx.at(node) = vx;
  nodes_.vy.at(node) = vy;
}

void Simulation::constrain(int node, VelocityConstraint bc) { constraints_.at(node) = bc; }

void Simulation::set_prescribed(int node, double vx, double vy) {
  auto& bc = constraints_.at(node);
  bc.vx = vx;
  bc.vy = vy;
}

void Simulation::rebuild_adjacency() {
  node_cells_.assign(grid_.num_nodes(), {});
  for (int c = 0; c < grid_.num_cells(); ++c)
    for (int n : grid_.cell_nodes[c]) node_cells_[n].push_back(c);
}

void Simulation::relump_node(int n) {
  double m = 0.0;
  for (int c : node_cells_[n]) m += 0.25 * cells_[c].mass;
  nodes_.mass[n] = m;
}

double Simulation::stable_dt() const {
  if (!dt_valid_) {
    cached_dt_ = nanowb::stable_dt(grid_, cells_, materials_, schedule_.dt_safety, schedule_.c_L, schedule_.c_Q);
    dt_valid_ = true;
  }
  return cached_dt_;
}

void Simulation::accumulate_cell_forces(int c, const std::array<Vec2, 4>& x) {
  const CellState& cs = cells_[c];
  const QuadWeights w = quad_weights(x);
  const double sxx = -(cs.P + cs.q) + cs.s.xx;
  const double syy = -(cs.P + cs.q) + cs.s.yy;
  const double sxy = cs.s.xy;
  const auto& ids = grid_.cell_nodes[c];
  std::array<double, 4> hg{0.0, 0.0, 0.0, 0.0};
  const bool hourglass = schedule_.hourglass > 0.0;
  if (hourglass) hg = hourglass_vector(x, w);
  for (int a = 0; a < 4; ++a) {
    double fx = -cs.h * (sxx * w.bx[a] + sxy * w.by[a]);
    double fy = -cs.h * (sxy * w.bx[a] + syy * w.by[a]);
    if (hourglass) {
      fx -= cs.hg_x * hg[a];
      fy -= cs.hg_y * hg[a];
    }
    nodes_.fx[ids[a]] += fx;
    nodes_.fy[ids[a]] += fy;
  }
}

void Simulation::refresh_forces() {
  std::fill(nodes_.fx.begin(), nodes_.fx.end(), 0.0);
  std::fill(nodes_.fy.begin(), nodes_.fy.end(), 0.0);
  for (int c = 0; c < grid_.num_cells(); ++c) accumulate_cell_forces(c, grid_.corners(c));
  forces_dirty_ = false;
}

double Simulation::kinetic_energy() const {
  double ke = 0.0;
  for (int n = 0; n < grid_.num_nodes(); ++n)
    ke += 0.5 * nodes_.mass[n] * (nodes_.vx[n] * nodes_.vx[n] + nodes_.vy[n] * nodes_.vy[n]);
  return ke;
}

double Simulation::elastic_energy() const {
  double e = 0.0;
  for (const auto& cs : cells_) {
    const auto& m = materials_[cs.material];
    const double x = cs.V / cs.V0 - 1.0;
    e += m.K * cs.V0 * (x - std::log1p(x)) + cs.s.contract(cs.s) / (4.0 * m.G) * cs.V;
  }
  return e;
}

EnergyLedger Simulation::energy() const {
  EnergyLedger l;
  l.external_work = external_work_;
  l.kinetic = kinetic_energy();
  l.elastic = elastic_energy();
  l.kinetic0 = baseline_ ? kinetic0_ : l.kinetic;
  l.elastic0 = baseline_ ? elastic0_ : l.elastic;
  l.plastic = plastic_work_;
  l.viscous = viscous_work_;
  l.hourglass = hourglass_work_;
  return l;
}

void Simulation::step(double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw NumericalFailure(step_, -1, "invalid time step");
  if (!baseline_) {
    kinetic0_ = kinetic_energy();
    elastic0_ = elastic_energy();
    baseline_ = true;
  }
  if (forces_dirty_) refresh_forces();

  integrate_motion(nodes_, grid_.node_x, grid_.node_y, dt, constraints_, step_, rx_, ry_);
  for (int n = 0; n < grid_.num_nodes(); ++n) {
    const auto& bc = constraints_[n];
    if (bc.fix_x) external_work_ += rx_[n] * nodes_.vx[n] * dt;
    if (bc.fix_y) external_work_ += ry_[n] * nodes_.vy[n] * dt;
  }

  std::fill(nodes_.fx.begin(), nodes_.fx.end(), 0.0);
  std::fill(nodes_.fy.begin(), nodes_.fy.end(), 0.0);
  if (record_updates_) last_updates_.assign(grid_.num_cells(), {});

  const StressMode mode = schedule_.mode;
  const double kappa = schedule_.hourglass;
  double min_dt = std::numeric_limits<double>::infinity();
  const double half_dt = 0.5 * dt;

  for (int c = 0; c < grid_.num_cells(); ++c) {
    const auto& ids = grid_.cell_nodes[c];
    std::array<Vec2, 4> xn, xm, v;
    for (int a = 0; a < 4; ++a) {
      const int n = ids[a];
      v[a] = {nodes_.vx[n], nodes_.vy[n]};
      xn[a] = {grid_.node_x[n], grid_.node_y[n]};
      xm[a] = {xn[a].x - half_dt * v[a].x, xn[a].y - half_dt * v[a].y};
    }
    StrainRateSample rates = strain_rates(xm, v, c);
    const double area_new = quad_area(xn);
    if (!(area_new > 0.0)) throw MeshTangled(c, "cell inverted at step " + std::to_string(step_));

    const CellState& old = cells_[c];
    const MaterialModel& mat = materials_[old.material];
    ConstitutiveResult res;
    if (mode == StressMode::plane_strain) {
      res = constitutive_update(old, mat, rates, area_new, dt, mode);
    } else {
      auto closure = plane_stress_closure(old, rates, mat, area_new, dt, c, step_);
      rates.ezz = closure.ezz;
      res = std::move(closure.result);
    }
    CellState& nc = res.cell;

    viscous_work_ -= old.q * (nc.V - old.V);
    if (res.plastic.plastic()) plastic_work_ += nc.s.contract(res.plastic.d_eps_p) * nc.V;

    const double resid = continuity_residual(old.V, nc.V, rates, dt);
    const double bound = 10.0 * (rates.max_abs() * dt) * (rates.max_abs() * dt) + 1e-13;
    continuity_excess_ = std::max(continuity_excess_, std::abs(resid) - bound);

    nc.q = artificial_viscosity(rates, nc.rho, area_new, schedule_.c_L, schedule_.c_Q, mat.sound_speed(nc.rho));

    if (kappa > 0.0) {
      const QuadWeights wm = quad_weights(xm);
      const auto g = hourglass_vector(xm, wm);
      double qx = 0.0, qy = 0.0, b2 = 0.0;
      for (int a = 0; a < 4; ++a) {
        qx += g[a] * v[a].x;
        qy += g[a] * v[a].y;
        b2 += wm.bx[a] * wm.bx[a] + wm.by[a] * wm.by[a];
      }
      hourglass_work_ += (old.hg_x * qx + old.hg_y * qy) * dt;
      const double k = kappa * mat.G * nc.h * b2 / wm.area;
      nc.hg_x = old.hg_x + k * qx * dt;
      nc.hg_y = old.hg_y + k * qy * dt;
    }

    if (!std::isfinite(nc.P) || !std::isfinite(nc.s.xx) || !std::isfinite(nc.s.yy) || !std::isfinite(nc.s.xy))
      throw NumericalFailure(step_, c, "non-finite stress");

    if (record_updates_) last_updates_[c] = res.plastic;
    cells_[c] = nc;
    accumulate_cell_forces(c, xn);
    min_dt = std::min(min_dt, cell_stable_dt(xn, nc, mat, schedule_.c_L, schedule_.c_Q));
  }
  forces_dirty_ = false;
  cached_dt_ = schedule_.dt_safety * min_dt;
  dt_valid_ = true;
  if (!(cached_dt_ > 0.0) || !std::isfinite(cached_dt_))
    throw NumericalFailure(step_, -1, "non-positive or non-finite stable time step");
  time_ += dt;
  ++step_;
}

bool Simulation::split_node(int node, bool vertical_line) {
  if (node < 0 || node >= grid_.num_nodes()) throw InvalidArgument("split_node: node out of range");
  const auto& bc = constraints_[node];
  if (bc.fix_x || bc.fix_y) {
    log_.push_back("skipped split of constrained node " + std::to_string(node));
    return false;
  }
  const int ni = grid_.node_i(node), nj = grid_.node_j(node);
  std::vector<int> keep, moved;
  for (int c : node_cells_[node]) {
    const bool second = vertical_line ? grid_.cell_i(c) >= ni : grid_.cell_j(c) >= nj;
    (second ? moved : keep).push_back(c);
  }
  if (keep.empty() || moved.empty()) return false;

  const int dup = grid_.num_nodes();
  grid_.node_x.push_back(grid_.node_x[node]);
  grid_.node_y.push_back(grid_.node_y[node]);
  grid_.node_origin.push_back(grid_.node_origin[node]);
  nodes_.vx.push_back(nodes_.vx[node]);
  nodes_.vy.push_back(nodes_.vy[node]);
  nodes_.fx.push_back(0.0);
  nodes_.fy.push_back(0.0);
  nodes_.mass.push_back(0.0);
  constraints_.push_back({});
  rx_.push_back(0.0);
  ry_.push_back(0.0);
  for (int c : moved) {
    for (int& id : grid_.cell_nodes[c])
      if (id == node) id = dup;
  }
  grid_.split_nodes.push_back({node, dup, moved});
  node_cells_[node] = keep;
  node_cells_.push_back(moved);
  relump_node(node);
  relump_node(dup);
  forces_dirty_ = true;
  return true;
}

int Simulation::split_nodes(const FractureSettings& settings) {
  struct Candidate {
    int node;
    bool vertical;
  };
  std::vector<Candidate> candidates;
  for (int n = 0; n < grid_.num_nodes(); ++n) {
    const auto& inc = node_cells_[n];
    if (inc.size() < 2) continue;
    double eq = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (int c : inc) {
      const auto& cs = cells_[c];
      eq += cs.eq_plastic;
      sxx += cs.sigma_xx();
      syy += cs.sigma_yy();
      sxy += cs.sigma_xy();
    }
    const double w = 1.0 / static_cast<double>(inc.size());
    eq *= w;
    sxx *= w;
    syy *= w;
    sxy *= w;
    const double mean = 0.5 * (sxx + syy);
    const double radius = std::hypot(0.5 * (sxx - syy), sxy);
    const double s1 = mean + radius;
    if (!(eq >= settings.eps_frac && s1 >= settings.sigma_frac)) continue;
    const double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    candidates.push_back({n, std::abs(std::cos(theta)) >= std::abs(std::sin(theta))});
  }
  int count = 0;
  for (const auto& cand : candidates)
    if (split_node(cand.node, cand.vertical)) ++count;
  return count;
}

const std::vector<std::string>& Simulation::field_names() {
  static const std::vector<std::string> names = {
      "eq_plastic", "eq_plastic_accum", "von_mises", "pressure", "sigma_xx", "sigma_yy", "sigma_xy",
      "sigma_zz",   "s_xx",             "s_yy",      "s_xy",     "s_zz",     "density",  "yield",
      "thickness",  "eps_p_xx",         "eps_p_yy",  "eps_p_xy", "eps_p_zz"};
  return names;
}

FieldFrame Simulation::frame(std::string_view field) const {
  FieldFrame f;
  f.name = std::string(field);
  f.time = time_;
  f.nx = grid_.nx;
  f.ny = grid_.ny;
  f.xmin = bounds_[0];
  f.xmax = bounds_[1];
  f.ymin = bounds_[2];
  f.ymax = bounds_[3];
  f.values.resize(cells_.size());
  auto fill = [&](auto&& get) {
    for (std::size_t c = 0; c < cells_.size(); ++c) f.values[c] = get(cells_[c]);
  };
  if (field == "eq_plastic") fill([](const CellState& c) { return plastic_strain_intensity(c.eps_p); });
  else if (field == "eq_plastic_accum") fill([](const CellState& c) { return c.eq_plastic; });
  else if (field == "von_mises") fill([](const CellState& c) { return c.s.von_mises(); });
  else if (field == "pressure") fill([](const CellState& c) { return c.P; });
  else if (field == "sigma_xx") fill([](const CellState& c) { return c.sigma_xx(); });
  else if (field == "sigma_yy") fill([](const CellState& c) { return c.sigma_yy(); });
  else if (field == "sigma_xy") fill([](const CellState& c) { return c.sigma_xy(); });
  else if (field == "sigma_zz") fill([](const CellState& c) { return c.sigma_zz(); });
  else if (field == "s_xx") fill([](const CellState& c) { return c.s.xx; });
  else if (field == "s_yy") fill([](const CellState& c) { return c.s.yy; });
  else if (field == "s_xy") fill([](const CellState& c) { return c.s.xy; });
  else if (field == "s_zz") fill([](const CellState& c) { return c.s.zz; });
  else if (field == "density") fill([](const CellState& c) { return c.rho; });
  else if (field == "yield") fill([](const CellState& c) { return c.yield; });
  else if (field == "thickness") fill([](const CellState& c) { return c.h; });
  else if (field == "eps_p_xx") fill([](const CellState& c) { return c.eps_p.xx; });
  else if (field == "eps_p_yy") fill([](const CellState& c) { return c.eps_p.yy; });
  else if (field == "eps_p_xy") fill([](const CellState& c) { return c.eps_p.xy; });
  else if (field == "eps_p_zz") fill([](const CellState& c) { return c.eps_p.zz; });
  else throw InvalidArgument("unknown field '" + std::string(field) + "'");
  return f;
}

}  // namespace nanowb
