#include "nanowb/errors.hpp"
#include "nanowb/mesogen.hpp"
#include "nanowb/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace nanowb {
namespace {

struct Loading {
  double ramp_time = 0.0;
  double hold_time = 0.0;
  double width = 0.0, height = 0.0;
  double xc = 0.0, yc = 0.0;
  std::vector<int> top, bottom;
  std::vector<int> perimeter;
};

Loading describe_loading(const Grid2D& grid, const MaterialModel& m, const LoadProgram& load) {
  Loading l;
  const double transit = transit_time(grid, m);
  l.ramp_time = load.ramp_transits * transit;
  l.hold_time = load.hold_transits * transit;
  const auto [xmin, xmax] = std::minmax_element(grid.node_x.begin(), grid.node_x.end());
  const auto [ymin, ymax] = std::minmax_element(grid.node_y.begin(), grid.node_y.end());
  l.width = *xmax - *xmin;
  l.height = *ymax - *ymin;
  l.xc = 0.5 * (*xmin + *xmax);
  l.yc = 0.5 * (*ymin + *ymax);
  for (int i = 0; i <= grid.nx; ++i) {
    l.top.push_back(grid.node_index(i, grid.ny));
    l.bottom.push_back(grid.node_index(i, 0));
  }
  for (int j = 0; j <= grid.ny; ++j)
    for (int i = 0; i <= grid.nx; ++i)
      if (i == 0 || j == 0 || i == grid.nx || j == grid.ny) l.perimeter.push_back(grid.node_index(i, j));
  return l;
}

// Grip separation speed at time t for the cosine ramp; zero during the hold.
double tension_speed(const Loading& l, const LoadProgram& load, double t) {
  if (t >= l.ramp_time) return 0.0;
  const double u = load.target_strain * l.height;
  const double v_peak = 2.0 * u / l.ramp_time;
  return v_peak * 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * t / l.ramp_time));
}

void apply_tension(Simulation& sim, const Loading& l, const LoadProgram& load, double t) {
  const double v = tension_speed(l, load, t);
  for (int n : l.top) sim.set_prescribed(n, 0.0, 0.5 * v);
  for (int n : l.bottom) sim.set_prescribed(n, 0.0, -0.5 * v);
}

double average_strain(const Simulation& sim, const Loading& l) {
  const auto& g = sim.grid();
  double top = 0.0, bottom = 0.0;
  for (int n : l.top) top += g.node_y[n];
  for (int n : l.bottom) bottom += g.node_y[n];
  const double k = 1.0 / static_cast<double>(l.top.size());
  return (top - bottom) * k / l.height - 1.0;
}

double average_stress(const Simulation& sim) {
  double sv = 0.0, v = 0.0;
  for (const auto& c : sim.cells()) {
    sv += c.sigma_yy() * c.V;
    v += c.V;
  }
  return sv / v;
}

HistoryRow history_row(const Simulation& sim, const Loading& l) {
  const EnergyLedger e = sim.energy();
  HistoryRow r;
  r.time = sim.time();
  r.avg_strain = average_strain(sim, l);
  r.avg_stress = average_stress(sim);
  r.kinetic = e.kinetic;
  r.internal = e.internal();
  r.external_work = e.external_work;
  r.plastic_work = e.plastic;
  r.viscous_work = e.viscous;
  r.hourglass_work = e.hourglass;
  return r;
}

}  // namespace

double transit_time(const Grid2D& grid, const MaterialModel& m) {
  const auto [xmin, xmax] = std::minmax_element(grid.node_x.begin(), grid.node_x.end());
  const auto [ymin, ymax] = std::minmax_element(grid.node_y.begin(), grid.node_y.end());
  return std::max(*xmax - *xmin, *ymax - *ymin) / m.sound_speed(m.rho0);
}

Simulation make_simulation(const SimulationSetup& setup) {
  setup.material.validate();
  setup.schedule.validate();
  const Grid2D& grid = setup.grid;
  std::vector<CellState> cells = make_cells(grid, setup.material, 0);
  const double t = setup.schedule.mode == StressMode::plane_stress ? setup.schedule.thickness : 1.0;
  if (t != 1.0) {
    for (auto& c : cells) {
      c.h = t;
      c.V = c.V0 = c.V * t;
      c.mass = c.rho * c.V;
    }
  }
  if (!setup.grains.grain_id.empty()) {
    if (static_cast<int>(setup.grains.grain_id.size()) != grid.num_cells())
      throw InvalidArgument("grain map does not match the grid");
    const auto y = cell_yields(setup.grains, setup.material.sigma_y);
    for (std::size_t c = 0; c < cells.size(); ++c) cells[c].yield = y[c];
  }

  Simulation sim(grid, {setup.material}, std::move(cells), setup.schedule);
  const LoadProgram& load = setup.schedule.load;
  const Loading l = describe_loading(grid, setup.material, load);
  if (load.type == LoadType::tension) {
    for (int n : l.top) sim.constrain(n, {false, true, 0.0, 0.0});
    for (int n : l.bottom) sim.constrain(n, {false, true, 0.0, 0.0});
    sim.constrain(grid.node_index(grid.nx / 2, 0), {true, true, 0.0, 0.0});
  } else {
    const double ey = load.target_strain / l.ramp_time;
    const double ex = load.lateral_ratio * ey;
    for (int n = 0; n < grid.num_nodes(); ++n)
      sim.set_velocity(n, ex * (grid.node_x[n] - l.xc), ey * (grid.node_y[n] - l.yc));
    for (int n : l.perimeter) {
      const auto& v = sim.nodes();
      sim.constrain(n, {true, true, v.vx[n], v.vy[n]});
    }
  }
  return sim;
}

RunResult run(const SimulationSetup& setup, const std::function<void(double)>& progress,
              const std::function<void(const Simulation&)>& on_step) {
  for (const auto& f : setup.fields) {
    const auto& known = Simulation::field_names();
    if (std::find(known.begin(), known.end(), f) == known.end())
      throw InvalidArgument("unknown output field '" + f + "'");
  }
  Simulation sim = make_simulation(setup);
  if (on_step) sim.record_updates(true);
  const Schedule& sched = setup.schedule;
  const LoadProgram& load = sched.load;
  const Loading l = describe_loading(setup.grid, setup.material, load);
  const double t_end = l.ramp_time + l.hold_time;

  RunResult out;
  out.ramp_time = l.ramp_time;

  constexpr int kHistoryRows = 200;
  const double history_dt = t_end / kHistoryRows;
  int next_history = 1;
  int next_frame = 1;
  const double eps_t = 1e-12 * t_end;
  out.history.push_back(history_row(sim, l));

  auto sample = [&]() {
    double ratio = 0.0;
    for (const auto& c : sim.cells()) ratio = std::max(ratio, c.s.von_mises() / c.yield);
    out.max_von_mises_ratio = std::max(out.max_von_mises_ratio, ratio);
  };

  bool affine_stopped = false;
  while (sim.time() < t_end - eps_t) {
    double dt = std::min(sim.stable_dt(), t_end - sim.time());
    if (load.type == LoadType::tension) {
      apply_tension(sim, l, load, sim.time() + 0.5 * dt);
    } else if (!affine_stopped && sim.time() + 0.5 * dt >= l.ramp_time) {
      for (int n : l.perimeter) sim.set_prescribed(n, 0.0, 0.0);
      affine_stopped = true;
    }
    sim.step(dt);
    if (on_step) on_step(sim);

    if (sched.fracture.enabled && sim.step_count() % sched.fracture.check_every == 0)
      out.nodes_split += sim.split_nodes(sched.fracture);

    while (next_history <= kHistoryRows && sim.time() >= next_history * history_dt - eps_t) {
      out.history.push_back(history_row(sim, l));
      sample();
      const auto& row = out.history.back();
      if (row.time > l.ramp_time && row.kinetic > 0.05 * row.internal) out.quasi_static = false;
      if (progress) progress(sim.time() / t_end);
      ++next_history;
    }
    while (next_frame <= sched.frames && sim.time() >= t_end * next_frame / sched.frames - eps_t) {
      for (const auto& f : setup.fields) out.frames.push_back(sim.frame(f));
      ++next_frame;
    }
  }
  // Guard against rounding leaving the final frame or row unwritten.
  while (next_frame <= sched.frames) {
    for (const auto& f : setup.fields) out.frames.push_back(sim.frame(f));
    ++next_frame;
  }
  if (out.history.back().time < sim.time()) out.history.push_back(history_row(sim, l));

  out.energy = sim.energy();
  out.steps = sim.step_count();
  out.end_time = sim.time();
  out.continuity_excess = sim.continuity_excess();
  if (!out.quasi_static)
    out.warnings.push_back("kinetic energy exceeded 5% of internal energy during the hold; run is not quasi-static");
  if (out.continuity_excess > 0.0)
    out.warnings.push_back("continuity residual exceeded its second-order bound");
  const double mismatch = std::abs(out.energy.mismatch());
  if (out.energy.external_work > 0.0 && mismatch > 0.01 * out.energy.external_work)
    out.warnings.push_back("energy ledger mismatch above 1% of external work");
  for (const auto& msg : sim.log()) out.warnings.push_back(msg);
  out.final_grid = sim.grid();
  out.final_cells = sim.cells();
  return out;
}

}  // namespace nanowb
