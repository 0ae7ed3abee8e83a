#include "nanowb/errors.hpp"
#include "nanowb/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nanowb {
namespace {

// Contour-integral gradient weights: d(f)/dx = sum bx[a] f[a] / A.
struct GradientWeights {
  std::array<double, 4> bx;
  std::array<double, 4> by;
  double area;
};

GradientWeights gradient_weights(const std::array<Vec2, 4>& x) {
  GradientWeights w;
  w.area = 0.0;
  for (int a = 0; a < 4; ++a) {
    const Vec2& next = x[(a + 1) & 3];
    const Vec2& prev = x[(a + 3) & 3];
    w.bx[a] = 0.5 * (next.y - prev.y);
    w.by[a] = 0.5 * (prev.x - next.x);
    w.area += w.bx[a] * x[a].x;
  }
  return w;
}

}  // namespace

double StrainRateSample::max_abs() const {
  return std::max({std::abs(exx), std::abs(eyy), std::abs(exy), std::abs(ezz), std::abs(wz)});
}

void Schedule::validate() const {
  if (!(dt_safety > 0.0 && dt_safety <= 0.9)) throw InvalidArgument("schedule: dt_safety must be in (0, 0.9]");
  if (!(load.ramp_transits > 0.0)) throw InvalidArgument("schedule: ramp time must be positive");
  if (!(load.hold_transits >= 0.0)) throw InvalidArgument("schedule: hold time must be >= 0");
  if (!std::isfinite(load.target_strain)) throw InvalidArgument("schedule: target_strain must be finite");
  if (!(c_L >= 0.0) || !(c_Q >= 0.0)) throw InvalidArgument("schedule: viscosity coefficients must be >= 0");
  if (!(hourglass >= 0.0)) throw InvalidArgument("schedule: hourglass coefficient must be >= 0");
  if (frames < 1) throw InvalidArgument("schedule: frames must be >= 1");
  if (!(thickness > 0.0)) throw InvalidArgument("schedule: thickness must be positive");
  if (fracture.check_every < 1) throw InvalidArgument("schedule: fracture.check_every must be >= 1");
}

StrainRateSample strain_rates(const std::array<Vec2, 4>& x, const std::array<Vec2, 4>& v, int cell) {
  const GradientWeights w = gradient_weights(x);
  if (!(w.area > 0.0)) throw MeshTangled(cell, "degenerate or inverted quad in strain_rates");
  double dvxdx = 0.0, dvxdy = 0.0, dvydx = 0.0, dvydy = 0.0;
  for (int a = 0; a < 4; ++a) {
    dvxdx += w.bx[a] * v[a].x;
    dvxdy += w.by[a] * v[a].x;
    dvydx += w.bx[a] * v[a].y;
    dvydy += w.by[a] * v[a].y;
  }
  const double inv = 1.0 / w.area;
  StrainRateSample r;
  r.exx = dvxdx * inv;
  r.eyy = dvydy * inv;
  r.exy = 0.5 * (dvydx + dvxdy) * inv;
  r.wz = 0.5 * (dvydx - dvxdy) * inv;
  r.ezz = 0.0;
  return r;
}

double continuity_residual(double V_old, double V_new, const StrainRateSample& rates, double dt) {
  return V_new / V_old - (1.0 + rates.trace() * dt);
}

double pressure_update(double rho, double rho0, double K) { return K * (rho / rho0 - 1.0); }

Deviator deviatoric_trial(const Deviator& s_old, const StrainRateSample& rates, double G, double dt) {
  const double theta = rates.wz * dt;
  const double c = std::cos(theta), s = std::sin(theta);
  const double c2 = c * c, s2 = s * s, cs = c * s;
  Deviator t;
  t.xx = c2 * s_old.xx - 2.0 * cs * s_old.xy + s2 * s_old.yy;
  t.yy = s2 * s_old.xx + 2.0 * cs * s_old.xy + c2 * s_old.yy;
  t.xy = cs * (s_old.xx - s_old.yy) + (c2 - s2) * s_old.xy;

  const double third = rates.trace() / 3.0;
  const double g2dt = 2.0 * G * dt;
  t.xx += g2dt * (rates.exx - third);
  t.yy += g2dt * (rates.eyy - third);
  t.xy += g2dt * rates.exy;
  t.zz = -(t.xx + t.yy);
  return t;
}

PlasticUpdate radial_return(const Deviator& s_trial, double sigma_y_cell, double G, double dt, double hardening) {
  PlasticUpdate u;
  const double vm = s_trial.von_mises();
  if (vm <= sigma_y_cell) {
    u.s_new = s_trial;
    return u;
  }
  double ratio;
  double yield_new = sigma_y_cell;
  if (hardening > 0.0) {
    const double dgamma = (vm - sigma_y_cell) / (3.0 * G + hardening);
    yield_new = sigma_y_cell + hardening * dgamma;
    ratio = yield_new / vm;
  } else {
    ratio = sigma_y_cell / vm;
  }
  u.s_new = {s_trial.xx * ratio, s_trial.yy * ratio, s_trial.xy * ratio, s_trial.zz * ratio};
  const double inv2g = 1.0 / (2.0 * G);
  u.d_eps_p = {(s_trial.xx - u.s_new.xx) * inv2g, (s_trial.yy - u.s_new.yy) * inv2g,
               (s_trial.xy - u.s_new.xy) * inv2g, (s_trial.zz - u.s_new.zz) * inv2g};
  u.d_eq_plastic = std::sqrt(2.0 / 3.0 * u.d_eps_p.contract(u.d_eps_p));
  u.lambda_dot = dt > 0.0 ? u.d_eq_plastic * 3.0 / (2.0 * yield_new * dt) : 0.0;
  return u;
}

double artificial_viscosity(const StrainRateSample& rates, double rho, double area, double c_L, double c_Q,
                            double sound_speed) {
  const double tr = rates.trace();
  if (!(tr < 0.0)) return 0.0;
  const double a = std::sqrt(area);
  return rho * (c_Q * c_Q * a * a * tr * tr + c_L * a * sound_speed * std::abs(tr));
}

std::array<Vec2, 4> corner_forces(const std::array<Vec2, 4>& x, const StressTensor& sigma, double thickness) {
  const GradientWeights w = gradient_weights(x);
  std::array<Vec2, 4> f;
  for (int a = 0; a < 4; ++a) {
    f[a].x = -thickness * (sigma.xx * w.bx[a] + sigma.xy * w.by[a]);
    f[a].y = -thickness * (sigma.xy * w.bx[a] + sigma.yy * w.by[a]);
  }
  return f;
}

std::array<Vec2, 4> edge_traction_split(const std::array<Vec2, 4>& x, const StressTensor& sigma, double thickness) {
  auto f = corner_forces(x, sigma, thickness);
  for (auto& v : f) {
    v.x = -v.x;
    v.y = -v.y;
  }
  return f;
}

ConstitutiveResult constitutive_update(const CellState& cell, const MaterialModel& m, const StrainRateSample& rates,
                                       double area_new, double dt, StressMode mode) {
  StrainRateSample r = rates;
  if (mode == StressMode::plane_strain) r.ezz = 0.0;

  ConstitutiveResult out;
  CellState& n = out.cell;
  n = cell;
  if (mode == StressMode::plane_stress) n.h = cell.h * (1.0 + r.ezz * dt);
  n.V = area_new * n.h;
  n.rho = cell.mass / n.V;
  n.P = pressure_update(n.rho, m.rho0, m.K);

  const Deviator trial = deviatoric_trial(cell.s, r, m.G, dt);
  out.plastic = radial_return(trial, cell.yield, m.G, dt, m.hardening);
  n.s = out.plastic.s_new;
  if (out.plastic.plastic()) {
    n.eps_p.xx += out.plastic.d_eps_p.xx;
    n.eps_p.yy += out.plastic.d_eps_p.yy;
    n.eps_p.xy += out.plastic.d_eps_p.xy;
    n.eps_p.zz += out.plastic.d_eps_p.zz;
    n.eq_plastic += out.plastic.d_eq_plastic;
    if (m.hardening > 0.0) n.yield = cell.yield + m.hardening * out.plastic.d_eq_plastic;
  }
  n.div_rate = r.trace();
  return out;
}

PlaneStressClosure plane_stress_closure(const CellState& cell, StrainRateSample rates, const MaterialModel& m,
                                        double area_new, double dt, int cell_id, long step) {
  constexpr int kMaxIterations = 8;
  const double tol = 1e-6 * cell.yield;
  const double tangent = m.p_wave_modulus() * dt;

  auto evaluate = [&](double ezz, ConstitutiveResult& res) {
    rates.ezz = ezz;
    res = constitutive_update(cell, m, rates, area_new, dt, StressMode::plane_stress);
    return res.cell.sigma_zz();
  };

  PlaneStressClosure out;
  double e0 = -(3.0 * m.K - 2.0 * m.G) / (3.0 * m.K + 4.0 * m.G) * (rates.exx + rates.eyy);
  double f0 = evaluate(e0, out.result);
  if (std::abs(f0) <= tol) {
    out.ezz = e0;
    out.h = out.result.cell.h;
    return out;
  }
  double e1 = e0 - f0 / tangent;
  for (int it = 1; it <= kMaxIterations; ++it) {
    const double f1 = evaluate(e1, out.result);
    out.iterations = it;
    if (std::abs(f1) <= tol) {
      out.ezz = e1;
      out.h = out.result.cell.h;
      return out;
    }
    const double slope = (f1 != f0 && e1 != e0) ? (f1 - f0) / (e1 - e0) : tangent;
    const double e2 = e1 - f1 / (slope > 0.0 ? slope : tangent);
    e0 = e1;
    f0 = f1;
    e1 = e2;
  }
  throw NumericalFailure(step, cell_id, "plane-stress closure did not converge");
}

void nodal_forces(const Grid2D& grid, std::span<const CellState> cells, NodalState& nodes) {
  nodes.fx.assign(grid.num_nodes(), 0.0);
  nodes.fy.assign(grid.num_nodes(), 0.0);
  for (int c = 0; c < grid.num_cells(); ++c) {
    const auto& cs = cells[c];
    const StressTensor sig = compose_stress(cs.P + cs.q, cs.s);
    const auto f = corner_forces(grid.corners(c), sig, cs.h);
    const auto& ids = grid.cell_nodes[c];
    for (int a = 0; a < 4; ++a) {
      nodes.fx[ids[a]] += f[a].x;
      nodes.fy[ids[a]] += f[a].y;
    }
  }
}

void integrate_motion(NodalState& nodes, std::span<double> x, std::span<double> y, double dt,
                      std::span<const VelocityConstraint> constraints, long step, std::span<double> rx,
                      std::span<double> ry) {
  const std::size_t nn = x.size();
  const bool reactions = !rx.empty() && !ry.empty();
  for (std::size_t n = 0; n < nn; ++n) {
    const double vxo = nodes.vx[n], vyo = nodes.vy[n];
    const double inv_m = 1.0 / nodes.mass[n];
    double vx = vxo + nodes.fx[n] * inv_m * dt;
    double vy = vyo + nodes.fy[n] * inv_m * dt;
    double rfx = 0.0, rfy = 0.0;
    if (!constraints.empty()) {
      const auto& bc = constraints[n];
      if (bc.fix_x) {
        vx = bc.vx;
        rfx = nodes.mass[n] * (vx - vxo) / dt - nodes.fx[n];
      }
      if (bc.fix_y) {
        vy = bc.vy;
        rfy = nodes.mass[n] * (vy - vyo) / dt - nodes.fy[n];
      }
    }
    if (!std::isfinite(vx) || !std::isfinite(vy))
      throw NumericalFailure(step, -1, "non-finite velocity at node " + std::to_string(n));
    nodes.vx[n] = vx;
    nodes.vy[n] = vy;
    x[n] += vx * dt;
    y[n] += vy * dt;
    if (reactions) {
      rx[n] = rfx;
      ry[n] = rfy;
    }
  }
}

double cell_stable_dt(const std::array<Vec2, 4>& x, const CellState& cs, const MaterialModel& m, double c_L,
                      double c_Q) {
  double longest = 0.0;
  for (int a = 0; a < 4; ++a) {
    const double dx = x[(a + 1) & 3].x - x[a].x, dy = x[(a + 1) & 3].y - x[a].y;
    longest = std::max(longest, dx * dx + dy * dy);
  }
  const double l = quad_area(x) / std::sqrt(longest);
  const double c = m.sound_speed(cs.rho);
  const double corr = cs.div_rate < 0.0 ? c_L * c + 2.0 * c_Q * c_Q * l * std::abs(cs.div_rate) : 0.0;
  return l / (c + corr);
}

double stable_dt(const Grid2D& grid, std::span<const CellState> cells, std::span<const MaterialModel> materials,
                 double dt_safety, double c_L, double c_Q) {
  double best = std::numeric_limits<double>::infinity();
  int arg = -1;
  for (int c = 0; c < grid.num_cells(); ++c) {
    const double d = cell_stable_dt(grid.corners(c), cells[c], materials[cells[c].material], c_L, c_Q);
    if (!(d > 0.0) || !std::isfinite(d)) throw NumericalFailure(-1, c, "non-positive or non-finite stable time step");
    if (d < best) {
      best = d;
      arg = c;
    }
  }
  const double dt = dt_safety * best;
  if (!(dt > 0.0) || !std::isfinite(dt)) throw NumericalFailure(-1, arg, "non-positive or non-finite stable time step");
  return dt;
}

}  // namespace nanowb
