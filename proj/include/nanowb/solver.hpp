#pragma once

// Explicit Lagrangian 2D elastic-plastic dynamics on quadrilaterals (Wilkins/HEMP
// lineage): one-point centroid gradients, staggered leapfrog in time, linear EOS
// for the pressure, Jaumann-rotated hypoelastic deviator with von Mises radial
// return, optional artificial viscosity, hourglass penalty and node-splitting
// fracture.

#include "nanowb/analysis.hpp"
#include "nanowb/mechcore.hpp"

#include <array>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nanowb {

enum class StressMode { plane_strain, plane_stress };

/// Centroid strain rates (1/us). exy is the tensor shear component.
struct StrainRateSample {
  double exx = 0.0;
  double eyy = 0.0;
  double exy = 0.0;
  double ezz = 0.0;
  double wz = 0.0;  // spin, 1/2 (dvy/dx - dvx/dy)

  double trace() const { return exx + eyy + ezz; }
  double max_abs() const;
};

struct PlasticUpdate {
  Deviator s_new;
  Deviator d_eps_p;
  double lambda_dot = 0.0;  // 1/(GPa us)
  double d_eq_plastic = 0.0;

  bool plastic() const { return lambda_dot > 0.0; }
};

enum class LoadType {
  tension,  // cosine velocity ramp on the top/bottom edges, then hold
  affine,   // homogeneous constant-rate field prescribed on the whole perimeter
};

struct LoadProgram {
  LoadType type = LoadType::tension;
  double target_strain = 0.007;
  /// Ramp and hold durations in P-wave transit times across the domain.
  double ramp_transits = 20.0;
  double hold_transits = 5.0;
  /// Affine loading only: lateral strain rate as a multiple of the axial one.
  double lateral_ratio = 0.0;
};

struct FractureSettings {
  bool enabled = false;
  double eps_frac = 0.5;    // nodal-averaged equivalent plastic strain threshold
  double sigma_frac = 1.0;  // nodal-averaged max principal stress threshold, GPa
  int check_every = 10;     // steps between split sweeps
};

struct Schedule {
  StressMode mode = StressMode::plane_strain;
  LoadProgram load;
  double dt_safety = 0.3;
  double c_L = 0.1;
  double c_Q = 2.0;
  double hourglass = 0.0;  // stiffness-type penalty coefficient; 0 disables
  FractureSettings fracture;
  int frames = 5;          // number of evenly spaced output frames
  double thickness = 1.0;  // initial thickness (um), plane stress

  /// Throws InvalidArgument when a field is out of range.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Kernels

/// Mean velocity gradient over the quad via the boundary contour integral.
/// Throws MeshTangled (carrying `cell`) for a non-positive area.
StrainRateSample strain_rates(const std::array<Vec2, 4>& x, const std::array<Vec2, 4>& v, int cell = -1);

/// V_new/V_old - (1 + trace*dt); geometry is primary, this is a consistency measure.
double continuity_residual(double V_old, double V_new, const StrainRateSample& rates, double dt);

/// Linear EOS, P = K (rho/rho0 - 1).
double pressure_update(double rho, double rho0, double K);

/// Rotates the old deviator by wz*dt (Jaumann) and adds the elastic increment.
Deviator deviatoric_trial(const Deviator& s_old, const StrainRateSample& rates, double G, double dt);

/// Von Mises radial return. With hardening > 0 the yield grows linearly with the
/// equivalent plastic strain; the returned s_new then sits on the updated surface.
PlasticUpdate radial_return(const Deviator& s_trial, double sigma_y_cell, double G, double dt, double hardening = 0.0);

/// Compression-only q = rho (c_Q^2 a^2 tr^2 + c_L a c |tr|), a = sqrt(area).
double artificial_viscosity(const StrainRateSample& rates, double rho, double area, double c_L, double c_Q,
                            double sound_speed);

/// Force the cell's stress exerts on each of its four nodes (per unit thickness times h).
/// Equal to minus the half-edge split of the boundary traction sigma.n.
std::array<Vec2, 4> corner_forces(const std::array<Vec2, 4>& x, const StressTensor& sigma, double thickness = 1.0);

/// Half-edge split of the contour integral of sigma.n around the quad.
std::array<Vec2, 4> edge_traction_split(const std::array<Vec2, 4>& x, const StressTensor& sigma,
                                        double thickness = 1.0);

struct ConstitutiveResult {
  CellState cell;
  PlasticUpdate plastic;
};

/// Volume/density/pressure/deviator update of one cell for one step. In plane strain
/// rates.ezz is ignored (treated as 0); in plane stress it drives the thickness.
ConstitutiveResult constitutive_update(const CellState& cell, const MaterialModel& m, const StrainRateSample& rates,
                                       double area_new, double dt, StressMode mode);

struct PlaneStressClosure {
  double ezz = 0.0;
  double h = 0.0;
  int iterations = 0;
  ConstitutiveResult result;
};

/// Chooses ezz so that sigma_zz = -P + s_zz vanishes after the full stress update
/// (|sigma_zz| <= 1e-6 * yield within 8 iterations, else NumericalFailure).
PlaneStressClosure plane_stress_closure(const CellState& cell, StrainRateSample rates, const MaterialModel& m,
                                        double area_new, double dt, int cell_id = -1, long step = -1);

struct NodalState {
  std::vector<double> vx, vy;
  std::vector<double> mass;
  std::vector<double> fx, fy;
};

struct VelocityConstraint {
  bool fix_x = false;
  bool fix_y = false;
  double vx = 0.0;
  double vy = 0.0;
};

/// Zeroes and re-accumulates nodal forces from total cell stresses (cells in index order).
void nodal_forces(const Grid2D& grid, std::span<const CellState> cells, NodalState& nodes);

/// Leapfrog: v += F/m dt, prescribed components overwritten, x += v dt. When the
/// reaction spans are non-empty they receive the force the constraint applied.
void integrate_motion(NodalState& nodes, std::span<double> x, std::span<double> y, double dt,
                      std::span<const VelocityConstraint> constraints, long step, std::span<double> rx = {},
                      std::span<double> ry = {});

/// Per-cell stability limit before the safety factor.
double cell_stable_dt(const std::array<Vec2, 4>& x, const CellState& cell, const MaterialModel& m, double c_L,
                      double c_Q);

/// dt_safety * min over cells of l / (c + viscous correction), l = area / longest edge.
double stable_dt(const Grid2D& grid, std::span<const CellState> cells, std::span<const MaterialModel> materials,
                 double dt_safety, double c_L = 0.0, double c_Q = 0.0);

// ---------------------------------------------------------------------------
// Simulation state and stepping

struct EnergyLedger {
  double external_work = 0.0;
  double kinetic = 0.0;
  double kinetic0 = 0.0;
  double elastic = 0.0;
  double elastic0 = 0.0;
  double plastic = 0.0;
  double viscous = 0.0;
  double hourglass = 0.0;

  /// Elastic + dissipated energy (absolute).
  double internal() const { return elastic + plastic + viscous + hourglass; }
  /// external work - (dKE + dE_el + plastic + viscous + hourglass).
  double mismatch() const {
    return external_work - (kinetic - kinetic0) - (elastic - elastic0) - plastic - viscous - hourglass;
  }
};

class Simulation {
 public:
  Simulation(Grid2D grid, std::vector<MaterialModel> materials, std::vector<CellState> cells, Schedule schedule);

  const Grid2D& grid() const { return grid_; }
  const std::vector<CellState>& cells() const { return cells_; }
  const std::vector<MaterialModel>& materials() const { return materials_; }
  const NodalState& nodes() const { return nodes_; }
  const Schedule& schedule() const { return schedule_; }
  double time() const { return time_; }
  long step_count() const { return step_; }

  /// Direct cell access for initial conditions (prestress); forces are refreshed lazily.
  CellState& cell(int c);
  void set_velocity(int node, double vx, double vy);
  void constrain(int node, VelocityConstraint bc);
  const VelocityConstraint& constraint(int node) const { return constraints_[node]; }
  /// Updates prescribed values without changing which components are fixed.
  void set_prescribed(int node, double vx, double vy);

  double stable_dt() const;
  /// One leapfrog step of size dt.
  void step(double dt);

  /// Energy ledger with kinetic and elastic terms evaluated at the current state.
  EnergyLedger energy() const;
  double kinetic_energy() const;
  double elastic_energy() const;
  /// Reaction force applied by constraints during the last step.
  const std::vector<double>& reaction_x() const { return rx_; }
  const std::vector<double>& reaction_y() const { return ry_; }

  /// Largest |continuity residual| - 10 (max rate dt)^2 seen in any cell in any step.
  double continuity_excess() const { return continuity_excess_; }

  /// Keeps the last step's per-cell plastic updates (for invariant checks).
  void record_updates(bool on) { record_updates_ = on; }
  const std::vector<PlasticUpdate>& last_updates() const { return last_updates_; }

  /// Node-splitting sweep with the given thresholds. Returns the number of nodes split.
  int split_nodes(const FractureSettings& settings);
  /// Forces one split of `node` along a vertical (true) or horizontal mesh line.
  bool split_node(int node, bool vertical_line);
  const std::vector<std::string>& log() const { return log_; }

  /// Cell-centered field on the reference layout. Known names: eq_plastic,
  /// eq_plastic_accum, von_mises, pressure, sigma_xx, sigma_yy, sigma_xy, sigma_zz,
  /// s_xx, s_yy, s_xy, s_zz, density, yield, thickness, eps_p_xx, eps_p_yy, eps_p_xy, eps_p_zz.
  FieldFrame frame(std::string_view field) const;
  static const std::vector<std::string>& field_names();

 private:
  void refresh_forces();
  void accumulate_cell_forces(int c, const std::array<Vec2, 4>& x);
  void rebuild_adjacency();
  void relump_node(int n);

  Grid2D grid_;
  std::vector<MaterialModel> materials_;
  std::vector<CellState> cells_;
  Schedule schedule_;
  NodalState nodes_;
  std::vector<VelocityConstraint> constraints_;
  std::vector<double> rx_, ry_;
  std::vector<std::vector<int>> node_cells_;
  std::vector<PlasticUpdate> last_updates_;
  std::vector<std::string> log_;
  double bounds_[4] = {0, 0, 0, 0};
  double time_ = 0.0;
  long step_ = 0;
  double external_work_ = 0.0, plastic_work_ = 0.0, viscous_work_ = 0.0, hourglass_work_ = 0.0;
  double kinetic0_ = 0.0, elastic0_ = 0.0;
  double continuity_excess_ = -1.0;
  mutable double cached_dt_ = 0.0;
  mutable bool dt_valid_ = false;
  bool baseline_ = false;
  bool forces_dirty_ = true;
  bool record_updates_ = false;
};

// ---------------------------------------------------------------------------
// Scene-level driver

struct SimulationSetup {
  Grid2D grid;
  MaterialModel material;
  GrainMap grains;  // empty grain_id => homogeneous yield
  Schedule schedule;
  std::vector<std::string> fields = {"eq_plastic"};
};

struct HistoryRow {
  double time = 0.0;
  double avg_strain = 0.0;
  double avg_stress = 0.0;
  double kinetic = 0.0;
  double internal = 0.0;
  double external_work = 0.0;
  double plastic_work = 0.0;
  double viscous_work = 0.0;
  double hourglass_work = 0.0;
};

struct RunResult {
  std::vector<FieldFrame> frames;
  std::vector<HistoryRow> history;
  EnergyLedger energy;
  bool quasi_static = true;
  std::vector<std::string> warnings;
  long steps = 0;
  double end_time = 0.0;
  double ramp_time = 0.0;
  double continuity_excess = 0.0;
  int nodes_split = 0;
  double max_von_mises_ratio = 0.0;  // max over steps/cells of vM / cell yield
  Grid2D final_grid;
  std::vector<CellState> final_cells;
};

/// P-wave transit time across the larger domain dimension.
double transit_time(const Grid2D& grid, const MaterialModel& m);

/// Builds the simulation (cells, grain yields, loading constraints, initial velocities).
Simulation make_simulation(const SimulationSetup& setup);

/// Runs the loading program to completion. `progress` receives the time fraction;
/// `on_step` sees the simulation after every step, with per-cell plastic updates recorded.
RunResult run(const SimulationSetup& setup, const std::function<void(double)>& progress = {},
              const std::function<void(const Simulation&)>& on_step = {});

}  // namespace nanowb
