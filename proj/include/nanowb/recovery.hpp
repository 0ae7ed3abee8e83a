#pragma once

// Moving-least-squares recovery of a smooth stress field from cell-centered samples,
// with optional traction constraints at free boundaries.

#include "nanowb/analysis.hpp"
#include "nanowb/mechcore.hpp"

#include <span>
#include <string>
#include <vector>

namespace nanowb {

struct StressSample {
  Vec2 x;
  double xx = 0.0, yy = 0.0, xy = 0.0;
};

/// Known traction t = sigma.n at a boundary point with outward unit normal n.
struct TractionSample {
  Vec2 x;
  Vec2 normal;
  Vec2 traction;
};

struct MlsOptions {
  double radius = 0.0;  // initial domain-of-influence radius, um
  int max_expansions = 4;
  double expansion = 1.5;
  double max_condition = 1e12;
};

struct RecoveredStress {
  double xx = 0.0, yy = 0.0, xy = 0.0;
  double radius = 0.0;     // radius actually used
  double condition = 0.0;  // eigenvalue ratio of the normal matrix
  int samples = 0;         // interior samples with positive weight
  bool traction_used = false;
};

/// Quartic spline weight 1 - 6r^2 + 8r^3 - 3r^4 for r < 1, else 0.
double mls_weight(double r);

class StressRecovery {
 public:
  StressRecovery(std::vector<StressSample> samples, std::vector<TractionSample> tractions, MlsOptions options);

  /// Quadratic MLS fit at p. Throws InsufficientSupport when fewer than six samples
  /// fall inside the largest allowed radius, IllConditioned when the system is singular.
  RecoveredStress evaluate(Vec2 p) const;

  const MlsOptions& options() const { return options_; }
  std::size_t sample_count() const { return samples_.size(); }

 private:
  void gather(Vec2 p, double radius, std::vector<int>& out) const;
  int nearest_traction(Vec2 p, double radius) const;

  std::vector<StressSample> samples_;
  std::vector<TractionSample> tractions_;
  MlsOptions options_;
  double bucket_ = 1.0;
  double x0_ = 0.0, y0_ = 0.0;
  int bx_ = 1, by_ = 1;
  std::vector<std::vector<int>> buckets_;
};

struct RecoveredField {
  FieldFrame xx, yy, xy;
  int gaps = 0;  // query points left missing after a recovery failure
  std::vector<std::string> warnings;
};

/// Evaluates the recovery at every cell center of an nx*ny layout. Failed points are
/// recorded as gaps; more than 10% gaps adds a warning.
RecoveredField recover_field(const StressRecovery& rec, int nx, int ny, double xmin, double xmax, double ymin,
                             double ymax, double time = 0.0);

/// Cell-centroid stress samples from the current (deformed) mesh.
std::vector<StressSample> samples_from_cells(const Grid2D& grid, std::span<const CellState> cells);

/// Zero-traction samples at the midpoints of the left and right boundary edges.
std::vector<TractionSample> free_side_tractions(const Grid2D& grid);

}  // namespace nanowb
