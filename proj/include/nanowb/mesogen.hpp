#pragma once

#include "nanowb/mechcore.hpp"

#include <cstdint>

namespace nanowb {

/// Counter-based generator: a pure function of (seed, stream, counter) mapped to [0, 1).
double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter);

/// Voronoi grain tessellation over cell centroids with Lloyd relaxation. Every grain
/// is non-empty; yield factors are initialized to 1.
GrainMap generate_grains(const Grid2D& grid, int target_count, std::uint64_t seed, int relax_iters);

/// Per-grain yield factor drawn uniformly on [1 - delta, 1], keyed by (seed, grain id).
GrainMap assign_yield(GrainMap grains, double delta, std::uint64_t seed);

/// Cell yield strengths: sigma_y * yield_factor[grain_id[cell]].
std::vector<double> cell_yields(const GrainMap& grains, double sigma_y);

struct GrainStats {
  int count = 0;
  double mean_diameter = 0.0;  // mean of 2*sqrt(A_g/pi)
  double median_aspect = 0.0;  // sqrt of principal covariance ratio of member centroids
  std::vector<int> cells_per_grain;
};

GrainStats grain_statistics(const Grid2D& grid, const GrainMap& grains);

}  // namespace nanowb
