#include "nanowb/mesogen.hpp"

#include "nanowb/errors.hpp"

#include <algorithm>
#include <limits>

namespace nanowb {
namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t kSeedStream = 1;
constexpr std::uint64_t kYieldStream = 2;

// Nearest seed for every cell centroid; ties resolve to the lower grain id.
void assign_nearest(const std::vector<Vec2>& centroids, const std::vector<Vec2>& seeds, std::vector<int>& owner) {
  owner.assign(centroids.size(), 0);
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (std::size_t g = 0; g < seeds.size(); ++g) {
      const double dx = centroids[c].x - seeds[g].x;
      const double dy = centroids[c].y - seeds[g].y;
      const double d2 = dx * dx + dy * dy;
      if (d2 < best) {
        best = d2;
        arg = static_cast<int>(g);
      }
    }
    owner[c] = arg;
  }
}

// Moves each empty grain's seed onto the cell farthest from its current owner seed.
bool reseed_empty(const std::vector<Vec2>& centroids, std::vector<Vec2>& seeds, std::vector<int>& owner) {
  std::vector<int> counts(seeds.size(), 0);
  for (int o : owner) ++counts[o];
  bool changed = false;
  for (std::size_t g = 0; g < seeds.size(); ++g) {
    if (counts[g] > 0) continue;
    double worst = -1.0;
    std::size_t arg = 0;
    for (std::size_t c = 0; c < centroids.size(); ++c) {
      if (counts[owner[c]] <= 1) continue;
      const Vec2 s = seeds[owner[c]];
      const double d2 = (centroids[c].x - s.x) * (centroids[c].x - s.x) + (centroids[c].y - s.y) * (centroids[c].y - s.y);
      if (d2 > worst) {
        worst = d2;
        arg = c;
      }
    }
    --counts[owner[arg]];
    seeds[g] = centroids[arg];
    owner[arg] = static_cast<int>(g);
    counts[g] = 1;
    changed = true;
  }
  return changed;
}

}  // namespace

double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  const std::uint64_t h = splitmix(splitmix(splitmix(seed) ^ stream) ^ counter);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

GrainMap generate_grains(const Grid2D& grid, int target_count, std::uint64_t seed, int relax_iters) {
  if (target_count < 1) throw InvalidArgument("generate_grains: target_count must be >= 1");
  if (target_count > grid.num_cells()) throw InvalidArgument("generate_grains: target_count exceeds cell count");
  if (relax_iters < 0) throw InvalidArgument("generate_grains: relax_iters must be >= 0");

  const int nc = grid.num_cells();
  std::vector<Vec2> centroids(nc);
  std::vector<double> areas(nc);
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (int c = 0; c < nc; ++c) {
    centroids[c] = grid.centroid(c);
    areas[c] = quad_area(grid.corners(c));
  }
  for (int n = 0; n < grid.num_nodes(); ++n) {
    xmin = std::min(xmin, grid.node_x[n]);
    xmax = std::max(xmax, grid.node_x[n]);
    ymin = std::min(ymin, grid.node_y[n]);
    ymax = std::max(ymax, grid.node_y[n]);
  }

  std::vector<Vec2> seeds(target_count);
  for (int g = 0; g < target_count; ++g) {
    seeds[g] = {xmin + (xmax - xmin) * counter_uniform(seed, kSeedStream, 2ull * g),
                ymin + (ymax - ymin) * counter_uniform(seed, kSeedStream, 2ull * g + 1)};
  }

  std::vector<int> owner;
  assign_nearest(centroids, seeds, owner);
  while (reseed_empty(centroids, seeds, owner)) assign_nearest(centroids, seeds, owner);

  for (int it = 0; it < relax_iters; ++it) {
    std::vector<double> sx(target_count, 0.0), sy(target_count, 0.0), sa(target_count, 0.0);
    for (int c = 0; c < nc; ++c) {
      sx[owner[c]] += areas[c] * centroids[c].x;
      sy[owner[c]] += areas[c] * centroids[c].y;
      sa[owner[c]] += areas[c];
    }
    for (int g = 0; g < target_count; ++g) {
      if (sa[g] > 0.0) seeds[g] = {sx[g] / sa[g], sy[g] / sa[g]};
    }
    assign_nearest(centroids, seeds, owner);
    while (reseed_empty(centroids, seeds, owner)) assign_nearest(centroids, seeds, owner);
  }

  GrainMap map;
  map.grain_id = std::move(owner);
  map.seed_points = std::move(seeds);
  map.yield_factor.assign(target_count, 1.0);
  return map;
}

GrainMap assign_yield(GrainMap grains, double delta, std::uint64_t seed) {
  if (!(delta >= 0.0 && delta < 1.0)) throw InvalidArgument("assign_yield: delta must be in [0, 1)");
  grains.yield_factor.resize(grains.num_grains());
  for (int g = 0; g < grains.num_grains(); ++g) {
    const double u = counter_uniform(seed, kYieldStream, static_cast<std::uint64_t>(g));
    grains.yield_factor[g] = delta == 0.0 ? 1.0 : 1.0 - delta * u;
  }
  return grains;
}

std::vector<double> cell_yields(const GrainMap& grains, double sigma_y) {
  std::vector<double> y(grains.grain_id.size());
  for (std::size_t c = 0; c < y.size(); ++c) y[c] = sigma_y * grains.yield_factor[grains.grain_id[c]];
  return y;
}

GrainStats grain_statistics(const Grid2D& grid, const GrainMap& grains) {
  const int ng = grains.num_grains();
  GrainStats st;
  st.count = ng;
  st.cells_per_grain.assign(ng, 0);
  std::vector<double> area(ng, 0.0), mx(ng, 0.0), my(ng, 0.0);
  std::vector<Vec2> cen(grid.num_cells());
  for (int c = 0; c < grid.num_cells(); ++c) {
    const int g = grains.grain_id[c];
    cen[c] = grid.centroid(c);
    ++st.cells_per_grain[g];
    area[g] += quad_area(grid.corners(c));
    mx[g] += cen[c].x;
    my[g] += cen[c].y;
  }
  std::vector<double> cxx(ng, 0.0), cyy(ng, 0.0), cxy(ng, 0.0);
  for (int g = 0; g < ng; ++g) {
    if (st.cells_per_grain[g] == 0) continue;
    mx[g] /= st.cells_per_grain[g];
    my[g] /= st.cells_per_grain[g];
  }
  for (int c = 0; c < grid.num_cells(); ++c) {
    const int g = grains.grain_id[c];
    const double dx = cen[c].x - mx[g], dy = cen[c].y - my[g];
    cxx[g] += dx * dx;
    cyy[g] += dy * dy;
    cxy[g] += dx * dy;
  }
  std::vector<double> aspects;
  double dsum = 0.0;
  for (int g = 0; g < ng; ++g) {
    dsum += 2.0 * std::sqrt(area[g] / M_PI);
    if (st.cells_per_grain[g] < 3) continue;
    const double tr = cxx[g] + cyy[g];
    const double disc = std::sqrt(std::max(0.0, 0.25 * (cxx[g] - cyy[g]) * (cxx[g] - cyy[g]) + cxy[g] * cxy[g]));
    const double l1 = 0.5 * tr + disc, l2 = 0.5 * tr - disc;
    aspects.push_back(l2 > 0.0 ? std::sqrt(l1 / l2) : std::numeric_limits<double>::infinity());
  }
  st.mean_diameter = ng > 0 ? dsum / ng : 0.0;
  if (!aspects.empty()) {
    std::sort(aspects.begin(), aspects.end());
    const std::size_t n = aspects.size();
    st.median_aspect = n % 2 ? aspects[n / 2] : 0.5 * (aspects[n / 2 - 1] + aspects[n / 2]);
  }
  return st;
}

}  // namespace nanowb
