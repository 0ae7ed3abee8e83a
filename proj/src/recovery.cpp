#include "nanowb/recovery.hpp"

#include "nanowb/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace nanowb {
namespace {

constexpr int kBasis = 6;

void basis(double u, double v, double* p) {
  p[0] = 1.0;
  p[1] = u;
  p[2] = v;
  p[3] = u * u;
  p[4] = u * v;
  p[5] = v * v;
}

template <class Matrix>
double condition_number(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double lo = ev.minCoeff(), hi = ev.maxCoeff();
  if (!(lo > 0.0) || !std::isfinite(hi)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

}  // namespace

double mls_weight(double r) {
  if (!(r < 1.0)) return 0.0;
  const double r2 = r * r;
  return 1.0 - 6.0 * r2 + 8.0 * r2 * r - 3.0 * r2 * r2;
}

StressRecovery::StressRecovery(std::vector<StressSample> samples, std::vector<TractionSample> tractions,
                               MlsOptions options)
    : samples_(std::move(samples)), tractions_(std::move(tractions)), options_(options) {
  if (!(options_.radius > 0.0) || !std::isfinite(options_.radius))
    throw InvalidArgument("MLS radius must be positive and finite");
  if (options_.max_expansions < 0) throw InvalidArgument("MLS max_expansions must be >= 0");
  if (!(options_.expansion > 1.0)) throw InvalidArgument("MLS expansion factor must exceed 1");
  if (samples_.empty()) throw InvalidArgument("MLS recovery needs at least one sample");
  for (const auto& t : tractions_) {
    const double n = std::hypot(t.normal.x, t.normal.y);
    if (!(std::abs(n - 1.0) < 1e-6)) throw InvalidArgument("traction sample normal must be a unit vector");
  }

  double xmin = samples_[0].x.x, xmax = xmin, ymin = samples_[0].x.y, ymax = ymin;
  for (const auto& s : samples_) {
    xmin = std::min(xmin, s.x.x);
    xmax = std::max(xmax, s.x.x);
    ymin = std::min(ymin, s.x.y);
    ymax = std::max(ymax, s.x.y);
  }
  bucket_ = options_.radius;
  x0_ = xmin;
  y0_ = ymin;
  bx_ = static_cast<int>(std::floor((xmax - xmin) / bucket_)) + 1;
  by_ = static_cast<int>(std::floor((ymax - ymin) / bucket_)) + 1;
  buckets_.assign(static_cast<std::size_t>(bx_) * by_, {});
  for (int k = 0; k < static_cast<int>(samples_.size()); ++k) {
    const int i = std::min(bx_ - 1, static_cast<int>((samples_[k].x.x - x0_) / bucket_));
    const int j = std::min(by_ - 1, static_cast<int>((samples_[k].x.y - y0_) / bucket_));
    buckets_[static_cast<std::size_t>(j) * bx_ + i].push_back(k);
  }
}

void StressRecovery::gather(Vec2 p, double radius, std::vector<int>& out) const {
  out.clear();
  const int i0 = std::max(0, static_cast<int>(std::floor((p.x - radius - x0_) / bucket_)));
  const int i1 = std::min(bx_ - 1, static_cast<int>(std::floor((p.x + radius - x0_) / bucket_)));
  const int j0 = std::max(0, static_cast<int>(std::floor((p.y - radius - y0_) / bucket_)));
  const int j1 = std::min(by_ - 1, static_cast<int>(std::floor((p.y + radius - y0_) / bucket_)));
  const double r2 = radius * radius;
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i <= i1; ++i)
      for (int k : buckets_[static_cast<std::size_t>(j) * bx_ + i]) {
        const double dx = samples_[k].x.x - p.x, dy = samples_[k].x.y - p.y;
        if (dx * dx + dy * dy < r2) out.push_back(k);
      }
  std::sort(out.begin(), out.end());
}

int StressRecovery::nearest_traction(Vec2 p, double radius) const {
  int best = -1;
  double best_d2 = radius * radius;
  for (int k = 0; k < static_cast<int>(tractions_.size()); ++k) {
    const double dx = tractions_[k].x.x - p.x, dy = tractions_[k].x.y - p.y;
    const double d2 = dx * dx + dy * dy;
    if (d2 < best_d2) {
      best_d2 = d2;
      best = k;
    }
  }
  return best;
}

RecoveredStress StressRecovery::evaluate(Vec2 p) const {
  std::vector<int> idx;
  double radius = options_.radius;
  for (int attempt = 0;; ++attempt) {
    gather(p, radius, idx);
    if (idx.size() >= static_cast<std::size_t>(kBasis)) break;
    if (attempt >= options_.max_expansions) throw InsufficientSupport(p.x, p.y);
    radius *= options_.expansion;
  }

  RecoveredStress out;
  out.radius = radius;
  out.samples = static_cast<int>(idx.size());
  const double inv_r = 1.0 / radius;

  Eigen::Matrix<double, kBasis, kBasis> A = Eigen::Matrix<double, kBasis, kBasis>::Zero();
  Eigen::Matrix<double, kBasis, 3> B = Eigen::Matrix<double, kBasis, 3>::Zero();
  double wmax = 0.0;
  double pb[kBasis];
  for (int k : idx) {
    const auto& s = samples_[k];
    const double u = (s.x.x - p.x) * inv_r, v = (s.x.y - p.y) * inv_r;
    const double w = mls_weight(std::hypot(u, v));
    wmax = std::max(wmax, w);
    basis(u, v, pb);
    const Eigen::Map<const Eigen::Matrix<double, kBasis, 1>> pv(pb);
    A.noalias() += w * pv * pv.transpose();
    B.col(0) += w * s.xx * pv;
    B.col(1) += w * s.yy * pv;
    B.col(2) += w * s.xy * pv;
  }

  const int t = nearest_traction(p, radius);
  if (t < 0) {
    out.condition = condition_number(A);
    if (!(out.condition <= options_.max_condition)) throw IllConditioned(p.x, p.y, out.condition);
    const Eigen::Matrix<double, kBasis, 3> coef = A.ldlt().solve(B);
    out.xx = coef(0, 0);
    out.yy = coef(0, 1);
    out.xy = coef(0, 2);
    return out;
  }

  // Joint system over (a_xx, a_yy, a_xy): the traction rows couple the components.
  using Mat18 = Eigen::Matrix<double, 3 * kBasis, 3 * kBasis>;
  using Vec18 = Eigen::Matrix<double, 3 * kBasis, 1>;
  Mat18 M = Mat18::Zero();
  Vec18 rhs = Vec18::Zero();
  for (int c = 0; c < 3; ++c) {
    M.block<kBasis, kBasis>(c * kBasis, c * kBasis) = A;
    rhs.segment<kBasis>(c * kBasis) = B.col(c);
  }
  const auto& ts = tractions_[t];
  basis((ts.x.x - p.x) * inv_r, (ts.x.y - p.y) * inv_r, pb);
  const Eigen::Map<const Eigen::Matrix<double, kBasis, 1>> pv(pb);
  const double nx = ts.normal.x, ny = ts.normal.y;
  const double wt = wmax;
  // Row for t_x: nx*sxx + ny*sxy; row for t_y: nx*sxy + ny*syy.
  Vec18 gx = Vec18::Zero(), gy = Vec18::Zero();
  gx.segment<kBasis>(0) = nx * pv;
  gx.segment<kBasis>(2 * kBasis) = ny * pv;
  gy.segment<kBasis>(kBasis) = ny * pv;
  gy.segment<kBasis>(2 * kBasis) = nx * pv;
  M.noalias() += wt * (gx * gx.transpose() + gy * gy.transpose());
  rhs += wt * (ts.traction.x * gx + ts.traction.y * gy);

  out.traction_used = true;
  out.condition = condition_number(M);
  if (!(out.condition <= options_.max_condition)) throw IllConditioned(p.x, p.y, out.condition);
  const Vec18 a = M.ldlt().solve(rhs);
  out.xx = a(0);
  out.yy = a(kBasis);
  out.xy = a(2 * kBasis);
  return out;
}

RecoveredField recover_field(const StressRecovery& rec, int nx, int ny, double xmin, double xmax, double ymin,
                             double ymax, double time) {
  RecoveredField out;
  auto init = [&](FieldFrame& f, const char* name) {
    f.name = name;
    f.time = time;
    f.nx = nx;
    f.ny = ny;
    f.xmin = xmin;
    f.xmax = xmax;
    f.ymin = ymin;
    f.ymax = ymax;
    f.values.assign(static_cast<std::size_t>(nx) * ny, FieldFrame::missing());
    f.validate();
  };
  init(out.xx, "recovered_sigma_xx");
  init(out.yy, "recovered_sigma_yy");
  init(out.xy, "recovered_sigma_xy");
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Vec2 p = out.xx.center(i, j);
      try {
        const auto r = rec.evaluate(p);
        out.xx.at(i, j) = r.xx;
        out.yy.at(i, j) = r.yy;
        out.xy.at(i, j) = r.xy;
      } catch (const RecoveryError&) {
        ++out.gaps;
      }
    }
  }
  const double frac = static_cast<double>(out.gaps) / (static_cast<double>(nx) * ny);
  if (frac > 0.10)
    out.warnings.push_back("stress recovery left " + std::to_string(out.gaps) + " of " +
                           std::to_string(nx * ny) + " points missing");
  return out;
}

std::vector<StressSample> samples_from_cells(const Grid2D& grid, std::span<const CellState> cells) {
  if (static_cast<int>(cells.size()) != grid.num_cells())
    throw InvalidArgument("samples_from_cells: cell count does not match the grid");
  std::vector<StressSample> out(cells.size());
  for (int c = 0; c < grid.num_cells(); ++c) {
    out[c].x = grid.centroid(c);
    out[c].xx = cells[c].sigma_xx();
    out[c].yy = cells[c].sigma_yy();
    out[c].xy = cells[c].sigma_xy();
  }
  return out;
}

std::vector<TractionSample> free_side_tractions(const Grid2D& grid) {
  std::vector<TractionSample> out;
  for (int j = 0; j < grid.ny; ++j) {
    for (int side = 0; side < 2; ++side) {
      const int c = grid.cell_index(side == 0 ? 0 : grid.nx - 1, j);
      const auto x = grid.corners(c);
      // Left side edge runs corner 3 -> 0, right side edge corner 1 -> 2 (counterclockwise).
      const Vec2 a = side == 0 ? x[3] : x[1];
      const Vec2 b = side == 0 ? x[0] : x[2];
      const double ex = b.x - a.x, ey = b.y - a.y;
      const double len = std::hypot(ex, ey);
      if (!(len > 0.0)) continue;
      TractionSample t;
      t.x = {0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
      t.normal = {ey / len, -ex / len};
      t.traction = {0.0, 0.0};
      out.push_back(t);
    }
  }
  return out;
}

}  // namespace nanowb
