#pragma once

// Uniform knowledge grid on [0, z_max], grid-bound fields, trapezoidal
// quadrature, cumulative distributions, moments and Pareto tail regression.

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "kgrowth/errors.hpp"

namespace kgrowth {

class KnowledgeGrid {
 public:
  KnowledgeGrid() = default;
  KnowledgeGrid(double z_max, std::size_t n_nodes) : z_max_(z_max), n_nodes_(n_nodes) {
    if (!(z_max > 0.0)) throw ConfigError("grid: z_max > 0");
    if (n_nodes < 3) throw ConfigError("grid: n_nodes >= 3");
  }

  double z_max() const { return z_max_; }
  std::size_t size() const { return n_nodes_; }
  double dz() const { return z_max_ / static_cast<double>(n_nodes_ - 1); }
  double node(std::size_t j) const {
    return j + 1 == n_nodes_ ? z_max_ : static_cast<double>(j) * dz();
  }
  std::vector<double> nodes() const {
    std::vector<double> z(n_nodes_);
    for (std::size_t j = 0; j < n_nodes_; ++j) z[j] = node(j);
    return z;
  }

  bool operator==(const KnowledgeGrid&) const = default;

 private:
  double z_max_ = 10.0;
  std::size_t n_nodes_ = 1001;
};

/// Per-node samples of one quantity on a grid; the tag keeps densities,
/// values and controls from being mixed up.
template <class Tag>
struct GridField {
  KnowledgeGrid grid;
  std::vector<double> values;

  GridField() = default;
  explicit GridField(const KnowledgeGrid& g, double fill = 0.0) : grid(g), values(g.size(), fill) {}
  GridField(const KnowledgeGrid& g, std::vector<double> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.size()) throw DomainError("field size does not match grid");
  }

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t j) { return values[j]; }
  double operator[](std::size_t j) const { return values[j]; }
  std::span<const double> view() const { return values; }

  bool operator==(const GridField&) const = default;
};

struct DensityTag {};
struct ValueTag {};
struct ControlTag {};
struct BenefitTag {};
struct AlphaTag {};

using DensityField = GridField<DensityTag>;
using ValueField = GridField<ValueTag>;
using ControlField = GridField<ControlTag>;
using BenefitField = GridField<BenefitTag>;
using AlphaField = GridField<AlphaTag>;

template <class A, class B>
void require_same_grid(const GridField<A>& a, const GridField<B>& b) {
  if (!(a.grid == b.grid) || a.size() != b.size()) throw DomainError("grid mismatch");
}

/// Composite trapezoid over [z_lo, z_hi], accumulated segment by segment
/// from the left.
inline double trapezoid(std::span<const double> values, const KnowledgeGrid& grid,
                        std::size_t j_lo, std::size_t j_hi) {
  if (values.size() != grid.size()) throw DomainError("trapezoid: size does not match grid");
  if (j_lo > j_hi || j_hi >= grid.size()) throw DomainError("trapezoid: index out of range");
  const double half_dz = 0.5 * grid.dz();
  double sum = 0.0;
  for (std::size_t j = j_lo; j < j_hi; ++j) sum += half_dz * (values[j] + values[j + 1]);
  return sum;
}

inline double trapezoid(std::span<const double> values, const KnowledgeGrid& grid) {
  return trapezoid(values, grid, 0, grid.size() - 1);
}

/// F(z_j) = integral of f over [0, z_j]; same accumulation order as trapezoid.
inline std::vector<double> cdf(const DensityField& f) {
  std::vector<double> out(f.size(), 0.0);
  const double half_dz = 0.5 * f.grid.dz();
  double sum = 0.0;
  for (std::size_t j = 1; j < f.size(); ++j) {
    sum += half_dz * (f[j - 1] + f[j]);
    out[j] = sum;
  }
  return out;
}

inline double moment(const DensityField& f, int order) {
  if (order == 0) return trapezoid(f.view(), f.grid);
  if (order != 1) throw DomainError("moment: order must be 0 or 1");
  std::vector<double> zf(f.size());
  for (std::size_t j = 0; j < f.size(); ++j) zf[j] = f.grid.node(j) * f[j];
  return trapezoid(zf, f.grid);
}

// ---------------------------------------------------------------------------

struct TailFit {
  double inv_theta = 0.0;   // fitted 1/theta (minus the log-log slope)
  double beta_hat = 0.0;    // exp(intercept)
  double window_lo = 0.0;
  double window_hi = 0.0;
  double r_squared = 0.0;
  std::size_t n_points = 0;

  /// A Pareto tail needs a decaying survival function; slopes below 1e-8
  /// are rounding noise of a flat one.
  bool is_pareto() const { return inv_theta > 1e-8; }
};

struct TailWindow {
  double lo = 0.5;
  double hi = 0.9;
};

inline constexpr double kSurvivalFloor = 1e-12;

/// Ordinary least squares of ln(1 - F(Z)) against ln Z over nodes with
/// Z in [lo, hi] * z_max. Nodes with survival below 1e-12 are skipped.
inline TailFit tail_fit(std::span<const double> F, const KnowledgeGrid& grid,
                        TailWindow window = {}) {
  if (F.size() != grid.size()) throw DomainError("tail_fit: size does not match grid");
  if (!(window.lo > 0.0 && window.lo < window.hi && window.hi <= 1.0))
    throw DomainError("tail_fit: window must satisfy 0 < lo < hi <= 1");
  TailFit fit;
  fit.window_lo = window.lo * grid.z_max();
  fit.window_hi = window.hi * grid.z_max();

  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t j = 1; j < grid.size(); ++j) {
    const double z = grid.node(j);
    if (z < fit.window_lo - 1e-12 * grid.z_max() || z > fit.window_hi + 1e-12 * grid.z_max())
      continue;
    const double survival = 1.0 - F[j];
    if (survival < kSurvivalFloor) continue;
    xs.push_back(std::log(z));
    ys.push_back(std::log(survival));
  }
  if (xs.size() < 5) throw DomainError("tail_fit: fewer than 5 usable nodes in the window");

  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  fit.inv_theta = slope == 0.0 ? 0.0 : -slope;
  fit.beta_hat = std::exp(intercept);
  fit.n_points = xs.size();
  // r^2 is reported as 0 for a flat survival (no variance to explain).
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 0.0;
  return fit;
}

}  // namespace kgrowth
