#pragma once

// Balanced-growth-path diagnostics on unscaled solution slices.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "kgrowth/coupling.hpp"
#include "kgrowth/errors.hpp"
#include "kgrowth/grid.hpp"
#include "kgrowth/model.hpp"

namespace kgrowth {

/// Aggregate output Y = int U((1 - S) z) f dz.
inline double productivity(const DensityField& f, const ControlField& S, const UtilitySpec& utility) {
  require_same_grid(f, S);
  std::vector<double> y(f.size());
  for (std::size_t j = 0; j < f.size(); ++j)
    y[j] = eval_utility(utility, (1.0 - S[j]) * f.grid.node(j)) * f[j];
  return trapezoid(y, f.grid);
}

struct GammaBracket {
  double lower = 0.0;
  double upper = 0.0;
  double integral_term = 0.0;  // int alpha(S) f dz

  bool degenerate() const { return !(upper > 0.0); }
};

/// (k_lower / theta) I < gamma <= (k_upper / theta) I with I = int alpha(S) f.
inline GammaBracket gamma_bracket(const DensityField& f, const ControlField& S,
                                  const ModelSpec& spec, double theta) {
  require_same_grid(f, S);
  if (!(theta > 0.0)) throw DomainError("gamma_bracket: theta > 0");
  std::vector<double> af(f.size());
  for (std::size_t j = 0; j < f.size(); ++j) af[j] = eval_alpha(spec.learning, S[j]) * f[j];
  GammaBracket g;
  g.integral_term = trapezoid(af, f.grid);
  const auto [k_lo, k_hi] = kernel_bounds(spec.kernel);
  g.lower = k_lo / theta * g.integral_term;
  g.upper = k_hi / theta * g.integral_term;
  return g;
}

struct TailSample {
  double t = 0.0;
  TailFit fit;
  double beta_envelope_lo = 0.0;  // k_lower e^{t alpha(1)} beta_0
  double beta_envelope_hi = 0.0;  // k_upper e^{t alpha(1)} beta_0
};

struct TailReport {
  std::vector<TailSample> samples;

  /// max |inv_theta(t) / inv_theta(0) - 1| over samples with t <= t_max.
  double max_relative_deviation(double t_max = std::numeric_limits<double>::infinity()) const {
    if (samples.empty()) return 0.0;
    const double ref = samples.front().fit.inv_theta;
    double worst = 0.0;
    for (const auto& s : samples) {
      if (s.t > t_max + 1e-12) continue;
      worst = std::max(worst, std::abs(s.fit.inv_theta / ref - 1.0));
    }
    return worst;
  }
};

/// Tail fit of each density slice; slices[n] lives at times[n].
inline TailReport tail_preservation_report(const std::vector<double>& times,
                                           const std::vector<DensityField>& slices,
                                           const ModelSpec& spec, TailWindow window = {}) {
  if (times.size() != slices.size()) throw DomainError("tail report: times and slices differ in length");
  TailReport report;
  const auto [k_lo, k_hi] = kernel_bounds(spec.kernel);
  const double abar = eval_alpha(spec.learning, 1.0);
  double beta0 = 0.0;
  for (std::size_t n = 0; n < slices.size(); ++n) {
    TailSample s;
    s.t = times[n];
    s.fit = tail_fit(cdf(slices[n]), slices[n].grid, window);
    if (n == 0) beta0 = s.fit.beta_hat;
    const double growth = std::exp(s.t * abar);
    s.beta_envelope_lo = k_lo * growth * beta0;
    s.beta_envelope_hi = k_hi * growth * beta0;
    report.samples.push_back(s);
  }
  return report;
}

/// Every `stride`-th level of a trajectory (plus the last one).
inline TailReport tail_preservation_report(const SolutionTrajectory& traj, const ModelSpec& spec,
                                           TailWindow window = {}, std::size_t stride = 1) {
  if (stride == 0) throw DomainError("tail report: stride >= 1");
  std::vector<double> times;
  std::vector<DensityField> slices;
  for (std::size_t n = 0; n < traj.levels(); n += stride) {
    times.push_back(traj.times[n]);
    slices.push_back(traj.f[n]);
  }
  if ((traj.levels() - 1) % stride != 0) {
    times.push_back(traj.times.back());
    slices.push_back(traj.f.back());
  }
  return tail_preservation_report(times, slices, spec, window);
}

/// phi(x) = e^{gamma t} f(x e^{gamma t}, t) by linear interpolation on the
/// grid; points mapped beyond z_max give 0.
inline DensityField rescale_to_bgp(const DensityField& f, double gamma, double t) {
  if (!(gamma >= 0.0)) throw DomainError("rescale_to_bgp: gamma >= 0");
  const double g = std::exp(gamma * t);
  if (g == 1.0) return f;
  const auto& grid = f.grid;
  const double dz = grid.dz();
  const std::size_t n = grid.size();
  DensityField out(grid);
  for (std::size_t j = 0; j < n; ++j) {
    const double z = grid.node(j) * g;
    if (z > grid.z_max()) continue;
    const double pos = z / dz;
    const std::size_t i = std::min(static_cast<std::size_t>(pos), n - 2);
    const double w = pos - static_cast<double>(i);
    out[j] = g * ((1.0 - w) * f[i] + w * f[i + 1]);
  }
  return out;
}

}  // namespace kgrowth
