#pragma once

// Localized limit of the game: the density obeys the Burgers-type law
//   df/dt = -d/dz (alpha(S) f^2),
// the value function sees the benefit f dV/dz, and the potential formulation
// needs running costs w solving w - p dw/dp = -U((1 - alpha^{-1}(p)) z).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <span>
#include <vector>

#include "kgrowth/boltzmann.hpp"
#include "kgrowth/coupling.hpp"
#include "kgrowth/errors.hpp"
#include "kgrowth/grid.hpp"
#include "kgrowth/hjb.hpp"
#include "kgrowth/model.hpp"

namespace kgrowth {

/// Godunov flux of q(f) = f^2: min of q over [fL, fR] when fL <= fR, max over
/// [fR, fL] otherwise. On non-negative states this is the upwind value fL^2.
inline double godunov_flux(double fL, double fR) {
  if (fL < 0.0 || fR < 0.0) throw DomainError("godunov_flux: states must be >= 0");
  if (fL <= fR) {
    if (fL <= 0.0 && fR >= 0.0) return 0.0;
    return std::min(fL * fL, fR * fR);
  }
  return std::max(fL * fL, fR * fR);
}

/// Cell mass dz * sum f, the quantity the conservative update preserves.
inline double local_mass(const DensityField& f) {
  double sum = 0.0;
  for (double v : f.values) sum += v;
  return f.grid.dz() * sum;
}

inline double local_mean(const DensityField& f) {
  double sum = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) sum += f.grid.node(j) * f[j];
  return f.grid.dz() * sum;
}

struct LocalState {
  DensityField f;
  AlphaField a;
  double lambda_dt_dx = 0.0;
};

/// Largest lambda * 2 * f_j * (mobility acting on cell j's outgoing face).
inline double cfl_number(const DensityField& f, const AlphaField& a, double lambda) {
  require_same_grid(f, a);
  const std::size_t n = f.size();
  double worst = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double face = j + 1 < n ? 0.5 * (a[j] + a[j + 1]) : a[j];
    worst = std::max(worst, 2.0 * lambda * f[j] * std::max(a[j], face));
  }
  return worst;
}

struct BurgersStep {
  DensityField f;
  double outflow = 0.0;  // flux through z_max per unit time
};

/// Conservative update f_j - lambda (F_{j+1/2} - F_{j-1/2}) with F the face
/// mobility times the Godunov flux. No inflow at z = 0; outflow at z_max uses
/// the last cell's own state.
inline BurgersStep burgers_step(const LocalState& state, double dt, double dz) {
  const auto& f = state.f;
  const auto& a = state.a;
  require_same_grid(f, a);
  if (!(dt > 0.0 && dz > 0.0)) throw DomainError("burgers_step: dt, dz > 0");
  const double lambda = dt / dz;
  const double cfl = cfl_number(f, a, lambda);
  if (cfl > 1.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "burgers_step: CFL violated (lambda * max 2 alpha f = %.6g > 1)", cfl);
    throw StabilityError(buf);
  }
  const std::size_t n = f.size();
  std::vector<double> flux(n + 1, 0.0);  // flux[j] sits on face j - 1/2
  for (std::size_t j = 0; j + 1 < n; ++j)
    flux[j + 1] = 0.5 * (a[j] + a[j + 1]) * godunov_flux(f[j], f[j + 1]);
  flux[n] = a[n - 1] * f[n - 1] * f[n - 1];

  BurgersStep out{DensityField(f.grid), flux[n]};
  for (std::size_t j = 0; j < n; ++j) out.f[j] = f[j] - lambda * (flux[j + 1] - flux[j]);
  return out;
}

inline BurgersStep burgers_step(const DensityField& f, const AlphaField& a, double dt) {
  return burgers_step(LocalState{f, a, dt / f.grid.dz()}, dt, f.grid.dz());
}

/// B_j = w_j (V_{j+1} - V_j) / dz with w = f (or f^2); backward difference at
/// the last node.
inline BenefitField local_benefit(const ValueField& V, const DensityField& f, double dz,
                                  LocalBenefitVariant variant = LocalBenefitVariant::f) {
  require_same_grid(V, f);
  const std::size_t n = f.size();
  BenefitField b(f.grid);
  for (std::size_t j = 0; j < n; ++j) {
    const double grad = j + 1 < n ? (V[j + 1] - V[j]) / dz : (V[j] - V[j - 1]) / dz;
    const double w = variant == LocalBenefitVariant::f_squared ? f[j] * f[j] : f[j];
    b[j] = w * grad;
  }
  return b;
}

/// Implicit local HJB step on one level:
///   (1 + r dt + e_j) V_j - e_j V_{j+1} = V_next_j + dt U_j,  e_j = dt A_j w_j / dz,
/// with the last row using the backward difference. The last two rows form a
/// 2x2 block; everything below is back substitution.
class LocalHjbLevel {
 public:
  LocalHjbLevel(const DensityField& f, LocalBenefitVariant variant) : f_(f), variant_(variant) {}

  struct Result {
    ValueField V;
    BenefitField B;
  };

  Result solve(const ValueField& V_next, const ControlField& S, const ModelSpec& spec,
               double dt) const {
    require_same_grid(V_next, f_);
    require_same_grid(S, f_);
    if (!(dt > 0.0)) throw DomainError("local hjb step: dt > 0");
    const std::size_t n = f_.size();
    const double dz = f_.grid.dz();
    const double r = spec.discount_rate;
    std::vector<double> e(n), c(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double w = variant_ == LocalBenefitVariant::f_squared ? f_[j] * f_[j] : f_[j];
      e[j] = dt * eval_alpha(spec.learning, S[j]) * w / dz;
      c[j] = V_next[j] + dt * eval_utility(spec.utility, (1.0 - S[j]) * f_.grid.node(j));
    }
    Result out{ValueField(f_.grid), BenefitField(f_.grid)};
    auto& V = out.V;
    const double d_pen = 1.0 + r * dt + e[n - 2];
    const double denom = (1.0 + r * dt - e[n - 1]) + e[n - 1] * e[n - 2] / d_pen;
    if (!(denom > 0.0)) throw NumericalError("local hjb step: singular boundary block; reduce dt");
    V[n - 1] = (c[n - 1] - e[n - 1] * c[n - 2] / d_pen) / denom;
    for (std::size_t j = n - 1; j-- > 0;) V[j] = (c[j] + e[j] * V[j + 1]) / (1.0 + r * dt + e[j]);
    for (std::size_t j = 0; j < n; ++j)
      if (!std::isfinite(V[j])) throw NumericalError("local hjb step: non-finite value");
    out.B = local_benefit(V, f_, dz, variant_);
    return out;
  }

 private:
  const DensityField& f_;
  LocalBenefitVariant variant_;
};

inline BackwardPass solve_backward_local(std::span<const DensityField> f_traj, const ModelSpec& spec,
                                         double dt, LocalBenefitVariant variant,
                                         std::span<const ControlField> S_guess = {},
                                         PolicyIterationOptions opts = {}) {
  if (f_traj.empty()) throw DomainError("solve_backward_local: empty density trajectory");
  return detail::backward_sweep(f_traj.size(), f_traj.front().grid, spec, dt, S_guess, opts,
                                [&](std::size_t n) { return LocalHjbLevel(f_traj[n], variant); });
}

/// Time step of the local solver: the configured one, or the largest step
/// meeting the CFL target for the initial datum at full learning effort,
/// shrunk so that it divides T (and the slice interval, when that divides T).
inline double local_time_step(const RunConfig& cfg, const DensityField& f0) {
  if (cfg.dt) return *cfg.dt;
  double fmax = 0.0;
  for (double v : f0.values) fmax = std::max(fmax, v);
  const double amax = cfg.fixed_control ? std::max(*cfg.fixed_control, 1e-300)
                                        : eval_alpha(cfg.model.learning, 1.0);
  if (!(fmax > 0.0)) return std::min(cfg.T, RunConfig::kDefaultDt);
  const double raw = cfg.cfl * cfg.grid.dz() / (2.0 * amax * fmax);
  const double slices = cfg.T / cfg.slice_interval;
  if (slices >= 1.0 && std::abs(slices - std::round(slices)) < 1e-9) {
    const double per_slice = std::max(1.0, std::ceil(cfg.slice_interval / raw - 1e-9));
    return cfg.T / (std::round(slices) * per_slice);
  }
  const double steps = std::ceil(cfg.T / raw - 1e-9);
  return cfg.T / std::max(1.0, steps);
}

/// Fixed-point iteration of the local system: Burgers forward, local HJB backward.
inline SolutionTrajectory local_fixed_point_solve(const RunConfig& cfg, const Logger& log = {}) {
  cfg.validate();
  const auto init = initial_datum(cfg);
  const double dt = local_time_step(cfg, init.f);
  cfg.check_divides(dt);
  const std::size_t steps = RunConfig::steps_for(cfg.T, dt);
  if (log) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "initial datum normalization constant %.17g; local dt %.17g (%zu steps)",
                  init.normalization, dt, steps);
    log(buf);
  }
  const auto& learning = cfg.model.learning;
  const double dz = cfg.grid.dz();

  auto forward = [&](const std::vector<ControlField>* S) {
    ForwardPass out;
    out.f.reserve(steps + 1);
    out.f.push_back(init.f);
    out.diagnostics.mass.push_back(local_mass(init.f));
    out.diagnostics.mean.push_back(local_mean(init.f));
    for (std::size_t n = 0; n < steps; ++n) {
      AlphaField a = cfg.fixed_control ? AlphaField(cfg.grid, *cfg.fixed_control)
                     : S              ? alpha_field((*S)[n], learning)
                                      : AlphaField(cfg.grid, eval_alpha(learning, 1.0));
      auto step = burgers_step(LocalState{out.f.back(), std::move(a), dt / dz}, dt, dz);
      out.diagnostics.clipped_mass.push_back(0.0);
      out.diagnostics.boundary_flux.push_back(step.outflow);
      out.diagnostics.mass.push_back(local_mass(step.f));
      out.diagnostics.mean.push_back(local_mean(step.f));
      out.f.push_back(std::move(step.f));
    }
    return out;
  };
  auto backward = [&](const std::vector<DensityField>& f, const std::vector<ControlField>& guess) {
    return solve_backward_local(f, cfg.model, dt, cfg.local_benefit, guess);
  };
  auto traj = detail::run_fixed_point(cfg, dt, steps, forward, backward, log);
  traj.diagnostics.normalization = init.normalization;
  return traj;
}

// ---------------------------------------------------------------------------
// Running costs of the potential formulation, with alpha(s) = s^(1/eta).

/// Linear utility: w = -z p^eta / (eta - 1) - z. The p-linear term is the
/// free direction and is set to zero; the constant is fixed by the ODE.
inline double w_linear(double p, double z, double eta) {
  if (!(eta > 1.0)) throw DomainError("w_linear: eta > 1");
  if (p < 0.0) throw DomainError("w_linear: p >= 0");
  return -z * std::pow(p, eta) / (eta - 1.0) - z;
}

/// Logarithmic utility, eta = 2: w = -[(p+1) ln(p+1) + (1-p) ln(1-p)] - ln z,
/// with d^2w/dp^2 = -2 / (1 - p^2). The p-linear term is free and set to zero;
/// the constant -ln z is what makes w - p dw/dp = -ln((1 - p^2) z) hold.
inline double w_log_eta2(double p, double z) {
  if (!(p >= 0.0 && p < 1.0)) throw DomainError("w_log_eta2: 0 <= p < 1");
  if (!(z > 0.0)) throw DomainError("w_log_eta2: z > 0");
  const double q = 1.0 - p;
  const double tail = q > 0.0 ? q * std::log(q) : 0.0;
  return -((p + 1.0) * std::log1p(p) + tail) - std::log(z);
}

}  // namespace kgrowth
