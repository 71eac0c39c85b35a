#pragma once

// Outer fixed-point iteration between the forward kinetic equation and the
// backward HJB equation, plus the run configuration shared by both solvers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kgrowth/boltzmann.hpp"
#include "kgrowth/errors.hpp"
#include "kgrowth/grid.hpp"
#include "kgrowth/hjb.hpp"
#include "kgrowth/model.hpp"

namespace kgrowth {

enum class SolverKind { nonlocal, local };
/// Local benefit: f dV/dz (default) or f^2 dV/dz.
enum class LocalBenefitVariant { f, f_squared };
enum class InitKind { pareto, uniform };

inline std::string to_string(SolverKind k) { return k == SolverKind::local ? "local" : "nonlocal"; }
inline std::string to_string(LocalBenefitVariant v) {
  return v == LocalBenefitVariant::f_squared ? "f_squared" : "f";
}
inline std::string to_string(InitKind k) { return k == InitKind::uniform ? "uniform" : "pareto"; }

struct InitSpec {
  InitKind kind = InitKind::pareto;
  double beta = 3.0;   // pareto: f ~ beta / (z+1)^beta
  double upper = 1.0;  // uniform: support [0, upper]
  bool operator==(const InitSpec&) const = default;
};

struct RunConfig {
  ModelSpec model;
  KnowledgeGrid grid{10.0, 1001};
  double T = 25.0;
  std::optional<double> dt;  // unset: 0.01, or CFL-derived for the local solver
  InitSpec init;
  double fp_tol = 1e-6;
  std::size_t fp_max_iter = 100;
  std::optional<double> fixed_control;  // frozen alpha value
  SolverKind solver = SolverKind::nonlocal;
  LocalBenefitVariant local_benefit = LocalBenefitVariant::f;
  double cfl = 0.5;
  double slice_interval = 5.0;  // output spacing in time units

  static constexpr double kDefaultDt = 0.01;

  void validate() const {
    model.validate();
    if (!(T > 0.0)) throw ConfigError("T > 0");
    if (dt) {
      if (!(*dt > 0.0)) throw ConfigError("dt > 0");
      if (!(T >= *dt)) throw ConfigError("T >= dt");
      check_divides(*dt);
    }
    if (init.kind == InitKind::pareto && !(init.beta > 1.0)) throw ConfigError("init_beta > 1");
    if (init.kind == InitKind::uniform && !(init.upper > 0.0 && init.upper <= grid.z_max()))
      throw ConfigError("init upper in (0, z_max]");
    if (!(fp_tol > 0.0)) throw ConfigError("fp_tol > 0");
    if (fp_max_iter < 1) throw ConfigError("fp_max_iter >= 1");
    if (fixed_control && !(*fixed_control >= 0.0 && *fixed_control <= model.learning.alpha0))
      throw ConfigError("fixed_control in [0, alpha0]");
    if (!(cfl > 0.0 && cfl <= 1.0)) throw ConfigError("cfl in (0, 1]");
    if (!(slice_interval > 0.0)) throw ConfigError("slice_interval > 0");
  }

  /// Time step of the nonlocal solver (the local solver resolves its own).
  double nonlocal_dt() const { return dt.value_or(kDefaultDt); }

  void check_divides(double step) const {
    const double ratio = T / step;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio))
      throw ConfigError("T must be an integer multiple of dt");
  }

  static std::size_t steps_for(double T, double step) {
    return static_cast<std::size_t>(std::llround(T / step));
  }

  bool operator==(const RunConfig&) const = default;
};

struct TrajectoryDiagnostics {
  std::vector<double> mass;          // per time level
  std::vector<double> mean;          // per time level
  std::vector<double> clipped_mass;  // per step
  std::vector<double> boundary_flux; // per step, local solver only (outflow minus inflow)
  std::vector<double> residuals;     // per outer iteration
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t policy_sweeps = 0;
  std::size_t unconverged_levels = 0;
  double normalization = 1.0;        // factor applied to the raw initial datum
};

struct SolutionTrajectory {
  KnowledgeGrid grid;
  double dt = 0.0;
  std::vector<double> times;
  std::vector<DensityField> f;
  std::vector<ValueField> V;
  std::vector<ControlField> S;
  TrajectoryDiagnostics diagnostics;

  std::size_t levels() const { return times.size(); }
};

using Logger = std::function<void(const std::string&)>;

struct InitialDatum {
  DensityField f;
  double normalization = 1.0;  // unit-mass field = normalization * raw samples
};

/// Pareto-type datum beta/(z+1)^beta, rescaled to unit trapezoid mass.
inline InitialDatum initial_datum(const KnowledgeGrid& grid, double beta) {
  if (!(beta > 1.0)) throw DomainError("initial_datum: beta > 1");
  DensityField f(grid);
  for (std::size_t j = 0; j < grid.size(); ++j) f[j] = beta / std::pow(grid.node(j) + 1.0, beta);
  const double c = 1.0 / moment(f, 0);
  for (auto& v : f.values) v *= c;
  return {std::move(f), c};
}

/// Uniform density on [0, upper], rescaled to unit trapezoid mass.
inline InitialDatum uniform_datum(const KnowledgeGrid& grid, double upper) {
  if (!(upper > 0.0)) throw DomainError("uniform_datum: upper > 0");
  DensityField f(grid);
  const double cut = upper + 1e-9 * grid.dz();
  for (std::size_t j = 0; j < grid.size(); ++j) f[j] = grid.node(j) <= cut ? 1.0 / upper : 0.0;
  const double mass = moment(f, 0);
  if (!(mass > 0.0)) throw DomainError("uniform_datum: support shorter than one cell");
  const double c = 1.0 / mass;
  for (auto& v : f.values) v *= c;
  return {std::move(f), c};
}

inline InitialDatum initial_datum(const RunConfig& cfg) {
  return cfg.init.kind == InitKind::uniform ? uniform_datum(cfg.grid, cfg.init.upper)
                                            : initial_datum(cfg.grid, cfg.init.beta);
}

inline AlphaField alpha_field(const ControlField& S, const LearningRateSpec& learning) {
  AlphaField a(S.grid);
  for (std::size_t j = 0; j < S.size(); ++j) a[j] = eval_alpha(learning, S[j]);
  return a;
}

/// Trapezoid L1 norm of a - b.
inline double l1_distance(const DensityField& a, const DensityField& b) {
  require_same_grid(a, b);
  std::vector<double> d(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) d[j] = std::abs(a[j] - b[j]);
  return trapezoid(d, a.grid);
}

inline double trajectory_distance(const std::vector<DensityField>& a,
                                  const std::vector<DensityField>& b) {
  double worst = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) worst = std::max(worst, l1_distance(a[n], b[n]));
  return worst;
}

namespace detail {

/// The forward/backward alternation shared by both solvers. `forward` maps a
/// control trajectory (or none, meaning S = 1) to a density pass; `backward`
/// maps densities and a control guess to a value/control pass.
template <class Forward, class Backward>
SolutionTrajectory run_fixed_point(const RunConfig& cfg, double dt, std::size_t steps,
                                   Forward&& forward, Backward&& backward, const Logger& log) {
  SolutionTrajectory traj;
  traj.grid = cfg.grid;
  traj.dt = dt;
  traj.times.resize(steps + 1);
  for (std::size_t n = 0; n <= steps; ++n) traj.times[n] = static_cast<double>(n) * dt;

  ControlField ones(cfg.grid, 1.0);
  std::vector<ControlField> S_guess(steps + 1, ones);
  ForwardPass fwd = forward(static_cast<const std::vector<ControlField>*>(nullptr));
  BackwardPass bwd;
  auto& diag = traj.diagnostics;
  for (std::size_t it = 1; it <= cfg.fp_max_iter; ++it) {
    bwd = backward(fwd.f, S_guess);
    diag.policy_sweeps += bwd.policy_sweeps;
    diag.unconverged_levels += bwd.unconverged_levels;
    ForwardPass next = forward(&bwd.S);
    const double residual = trajectory_distance(next.f, fwd.f);
    diag.residuals.push_back(residual);
    diag.iterations = it;
    fwd = std::move(next);
    if (log) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "fixed point iteration %zu: residual %.6e", it, residual);
      log(buf);
    }
    if (residual < cfg.fp_tol) {
      diag.converged = true;
      break;
    }
    S_guess = bwd.S;
  }
  traj.f = std::move(fwd.f);
  traj.V = std::move(bwd.V);
  traj.S = std::move(bwd.S);
  diag.mass = std::move(fwd.diagnostics.mass);
  diag.mean = std::move(fwd.diagnostics.mean);
  diag.clipped_mass = std::move(fwd.diagnostics.clipped_mass);
  diag.boundary_flux = std::move(fwd.diagnostics.boundary_flux);
  return traj;
}

}  // namespace detail

/// Fixed-point iteration of the nonlocal system. The first forward pass uses
/// S = 1; each iteration then solves backward against the latest densities and
/// forward with the new controls. The residual is the time-supremum of the L1
/// distance between consecutive density trajectories.
inline SolutionTrajectory fixed_point_solve(const RunConfig& cfg, const Logger& log = {}) {
  cfg.validate();
  const double dt = cfg.nonlocal_dt();
  cfg.check_divides(dt);
  const std::size_t steps = RunConfig::steps_for(cfg.T, dt);
  const auto init = initial_datum(cfg);
  if (log) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "initial datum normalization constant %.17g", init.normalization);
    log(buf);
  }
  const KernelTable table(cfg.model.kernel, cfg.grid);
  const auto& learning = cfg.model.learning;

  auto forward = [&](const std::vector<ControlField>* S) {
    std::vector<AlphaField> alphas;
    alphas.reserve(steps);
    const AlphaField saturated(cfg.grid, eval_alpha(learning, 1.0));
    for (std::size_t n = 0; n < steps; ++n) {
      if (cfg.fixed_control)
        alphas.emplace_back(cfg.grid, *cfg.fixed_control);
      else if (S)
        alphas.push_back(alpha_field((*S)[n], learning));
      else
        alphas.push_back(saturated);
    }
    return forward_solve(init.f, alphas, table, dt);
  };
  auto backward = [&](const std::vector<DensityField>& f, const std::vector<ControlField>& guess) {
    return solve_backward(f, cfg.model, table, dt, guess);
  };
  auto traj = detail::run_fixed_point(cfg, dt, steps, forward, backward, log);
  traj.diagnostics.normalization = init.normalization;
  return traj;
}

struct ConvergenceReport {
  double final_residual = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double worst_mass_drift = 0.0;      // max_n |mass_n - mass_0|
  double worst_step_mass_drift = 0.0; // max_n |mass_{n+1} - mass_n|
  std::size_t mean_violations = 0;    // steps with mean_{n+1} < mean_n - 1e-10
  double V_violation_max = 0.0;       // max over slices and nodes of V_j - V_{j+1}
  double S_violation_max = 0.0;       // max over slices and nodes of S_{j+1} - S_j
  std::size_t V_violations = 0;       // nodes beyond slack 1e-8 (1 + |V_j|)
  std::size_t S_violations = 0;       // nodes beyond slack 1e-8
};

inline ConvergenceReport convergence_report(const SolutionTrajectory& traj) {
  ConvergenceReport r;
  const auto& d = traj.diagnostics;
  r.final_residual = d.residuals.empty() ? 0.0 : d.residuals.back();
  r.iterations = d.iterations;
  r.converged = d.converged;
  for (std::size_t n = 0; n < d.mass.size(); ++n) {
    r.worst_mass_drift = std::max(r.worst_mass_drift, std::abs(d.mass[n] - d.mass[0]));
    if (n > 0) {
      r.worst_step_mass_drift = std::max(r.worst_step_mass_drift, std::abs(d.mass[n] - d.mass[n - 1]));
    }
  }
  for (std::size_t n = 1; n < d.mean.size(); ++n)
    if (d.mean[n] < d.mean[n - 1] - 1e-10) ++r.mean_violations;
  for (const auto& V : traj.V) {
    for (std::size_t j = 0; j + 1 < V.size(); ++j) {
      const double drop = V[j] - V[j + 1];
      r.V_violation_max = std::max(r.V_violation_max, drop);
      if (drop > 1e-8 * (1.0 + std::abs(V[j]))) ++r.V_violations;
    }
  }
  for (const auto& S : traj.S) {
    for (std::size_t j = 0; j + 1 < S.size(); ++j) {
      const double rise = S[j + 1] - S[j];
      r.S_violation_max = std::max(r.S_violation_max, rise);
      if (rise > 1e-8) ++r.S_violations;
    }
  }
  return r;
}

}  // namespace kgrowth
