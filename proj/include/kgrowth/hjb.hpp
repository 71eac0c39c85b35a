#pragma once

// Backward solution of the Hamilton-Jacobi-Bellman equation
//
//   dV/dt - r V = -max_s [ U((1-s) z) + alpha(s) B(z) ],
//   B(z) = int_z^zmax (V(y) - V(z)) f(y) k(y, z) dy,
//
// by policy iteration on each implicit time level.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "kgrowth/boltzmann.hpp"
#include "kgrowth/errors.hpp"
#include "kgrowth/grid.hpp"
#include "kgrowth/model.hpp"

namespace kgrowth {

/// B_j = trapezoid over [z_j, z_max] of (V(y) - V(z_j)) f(y) k(y, z_j).
inline BenefitField benefit(const ValueField& V, const DensityField& f, const KernelTable& table) {
  require_same_grid(V, f);
  if (!(table.grid() == f.grid)) throw DomainError("grid mismatch");
  const std::size_t n = f.size();
  const double dz = f.grid.dz();
  BenefitField b(f.grid);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const auto k = table.row(j);
    double sum = 0.0;
    // the i = j term vanishes identically
    for (std::size_t i = j + 1; i < n; ++i) {
      const double w = (i + 1 == n) ? 0.5 * dz : dz;
      sum += w * (V[i] - V[j]) * f[i] * k[i];
    }
    b[j] = sum;
  }
  return b;
}

inline BenefitField benefit(const ValueField& V, const DensityField& f, const KernelSpec& kernel) {
  return benefit(V, f, KernelTable(kernel, f.grid));
}

/// Control at the z = 0 node, where the interior formula degenerates: the
/// z -> 0 limit is 1 for linear and isoelastic utilities and the
/// z-independent root for the logarithmic one.
inline double boundary_control(const ModelSpec& spec, double b) {
  if (b <= 0.0) return 0.0;
  if (spec.utility.family == UtilityFamily::logarithmic) return optimal_control(spec, 1.0, b);
  return 1.0;
}

inline ControlField policy_from_benefit(const BenefitField& b, const ModelSpec& spec) {
  ControlField s(b.grid);
  for (std::size_t j = 0; j < b.size(); ++j) {
    const double z = b.grid.node(j);
    s[j] = z > 0.0 ? optimal_control(spec, z, b[j]) : boundary_control(spec, b[j]);
  }
  return s;
}

inline ControlField policy_update(const ValueField& V, const DensityField& f, const ModelSpec& spec,
                                  const KernelTable& table) {
  return policy_from_benefit(benefit(V, f, table), spec);
}

inline ControlField policy_update(const ValueField& V, const DensityField& f,
                                  const ModelSpec& spec) {
  return policy_update(V, f, spec, KernelTable(spec.kernel, f.grid));
}

/// Implicit backward step on one time level, for a fixed density f^n.
///
/// The relation
///   (1 + r dt) V_j - dt A_j B_j(V) = V_next_j + dt U_j
/// only couples V_j to nodes i > j (the benefit integrates upward and the
/// i = j term cancels), so the system is upper triangular and back
/// substitution from z_max down solves it exactly.
class HjbLevel {
 public:
  HjbLevel(const DensityField& f, const KernelTable& table)
      : f_(f), table_(table), weighted_(f.size()), k_mass_(f.size(), 0.0) {
    if (!(table.grid() == f.grid)) throw DomainError("grid mismatch");
    const std::size_t n = f.size();
    const double dz = f.grid.dz();
    for (std::size_t i = 0; i < n; ++i) weighted_[i] = ((i + 1 == n) ? 0.5 * dz : dz) * f[i];
    for (std::size_t j = 0; j + 1 < n; ++j) {
      const auto k = table.row(j);
      double sum = 0.0;
      for (std::size_t i = j + 1; i < n; ++i) sum += k[i] * weighted_[i];
      k_mass_[j] = sum;
    }
  }

  struct Result {
    ValueField V;
    BenefitField B;
  };

  Result solve(const ValueField& V_next, const ControlField& S, const ModelSpec& spec,
               double dt) const {
    require_same_grid(V_next, f_);
    require_same_grid(S, f_);
    if (!(dt > 0.0)) throw DomainError("hjb_backward_step: dt > 0");
    const std::size_t n = f_.size();
    const double r = spec.discount_rate;
    Result out{ValueField(f_.grid), BenefitField(f_.grid)};
    for (std::size_t j = n; j-- > 0;) {
      const auto k = table_.row(j);
      double coupled = 0.0;
      for (std::size_t i = j + 1; i < n; ++i) coupled += k[i] * weighted_[i] * out.V[i];
      const double a = eval_alpha(spec.learning, S[j]);
      const double u = eval_utility(spec.utility, (1.0 - S[j]) * f_.grid.node(j));
      const double v = (V_next[j] + dt * u + dt * a * coupled) / (1.0 + r * dt + dt * a * k_mass_[j]);
      if (!std::isfinite(v)) throw NumericalError("hjb_backward_step: non-finite value");
      out.V[j] = v;
      out.B[j] = coupled - v * k_mass_[j];
    }
    return out;
  }

  const DensityField& density() const { return f_; }

 private:
  const DensityField& f_;
  const KernelTable& table_;
  std::vector<double> weighted_;  // trapezoid weight times f on [z_j, z_max], i > j
  std::vector<double> k_mass_;    // sum_{i>j} k(z_i, z_j) w_i f_i
};

inline ValueField hjb_backward_step(const ValueField& V_next, const ControlField& S,
                                    const DensityField& f, const ModelSpec& spec,
                                    const KernelTable& table, double dt) {
  return HjbLevel(f, table).solve(V_next, S, spec, dt).V;
}

inline ValueField hjb_backward_step(const ValueField& V_next, const ControlField& S,
                                    const DensityField& f, const ModelSpec& spec, double dt) {
  return hjb_backward_step(V_next, S, f, spec, KernelTable(spec.kernel, f.grid), dt);
}

struct PolicyIterationOptions {
  double tol = 1e-10;          // sup-norm change of S between sweeps
  std::size_t max_iter = 50;
};

struct BackwardPass {
  std::vector<ValueField> V;    // levels 0..N, V[N] = 0
  std::vector<ControlField> S;  // levels 0..N, S[N] from the terminal condition
  std::size_t policy_sweeps = 0;
  std::size_t unconverged_levels = 0;
};

namespace detail {

/// Generic backward sweep: `make_level(n)` returns a solver for time level n
/// whose solve(V_next, S, spec, dt) yields {V, B}.
template <class MakeLevel>
BackwardPass backward_sweep(std::size_t levels, const KnowledgeGrid& grid, const ModelSpec& spec,
                            double dt, std::span<const ControlField> S_guess,
                            PolicyIterationOptions opts, MakeLevel&& make_level) {
  if (levels == 0) throw DomainError("solve_backward: empty density trajectory");
  if (!S_guess.empty() && S_guess.size() != levels)
    throw DomainError("solve_backward: control guess does not cover the trajectory");
  BackwardPass out;
  out.V.assign(levels, ValueField(grid));
  out.S.assign(levels, ControlField(grid));
  // V(T) = 0 gives B(T) = 0 for every benefit functional
  out.S[levels - 1] = policy_from_benefit(BenefitField(grid), spec);

  for (std::size_t n = levels - 1; n-- > 0;) {
    const auto level = make_level(n);
    ControlField S = S_guess.empty() ? ControlField(grid, 1.0) : S_guess[n];
    auto res = level.solve(out.V[n + 1], S, spec, dt);
    bool converged = false;
    for (std::size_t it = 0; it < opts.max_iter; ++it) {
      if (it > 0) res = level.solve(out.V[n + 1], S, spec, dt);
      ++out.policy_sweeps;
      ControlField next = policy_from_benefit(res.B, spec);
      double change = 0.0;
      for (std::size_t j = 0; j < S.size(); ++j) change = std::max(change, std::abs(next[j] - S[j]));
      if (change <= opts.tol) {
        converged = true;
        break;
      }
      S = std::move(next);
    }
    if (!converged) {
      ++out.unconverged_levels;
      res = level.solve(out.V[n + 1], S, spec, dt);
    }
    out.V[n] = std::move(res.V);
    out.S[n] = std::move(S);
  }
  return out;
}

}  // namespace detail

/// Backward sweep from V(T) = 0. On every level, alternates the implicit value
/// step and the policy update until S stops changing; the stored S is the one
/// that produced the stored V. `S_guess` seeds each level (defaults to S = 1).
inline BackwardPass solve_backward(std::span<const DensityField> f_traj, const ModelSpec& spec,
                                   const KernelTable& table, double dt,
                                   std::span<const ControlField> S_guess = {},
                                   PolicyIterationOptions opts = {}) {
  if (f_traj.empty()) throw DomainError("solve_backward: empty density trajectory");
  return detail::backward_sweep(f_traj.size(), f_traj.front().grid, spec, dt, S_guess, opts,
                                [&](std::size_t n) { return HjbLevel(f_traj[n], table); });
}

inline BackwardPass solve_backward(std::span<const DensityField> f_traj, const ModelSpec& spec,
                                   double dt) {
  if (f_traj.empty()) throw DomainError("solve_backward: empty density trajectory");
  return solve_backward(f_traj, spec, KernelTable(spec.kernel, f_traj.front().grid), dt);
}

}  // namespace kgrowth
