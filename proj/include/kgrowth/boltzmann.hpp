#pragma once

// Forward integration of the kinetic learning equation
//
//   df/dt (z) = f(z) int_0^z a(y) k(z,y) f(y) dy - a(z) f(z) int_z^zmax k(y,z) f(y) dy
//
// with explicit Euler in time and trapezoidal quadrature in knowledge.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kgrowth/errors.hpp"
#include "kgrowth/grid.hpp"
#include "kgrowth/model.hpp"

namespace kgrowth {

/// Kernel sampled on all node pairs: at(j, i) = k(max(z_i, z_j), min(z_i, z_j)),
/// i.e. always "teacher level first". Both the gain and the loss integral at
/// node j read row j of this table.
class KernelTable {
 public:
  KernelTable(const KernelSpec& spec, const KnowledgeGrid& grid)
      : spec_(spec), grid_(grid), n_(grid.size()), data_(n_ * n_) {
    spec.validate();
    for (std::size_t j = 0; j < n_; ++j) {
      const double zj = grid.node(j);
      for (std::size_t i = j; i < n_; ++i) {
        const double k = eval_kernel(spec, grid.node(i), zj);
        data_[j * n_ + i] = k;
        data_[i * n_ + j] = k;
      }
    }
  }

  double at(std::size_t j, std::size_t i) const { return data_[j * n_ + i]; }
  std::span<const double> row(std::size_t j) const { return {data_.data() + j * n_, n_}; }
  const KernelSpec& spec() const { return spec_; }
  const KnowledgeGrid& grid() const { return grid_; }

 private:
  KernelSpec spec_;
  KnowledgeGrid grid_;
  std::size_t n_;
  std::vector<double> data_;
};

/// Collision operator G(f,f) - L(f,f) at every node.
///
/// At interior nodes the node-j self-interaction appears with equal weight
/// dz/2 in the trapezoid sums of gain and loss and cancels. At z = 0 only the
/// loss sum carries it, and at z_max only the gain sum; those two unmatched
/// terms are dropped as well, which keeps the discrete weak form exact (sum of
/// trapezoid weights times the rate vanishes up to rounding). Each row sum runs
/// left to right.
inline std::vector<double> collision_rhs(const DensityField& f, const AlphaField& a,
                                         const KernelTable& table) {
  require_same_grid(f, a);
  if (!(table.grid() == f.grid)) throw DomainError("grid mismatch");
  const std::size_t n = f.size();
  const double dz = f.grid.dz();

  // trapezoid weights of the gain integral on [0, z_j] and the loss integral on
  // [z_j, z_max] depend only on the partner node once the diagonal is dropped
  std::vector<double> gain_w(n), loss_w(n);
  for (std::size_t i = 0; i < n; ++i) {
    gain_w[i] = (i == 0 ? 0.5 * dz : dz) * a[i] * f[i];
    loss_w[i] = (i + 1 == n ? 0.5 * dz : dz) * f[i];
  }

  std::vector<double> rhs(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (f[j] == 0.0) continue;
    const auto k = table.row(j);
    double gain = 0.0;
    for (std::size_t i = 0; i < j; ++i) gain += k[i] * gain_w[i];
    double loss = 0.0;
    for (std::size_t i = j + 1; i < n; ++i) loss += k[i] * loss_w[i];
    rhs[j] = f[j] * gain - a[j] * f[j] * loss;
  }
  return rhs;
}

inline std::vector<double> collision_rhs(const DensityField& f, const AlphaField& a,
                                         const KernelSpec& kernel) {
  return collision_rhs(f, a, KernelTable(kernel, f.grid));
}

struct BoltzmannStep {
  DensityField f;
  double clipped_mass = 0.0;  // trapezoid mass added by zeroing negative values
};

/// Explicit Euler step with negative values clipped to zero. Throws
/// StabilityError when clipping changes the mass by more than 1%.
inline BoltzmannStep boltzmann_step(const DensityField& f, const AlphaField& a,
                                    const KernelTable& table, double dt) {
  if (!(dt > 0.0)) throw DomainError("boltzmann_step: dt > 0");
  const auto rhs = collision_rhs(f, a, table);
  BoltzmannStep out{f, 0.0};
  std::vector<double> clipped(f.size(), 0.0);
  bool any_clipped = false;
  for (std::size_t j = 0; j < f.size(); ++j) {
    const double v = f[j] + dt * rhs[j];
    if (v < 0.0) {
      clipped[j] = -v;
      any_clipped = true;
      out.f[j] = 0.0;
    } else {
      out.f[j] = v;
    }
  }
  if (any_clipped) {
    out.clipped_mass = trapezoid(clipped, f.grid);
    const double mass = moment(f, 0);
    if (out.clipped_mass > 0.01 * mass)
      throw StabilityError("boltzmann_step: clipping removed more than 1% of the mass; reduce dt");
  }
  return out;
}

inline BoltzmannStep boltzmann_step(const DensityField& f, const AlphaField& a,
                                    const KernelSpec& kernel, double dt) {
  return boltzmann_step(f, a, KernelTable(kernel, f.grid), dt);
}

/// Closed-form solution of dG/dt = G (1 - G), G the survival function under
/// constant kernel and unit learning rate.
inline double logistic_oracle(double survival0, double t) {
  if (survival0 < 0.0 || survival0 > 1.0) throw DomainError("logistic_oracle: survival in [0, 1]");
  if (t < 0.0) throw DomainError("logistic_oracle: t >= 0");
  const double e = std::exp(t);
  return survival0 * e / (1.0 - survival0 + survival0 * e);
}

/// Largest node with f >= threshold, or 0 if there is none.
inline double support_extent(const DensityField& f, double threshold) {
  if (!(threshold > 0.0)) throw DomainError("support_extent: threshold > 0");
  for (std::size_t j = f.size(); j-- > 0;) {
    if (f[j] >= threshold) return f.grid.node(j);
  }
  return 0.0;
}

/// Per-step bookkeeping of a forward pass.
struct ForwardDiagnostics {
  std::vector<double> mass;          // per time level
  std::vector<double> mean;          // per time level
  std::vector<double> clipped_mass;   // per step (size = levels - 1)
  std::vector<double> boundary_flux;  // per step; conservative local scheme only
};

struct ForwardPass {
  std::vector<DensityField> f;  // time levels 0..N
  ForwardDiagnostics diagnostics;
};

/// Integrates from f0 over alphas.size() Euler steps; alphas[n] drives the
/// step from level n to n + 1.
inline ForwardPass forward_solve(const DensityField& f0, std::span<const AlphaField> alphas,
                                 const KernelTable& table, double dt) {
  ForwardPass out;
  out.f.reserve(alphas.size() + 1);
  out.f.push_back(f0);
  out.diagnostics.mass.push_back(moment(f0, 0));
  out.diagnostics.mean.push_back(moment(f0, 1));
  for (std::size_t n = 0; n < alphas.size(); ++n) {
    auto step = boltzmann_step(out.f.back(), alphas[n], table, dt);
    out.diagnostics.clipped_mass.push_back(step.clipped_mass);
    out.diagnostics.mass.push_back(moment(step.f, 0));
    out.diagnostics.mean.push_back(moment(step.f, 1));
    out.f.push_back(std::move(step.f));
  }
  return out;
}

}  // namespace kgrowth
