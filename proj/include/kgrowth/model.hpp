#pragma once

// Closed-form model ingredients: learning kernels, utilities, the learning
// rate alpha(s) = alpha0 * sqrt(s), and the pointwise optimal control S(B).

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>

#include "kgrowth/errors.hpp"

namespace kgrowth {

enum class KernelFamily { constant, polynomial, exponential };
enum class UtilityFamily { linear, isoelastic, logarithmic };

inline std::string to_string(KernelFamily f) {
  switch (f) {
    case KernelFamily::constant: return "constant";
    case KernelFamily::polynomial: return "polynomial";
    case KernelFamily::exponential: return "exponential";
  }
  return "?";
}

inline std::string to_string(UtilityFamily f) {
  switch (f) {
    case UtilityFamily::linear: return "linear";
    case UtilityFamily::isoelastic: return "isoelastic";
    case UtilityFamily::logarithmic: return "logarithmic";
  }
  return "?";
}

/// Learning kernel k(z, y): rate at which an agent at level y learns from one
/// at level z >= y.
struct KernelSpec {
  KernelFamily family = KernelFamily::polynomial;
  double delta = 0.5;  // polynomial floor
  double kappa = 1.0;  // decay exponent / rate
  double mu = 1.0;     // exponential amplitude

  static KernelSpec constant() { return {KernelFamily::constant, 0.5, 1.0, 1.0}; }
  static KernelSpec polynomial(double delta, double kappa) {
    return {KernelFamily::polynomial, delta, kappa, 1.0};
  }
  static KernelSpec exponential(double mu, double kappa) {
    return {KernelFamily::exponential, 0.5, kappa, mu};
  }

  void validate() const {
    if (family == KernelFamily::polynomial) {
      if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("kernel: 0 < delta < 1");
      if (!(kappa > 0.0)) throw ConfigError("kernel: kappa > 0");
    } else if (family == KernelFamily::exponential) {
      if (!(mu > 0.0)) throw ConfigError("kernel: mu > 0");
      if (!(kappa > 0.0)) throw ConfigError("kernel: kappa > 0");
    }
  }

  bool operator==(const KernelSpec&) const = default;
};

/// Utility of productivity p = (1 - s) z.
struct UtilitySpec {
  UtilityFamily family = UtilityFamily::linear;
  double zeta = 0.5;           // isoelastic risk aversion
  double epsilon_reg = 1e-6;   // logarithmic shift, U = ln(p + eps)

  static UtilitySpec linear() { return {UtilityFamily::linear, 0.5, 1e-6}; }
  static UtilitySpec isoelastic(double zeta) { return {UtilityFamily::isoelastic, zeta, 1e-6}; }
  static UtilitySpec logarithmic(double eps = 1e-6) {
    return {UtilityFamily::logarithmic, 0.5, eps};
  }

  void validate() const {
    if (family == UtilityFamily::isoelastic && !(zeta > 0.0 && zeta < 1.0))
      throw ConfigError("utility: 0 < zeta < 1");
    if (family == UtilityFamily::logarithmic && !(epsilon_reg >= 0.0))
      throw ConfigError("utility: epsilon >= 0");
  }

  /// True when U(p) >= 0 for all p >= 0.
  bool non_negative() const { return family != UtilityFamily::logarithmic; }

  bool operator==(const UtilitySpec&) const = default;
};

/// alpha(s) = alpha0 * sqrt(s).
struct LearningRateSpec {
  double alpha0 = 2.0;

  void validate() const {
    if (!(alpha0 > 0.0)) throw ConfigError("alpha0 > 0");
  }
  bool operator==(const LearningRateSpec&) const = default;
};

struct ModelSpec {
  KernelSpec kernel;
  UtilitySpec utility;
  LearningRateSpec learning;
  double discount_rate = 0.05;

  void validate() const {
    kernel.validate();
    utility.validate();
    learning.validate();
    if (!(discount_rate >= 0.0)) throw ConfigError("r >= 0");
  }
  bool operator==(const ModelSpec&) const = default;
};

// ---------------------------------------------------------------------------

inline double eval_kernel(const KernelSpec& spec, double z, double y) {
  if (z < 0.0 || y < 0.0) throw DomainError("eval_kernel: knowledge levels must be >= 0");
  switch (spec.family) {
    case KernelFamily::constant:
      return 1.0;
    case KernelFamily::polynomial:
      if (z == 0.0) {
        if (y > 0.0) throw DomainError("eval_kernel: polynomial kernel needs z > 0 when y > 0");
        return 1.0;  // diagonal limit
      }
      return spec.delta + (1.0 - spec.delta) * std::pow(y / z, spec.kappa);
    case KernelFamily::exponential:
      return spec.mu * std::exp(-spec.kappa * std::abs(z - y));
  }
  return 1.0;
}

/// Lower and upper kernel bounds (k_lower, k_upper) used by the growth bracket.
inline std::pair<double, double> kernel_bounds(const KernelSpec& spec) {
  switch (spec.family) {
    case KernelFamily::constant: return {1.0, 1.0};
    case KernelFamily::polynomial: return {spec.delta, 1.0};
    case KernelFamily::exponential: return {0.0, spec.mu};
  }
  return {1.0, 1.0};
}

inline double eval_utility(const UtilitySpec& spec, double p) {
  switch (spec.family) {
    case UtilityFamily::linear:
      return p;
    case UtilityFamily::isoelastic:
      if (p < 0.0) throw DomainError("eval_utility: p >= 0");
      return std::pow(p, 1.0 - spec.zeta) / (1.0 - spec.zeta);
    case UtilityFamily::logarithmic:
      if (!(p + spec.epsilon_reg > 0.0)) throw DomainError("eval_utility: p + epsilon > 0");
      return std::log(p + spec.epsilon_reg);
  }
  return 0.0;
}

inline double eval_utility_deriv(const UtilitySpec& spec, double p) {
  switch (spec.family) {
    case UtilityFamily::linear:
      return 1.0;
    case UtilityFamily::isoelastic:
      if (!(p > 0.0)) throw DomainError("eval_utility_deriv: isoelastic U'(0) is unbounded");
      return std::pow(p, -spec.zeta);
    case UtilityFamily::logarithmic:
      if (!(p + spec.epsilon_reg > 0.0)) throw DomainError("eval_utility_deriv: p + epsilon > 0");
      return 1.0 / (p + spec.epsilon_reg);
  }
  return 0.0;
}

inline double eval_alpha(const LearningRateSpec& spec, double s) {
  if (s < 0.0 || s > 1.0) throw DomainError("eval_alpha: s in [0, 1]");
  return spec.alpha0 * std::sqrt(s);
}

/// alpha'(s); returns +inf at s = 0.
inline double eval_alpha_deriv(const LearningRateSpec& spec, double s) {
  if (s < 0.0 || s > 1.0) throw DomainError("eval_alpha_deriv: s in [0, 1]");
  if (s == 0.0) return std::numeric_limits<double>::infinity();
  return spec.alpha0 / (2.0 * std::sqrt(s));
}

// ---------------------------------------------------------------------------
// Optimal control: argmax_s U((1-s) z) + alpha(s) B.

namespace detail {

inline constexpr double kControlCap = 1.0 - 1e-12;
inline constexpr double kBisectTol = 1e-12;

/// alpha'(s) B - z U'((1-s) z) with the unregularized marginal utility.
/// Strictly decreasing in s on (0, 1).
inline double foc_residual(const ModelSpec& spec, double z, double b, double s) {
  const double da = spec.learning.alpha0 / (2.0 * std::sqrt(s));
  const double p = (1.0 - s) * z;
  switch (spec.utility.family) {
    case UtilityFamily::linear: return da * b - z;
    case UtilityFamily::isoelastic: return da * b - z * std::pow(p, -spec.utility.zeta);
    case UtilityFamily::logarithmic: return da * b - 1.0 / (1.0 - s);
  }
  return 0.0;
}

}  // namespace detail

/// Interior root of the first-order condition by bisection on (0, 1 - 1e-12].
/// Used directly for isoelastic utilities and as a cross-check of the closed forms.
inline double optimal_control_bisect(const ModelSpec& spec, double z, double b) {
  if (!(z > 0.0)) throw DomainError("optimal_control: z > 0");
  if (b <= 0.0) return 0.0;
  double lo = 0.0;
  double hi = detail::kControlCap;
  if (detail::foc_residual(spec, z, b, hi) >= 0.0) {
    return spec.utility.family == UtilityFamily::linear ? 1.0 : hi;
  }
  while (hi - lo > detail::kBisectTol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (detail::foc_residual(spec, z, b, mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// Unique maximizer S(B) of U((1-s) z) + alpha(s) B over s in [0, 1].
///
/// Three regimes: B <= 0 gives 0; B alpha'(1) >= z U'(0) (finite U'(0), i.e.
/// linear utility) saturates at 1; otherwise the root of the first-order
/// condition. Square-root learning makes the linear and logarithmic roots
/// closed-form; the isoelastic root is bracketed and bisected.
inline double optimal_control(const ModelSpec& spec, double z, double b) {
  if (!(z > 0.0)) throw DomainError("optimal_control: z > 0");
  if (b <= 0.0) return 0.0;
  const double a0 = spec.learning.alpha0;
  switch (spec.utility.family) {
    case UtilityFamily::linear: {
      // alpha'(1) = a0 / 2, U'(0) = 1
      if (b * a0 * 0.5 >= z) return 1.0;
      const double root = a0 * b / (2.0 * z);
      return root * root;
    }
    case UtilityFamily::logarithmic: {
      // a0 (1 - S) / (2 sqrt(S)) = 1 / B  ->  a0 B u^2 + 2u - a0 B = 0, u = sqrt(S)
      const double ab = a0 * b;
      const double u = ab / (1.0 + std::sqrt(1.0 + ab * ab));
      return u * u;
    }
    case UtilityFamily::isoelastic:
      return optimal_control_bisect(spec, z, b);
  }
  return 0.0;
}

/// Brute-force argmax over a uniform grid of n_samples points in [0, 1];
/// ties resolve toward the smaller s. Samples where a logarithmic utility is
/// undefined count as -inf.
inline double optimal_control_oracle(const ModelSpec& spec, double z, double b,
                                     std::size_t n_samples) {
  if (n_samples < 1000) throw DomainError("optimal_control_oracle: n_samples >= 1000");
  const bool log_family = spec.utility.family == UtilityFamily::logarithmic;
  double best_s = 0.0;
  double best = -std::numeric_limits<double>::infinity();
  const double h = 1.0 / static_cast<double>(n_samples - 1);
  for (std::size_t k = 0; k < n_samples; ++k) {
    const double s = (k + 1 == n_samples) ? 1.0 : static_cast<double>(k) * h;
    const double p = (1.0 - s) * z;
    if (log_family && !(p + spec.utility.epsilon_reg > 0.0)) continue;
    const double value = eval_utility(spec.utility, p) + eval_alpha(spec.learning, s) * b;
    if (value > best) {
      best = value;
      best_s = s;
    }
  }
  return best_s;
}

}  // namespace kgrowth
