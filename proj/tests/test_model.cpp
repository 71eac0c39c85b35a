#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "kgrowth/model.hpp"

using namespace kgrowth;

namespace {

ModelSpec with_utility(UtilitySpec u) {
  ModelSpec m;
  m.utility = u;
  return m;
}

}  // namespace

TEST(Kernel, PolynomialAndExponentialValues) {
  const auto poly = KernelSpec::polynomial(0.5, 1.0);
  EXPECT_DOUBLE_EQ(eval_kernel(poly, 4.0, 4.0), 1.0);
  EXPECT_DOUBLE_EQ(eval_kernel(poly, 4.0, 2.0), 0.75);
  EXPECT_NEAR(eval_kernel(KernelSpec::exponential(1.0, 1.0), 3.0, 1.0), std::exp(-2.0), 1e-15);
  EXPECT_DOUBLE_EQ(eval_kernel(KernelSpec::constant(), 7.0, 0.1), 1.0);
}

TEST(Kernel, DiagonalAtOriginAndDomainError) {
  const auto poly = KernelSpec::polynomial(0.5, 1.0);
  EXPECT_DOUBLE_EQ(eval_kernel(poly, 0.0, 0.0), 1.0);
  EXPECT_THROW(eval_kernel(poly, 0.0, 0.5), DomainError);
  EXPECT_THROW(eval_kernel(poly, -1.0, 0.0), DomainError);
}

TEST(Kernel, ValidationNamesTheInvariant) {
  EXPECT_THROW(KernelSpec::polynomial(1.0, 1.0).validate(), ConfigError);
  EXPECT_THROW(KernelSpec::polynomial(0.5, 0.0).validate(), ConfigError);
  EXPECT_THROW(KernelSpec::exponential(0.0, 1.0).validate(), ConfigError);
  EXPECT_NO_THROW(KernelSpec::exponential(2.0, 3.0).validate());
}

TEST(Kernel, PolynomialMonotoneInLowerLevelAndBounded) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const auto spec = KernelSpec::polynomial(0.05 + 0.9 * u(rng), 0.1 + 3.0 * u(rng));
    const double z = 0.1 + 9.9 * u(rng);
    double prev = -1.0;
    for (int i = 0; i <= 50; ++i) {
      const double y = z * i / 50.0;
      const double v = eval_kernel(spec, z, y);
      EXPECT_GE(v, spec.delta - 1e-15);
      EXPECT_LE(v, 1.0 + 1e-15);
      EXPECT_GE(v, prev);
      prev = v;
    }
  }
}

TEST(Kernel, ExponentialSymmetricAndBounded) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  const auto spec = KernelSpec::exponential(1.7, 0.8);
  for (int k = 0; k < 200; ++k) {
    const double a = u(rng), b = u(rng);
    const double v = eval_kernel(spec, a, b);
    EXPECT_EQ(v, eval_kernel(spec, b, a));
    EXPECT_GT(v, 0.0);
    EXPECT_LE(v, 1.7);
  }
}

TEST(Utility, Values) {
  EXPECT_DOUBLE_EQ(eval_utility(UtilitySpec::linear(), 1.0), 1.0);
  EXPECT_DOUBLE_EQ(eval_utility(UtilitySpec::isoelastic(0.5), 4.0), 4.0);
  EXPECT_DOUBLE_EQ(eval_utility(UtilitySpec::logarithmic(0.0), 1.0), 0.0);
  EXPECT_THROW(eval_utility(UtilitySpec::logarithmic(0.0), 0.0), DomainError);
  EXPECT_NEAR(eval_utility(UtilitySpec::logarithmic(1e-6), 0.0), std::log(1e-6), 1e-12);
}

TEST(Utility, Derivatives) {
  EXPECT_DOUBLE_EQ(eval_utility_deriv(UtilitySpec::linear(), 7.0), 1.0);
  EXPECT_DOUBLE_EQ(eval_utility_deriv(UtilitySpec::isoelastic(0.5), 4.0), 0.5);
  EXPECT_DOUBLE_EQ(eval_utility_deriv(UtilitySpec::logarithmic(0.0), 2.0), 0.5);
  EXPECT_THROW(eval_utility_deriv(UtilitySpec::isoelastic(0.5), 0.0), DomainError);
}

TEST(Utility, MidpointConcavity) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  const UtilitySpec specs[] = {UtilitySpec::linear(), UtilitySpec::isoelastic(0.3),
                               UtilitySpec::isoelastic(0.8), UtilitySpec::logarithmic(1e-6)};
  for (const auto& s : specs) {
    for (int k = 0; k < 500; ++k) {
      const double a = u(rng), b = u(rng);
      EXPECT_GE(eval_utility(s, 0.5 * (a + b)), 0.5 * (eval_utility(s, a) + eval_utility(s, b)) - 1e-12);
    }
  }
}

TEST(LearningRate, ValuesAndDerivative) {
  const LearningRateSpec a{2.0};
  EXPECT_DOUBLE_EQ(eval_alpha(a, 1.0), 2.0);
  EXPECT_DOUBLE_EQ(eval_alpha_deriv(a, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(eval_alpha(a, 0.25), 1.0);
  EXPECT_DOUBLE_EQ(eval_alpha_deriv(a, 0.25), 2.0);
  EXPECT_DOUBLE_EQ(eval_alpha(a, 0.0), 0.0);
  EXPECT_TRUE(std::isinf(eval_alpha_deriv(a, 0.0)));
  EXPECT_THROW(eval_alpha(a, 1.5), DomainError);
}

TEST(OptimalControl, RegimeExamples) {
  const auto lin = with_utility(UtilitySpec::linear());
  EXPECT_EQ(optimal_control(lin, 1.0, -0.3), 0.0);
  EXPECT_EQ(optimal_control(lin, 1.0, 2.0), 1.0);
  EXPECT_DOUBLE_EQ(optimal_control(lin, 2.0, 1.0), 0.25);
  const auto log = with_utility(UtilitySpec::logarithmic());
  const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
  for (double z : {0.3, 1.0, 7.0}) EXPECT_NEAR(optimal_control(log, z, 1.0), golden * golden, 1e-15);
  EXPECT_THROW(optimal_control(lin, 0.0, 1.0), DomainError);
}

TEST(OptimalControl, OracleExamples) {
  const auto lin = with_utility(UtilitySpec::linear());
  EXPECT_NEAR(optimal_control_oracle(lin, 2.0, 1.0, 1000000), 0.25, 1e-6);
  EXPECT_EQ(optimal_control_oracle(lin, 1.0, 10.0, 1000000), 1.0);
  for (const auto& u : {UtilitySpec::linear(), UtilitySpec::isoelastic(0.5), UtilitySpec::logarithmic()}) {
    EXPECT_EQ(optimal_control_oracle(with_utility(u), 3.0, -0.5, 1000), 0.0);
    EXPECT_EQ(optimal_control_oracle(with_utility(u), 3.0, 0.0, 1000), 0.0);
  }
  EXPECT_THROW(optimal_control_oracle(lin, 1.0, 1.0, 999), DomainError);
}

TEST(OptimalControl, ClosedFormsMatchBisection) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> zd(0.1, 10.0), bd(0.0, 20.0);
  for (const auto& u : {UtilitySpec::linear(), UtilitySpec::logarithmic()}) {
    const auto spec = with_utility(u);
    for (int k = 0; k < 300; ++k) {
      const double z = zd(rng), b = bd(rng);
      EXPECT_NEAR(optimal_control(spec, z, b), optimal_control_bisect(spec, z, b), 2e-12);
    }
  }
}

TEST(OptimalControl, RandomizedAgainstBruteForce) {
  // the logarithmic optimizer solves the unregularized condition, so its
  // brute-force reference uses epsilon = 0 as well
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> zd(0.1, 10.0), bd(-1.0, 20.0);
  for (const auto& u : {UtilitySpec::linear(), UtilitySpec::isoelastic(0.5), UtilitySpec::logarithmic(0.0)}) {
    const auto spec = with_utility(u);
    for (int k = 0; k < 25; ++k) {
      const double z = zd(rng), b = bd(rng);
      EXPECT_NEAR(optimal_control(spec, z, b), optimal_control_oracle(spec, z, b, 1000000), 2e-6)
          << to_string(u.family) << " z=" << z << " B=" << b;
    }
  }
}

TEST(OptimalControl, NonDecreasingInBenefit) {
  for (const auto& u : {UtilitySpec::linear(), UtilitySpec::isoelastic(0.5), UtilitySpec::logarithmic()}) {
    const auto spec = with_utility(u);
    for (double z : {0.2, 1.0, 5.0}) {
      double prev = 0.0;
      for (int i = 0; i <= 400; ++i) {
        const double b = -1.0 + 21.0 * i / 400.0;
        const double s = optimal_control(spec, z, b);
        EXPECT_GE(s, prev - 1e-12);
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 1.0);
        prev = s;
      }
    }
  }
}

TEST(OptimalControl, IsoelasticNeverSaturates) {
  const auto spec = with_utility(UtilitySpec::isoelastic(0.5));
  for (double b : {1.0, 100.0, 1e6}) EXPECT_LT(optimal_control(spec, 0.1, b), 1.0);
}
