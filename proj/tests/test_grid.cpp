#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "kgrowth/coupling.hpp"
#include "kgrowth/grid.hpp"

using namespace kgrowth;

namespace {

const KnowledgeGrid kGrid(10.0, 1001);

// OLS slope of y on x, written out independently of tail_fit.
double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST(Grid, NodesAndSpacing) {
  EXPECT_DOUBLE_EQ(kGrid.dz(), 0.01);
  EXPECT_EQ(kGrid.node(0), 0.0);
  EXPECT_EQ(kGrid.node(1000), 10.0);
  const auto z = kGrid.nodes();
  for (std::size_t j = 1; j < z.size(); ++j) EXPECT_GT(z[j], z[j - 1]);
  EXPECT_THROW(KnowledgeGrid(10.0, 2), ConfigError);
  EXPECT_THROW(KnowledgeGrid(0.0, 11), ConfigError);
}

TEST(Trapezoid, ExactForAffine) {
  std::vector<double> one(kGrid.size(), 1.0);
  EXPECT_NEAR(trapezoid(one, kGrid), 10.0, 1e-12);
  EXPECT_NEAR(trapezoid(kGrid.nodes(), kGrid), 50.0, 1e-11);
  EXPECT_EQ(trapezoid(one, kGrid, 17, 17), 0.0);
  EXPECT_THROW(trapezoid(one, kGrid, 5, 4), DomainError);
  EXPECT_THROW(trapezoid(one, kGrid, 0, 1001), DomainError);
}

TEST(Trapezoid, Linear) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  std::vector<double> u(kGrid.size()), v(kGrid.size()), w(kGrid.size());
  for (int rep = 0; rep < 20; ++rep) {
    const double a = nd(rng), b = nd(rng);
    for (std::size_t j = 0; j < u.size(); ++j) {
      u[j] = nd(rng);
      v[j] = nd(rng);
      w[j] = a * u[j] + b * v[j];
    }
    const double lhs = trapezoid(w, kGrid);
    const double rhs = a * trapezoid(u, kGrid) + b * trapezoid(v, kGrid);
    EXPECT_NEAR(lhs, rhs, 1e-12 * (std::abs(a) + std::abs(b)) * 100.0);
  }
}

TEST(Cdf, ZeroAndNormalized) {
  const DensityField zero(kGrid);
  for (double v : cdf(zero)) EXPECT_EQ(v, 0.0);
  const auto f = initial_datum(kGrid, 3.0).f;
  const auto F = cdf(f);
  EXPECT_EQ(F.front(), 0.0);
  EXPECT_NEAR(F.back(), 1.0, 1e-12);
  EXPECT_EQ(F.back(), moment(f, 0));
  for (std::size_t j = 1; j < F.size(); ++j) EXPECT_GE(F[j], F[j - 1]);
}

TEST(Cdf, MatchesAnalyticAntiderivativeOfInitialDatum) {
  const double beta = 3.0;
  const auto f = initial_datum(kGrid, beta).f;
  const auto F = cdf(f);
  const double tail = std::pow(11.0, 1.0 - beta);
  for (std::size_t j = 0; j < kGrid.size(); j += 10) {
    const double Z = kGrid.node(j);
    const double exact = (1.0 - std::pow(Z + 1.0, 1.0 - beta)) / (1.0 - tail);
    EXPECT_NEAR(F[j], exact, 1e-4);
  }
}

TEST(Moment, Examples) {
  const DensityField zero(kGrid);
  EXPECT_EQ(moment(zero, 0), 0.0);
  EXPECT_EQ(moment(zero, 1), 0.0);
  EXPECT_NEAR(moment(initial_datum(kGrid, 3.0).f, 0), 1.0, 1e-12);
  DensityField hat(kGrid);
  for (std::size_t j = 0; j < kGrid.size(); ++j) hat[j] = std::max(0.0, 1.0 - std::abs(kGrid.node(j) - 2.0) / 0.1) / 0.1;
  EXPECT_NEAR(moment(hat, 0), 1.0, 1e-9);
  EXPECT_NEAR(moment(hat, 1), 2.0, kGrid.dz());
  EXPECT_THROW(moment(hat, 2), DomainError);
}

TEST(TailFit, ExactPowerLaw) {
  std::vector<double> F(kGrid.size(), 0.0);
  for (std::size_t j = 1; j < kGrid.size(); ++j) F[j] = 1.0 - std::pow(kGrid.node(j), -2.0);
  const auto fit = tail_fit(F, kGrid, {0.1, 1.0});
  EXPECT_NEAR(fit.inv_theta, 2.0, 1e-8);
  EXPECT_GE(fit.r_squared, 1.0 - 1e-10);
  EXPECT_NEAR(fit.beta_hat, 1.0, 1e-8);
  EXPECT_TRUE(fit.is_pareto());
}

TEST(TailFit, RecoversAnyExactSlope) {
  for (double s : {0.3, 1.0, 2.5, 4.0}) {
    std::vector<double> F(kGrid.size(), 0.0);
    for (std::size_t j = 1; j < kGrid.size(); ++j) F[j] = 1.0 - 0.5 * std::pow(kGrid.node(j), -s);
    EXPECT_NEAR(tail_fit(F, kGrid).inv_theta, s, 1e-6 * s);
  }
}

TEST(TailFit, InitialDatumMatchesTruncatedAnalyticSurvival) {
  // The datum lives on [0, 10], so its survival is
  //   ((Z+1)^(1-beta) - 11^(1-beta)) / (1 - 11^(1-beta)),
  // which bends well below the untruncated (Z+1)^(-2) on [5, 9]; the fitted
  // log-log slope is the slope of this function, not 2.
  const double beta = 3.0;
  const double tail = std::pow(11.0, 1.0 - beta);
  std::vector<double> x, y;
  for (std::size_t j = 500; j <= 900; ++j) {
    const double Z = kGrid.node(j);
    x.push_back(std::log(Z));
    y.push_back(std::log((std::pow(Z + 1.0, 1.0 - beta) - tail) / (1.0 - tail)));
  }
  const double expected = -ols_slope(x, y);
  const auto fit = tail_fit(cdf(initial_datum(kGrid, beta).f), kGrid);
  EXPECT_NEAR(fit.inv_theta, expected, 1e-3 * expected);
  EXPECT_EQ(fit.n_points, 401u);
  EXPECT_DOUBLE_EQ(fit.window_lo, 5.0);
  EXPECT_DOUBLE_EQ(fit.window_hi, 9.0);
}

TEST(TailFit, FlatSurvivalIsNotPareto) {
  std::vector<double> F(kGrid.size(), 0.25);
  const auto fit = tail_fit(F, kGrid);
  EXPECT_NEAR(fit.inv_theta, 0.0, 1e-12);
  EXPECT_FALSE(fit.is_pareto());
}

TEST(TailFit, Errors) {
  std::vector<double> F(kGrid.size(), 0.5);
  EXPECT_THROW(tail_fit(F, kGrid, {0.5, 0.502}), DomainError);  // three nodes
  EXPECT_THROW(tail_fit(F, kGrid, {0.9, 0.5}), DomainError);
  std::vector<double> dead(kGrid.size(), 1.0);
  EXPECT_THROW(tail_fit(dead, kGrid), DomainError);  // no positive survival
  EXPECT_THROW(tail_fit(std::vector<double>(10, 0.0), kGrid), DomainError);
}
