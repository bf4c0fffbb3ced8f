#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "male/models.hpp"
#include "male/quadrature.hpp"

using male::gauss_hermite;
using male::gauss_legendre;

namespace {

double double_factorial_odd(int k) {  // (k-1)!! for even k
  double x = 1.0;
  for (int i = k - 1; i > 0; i -= 2) x *= i;
  return x;
}

double moment(const male::rule_1d& rule, int k) {
  double s = 0.0;
  for (std::size_t j = 0; j < rule.r(); ++j) s += rule.weights()[j] * std::pow(rule.nodes()[j], k);
  return s;
}

}  // namespace

TEST(GaussHermite, SmallRulesByHand) {
  const auto r1 = gauss_hermite(1);
  EXPECT_EQ(r1.nodes()[0], 0.0);
  EXPECT_NEAR(r1.weights()[0], 1.0, 1e-15);

  const auto r2 = gauss_hermite(2);
  EXPECT_NEAR(r2.nodes()[0], -1.0, 1e-15);
  EXPECT_NEAR(r2.nodes()[1], 1.0, 1e-15);
  EXPECT_NEAR(r2.weights()[0], 0.5, 1e-15);
  EXPECT_NEAR(r2.weights()[1], 0.5, 1e-15);

  const auto r3 = gauss_hermite(3);
  EXPECT_NEAR(r3.nodes()[0], -std::sqrt(3.0), 1e-15);
  EXPECT_EQ(r3.nodes()[1], 0.0);
  EXPECT_NEAR(r3.nodes()[2], std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(r3.weights()[0], 1.0 / 6, 1e-15);
  EXPECT_NEAR(r3.weights()[1], 2.0 / 3, 1e-15);
  EXPECT_NEAR(r3.weights()[2], 1.0 / 6, 1e-15);
  EXPECT_NEAR(moment(r3, 4), 3.0, 1e-14);
}

TEST(GaussHermite, PolynomialExactnessUpTo30) {
  for (std::size_t r = 1; r <= 30; ++r) {
    const auto rule = gauss_hermite(r);
    for (int k = 0; k <= static_cast<int>(2 * r - 1); ++k) {
      const double m = moment(rule, k);
      if (k % 2) {
        EXPECT_NEAR(m, 0.0, 1e-10 * double_factorial_odd(k + 1)) << "r=" << r << " k=" << k;
      } else {
        const double ex = double_factorial_odd(k);
        EXPECT_LE(std::abs(m - ex) / ex, 1e-10) << "r=" << r << " k=" << k;
      }
    }
  }
}

TEST(GaussHermite, SymmetricIncreasingPositiveUnitMass) {
  for (std::size_t r : {1u, 2u, 5u, 16u, 51u, 100u, 200u}) {
    const auto rule = gauss_hermite(r);
    double mass = 0.0;
    for (std::size_t j = 0; j < r; ++j) {
      EXPECT_NEAR(rule.nodes()[j], -rule.nodes()[r - 1 - j], 1e-12);
      EXPECT_NEAR(rule.weights()[j], rule.weights()[r - 1 - j], 1e-12);
      EXPECT_GT(rule.weights()[j], 0.0);
      if (j) {
        EXPECT_LT(rule.nodes()[j - 1], rule.nodes()[j]);
      }
      mass += rule.weights()[j];
    }
    EXPECT_NEAR(mass, 1.0, 1e-12) << r;
  }
}

TEST(GaussHermite, RejectsZero) { EXPECT_THROW(gauss_hermite(0), male::invalid_argument); }

TEST(GaussLegendre, SmallRulesByHand) {
  const auto r1 = gauss_legendre(1);
  EXPECT_EQ(r1.nodes()[0], 0.0);
  EXPECT_NEAR(r1.weights()[0], 2.0, 1e-15);

  const auto r2 = gauss_legendre(2);
  EXPECT_NEAR(r2.nodes()[0], -1 / std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(r2.nodes()[1], 1 / std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(r2.weights()[0], 1.0, 1e-15);
  EXPECT_NEAR(r2.weights()[1], 1.0, 1e-15);

  const auto u2 = gauss_legendre(2, 0.0, 1.0);
  EXPECT_NEAR(u2.nodes()[0], (1 - 1 / std::sqrt(3.0)) / 2, 1e-15);
  EXPECT_NEAR(u2.nodes()[1], (1 + 1 / std::sqrt(3.0)) / 2, 1e-15);
  EXPECT_NEAR(u2.weights()[0], 0.5, 1e-15);
  EXPECT_NEAR(u2.weights()[1], 0.5, 1e-15);
}

TEST(GaussLegendre, PolynomialExactnessOnIntervals) {
  const double intervals[][2] = {{-1.0, 1.0}, {0.0, 1.0}, {-2.0, 3.0}, {1.0, 1.5}};
  for (const auto& ab : intervals) {
    const double a = ab[0], b = ab[1];
    for (std::size_t r = 1; r <= 30; ++r) {
      const auto rule = gauss_legendre(r, a, b);
      double mass = 0.0;
      for (double w : rule.weights()) mass += w;
      EXPECT_NEAR(mass, b - a, 1e-12);
      for (int k = 0; k <= static_cast<int>(2 * r - 1); ++k) {
        const double ex = (std::pow(b, k + 1) - std::pow(a, k + 1)) / (k + 1);
        const double scale = std::max(std::abs(ex), (std::pow(std::max(std::abs(a), std::abs(b)), k + 1)) / (k + 1));
        EXPECT_LE(std::abs(moment(rule, k) - ex), 1e-10 * scale) << "r=" << r << " k=" << k;
      }
    }
  }
}

TEST(GaussLegendre, RejectsEmptyInterval) {
  EXPECT_THROW(gauss_legendre(3, 1.0, 1.0), male::invalid_argument);
  EXPECT_THROW(gauss_legendre(3, 2.0, 1.0), male::invalid_argument);
}

TEST(Midpoint, CellCentres) {
  const auto m1 = male::midpoint(1, 0, 1);
  EXPECT_EQ(m1.nodes()[0], 0.5);
  EXPECT_EQ(m1.weights()[0], 1.0);
  const auto m2 = male::midpoint(2, 0, 1);
  EXPECT_EQ(m2.nodes()[0], 0.25);
  EXPECT_EQ(m2.nodes()[1], 0.75);
  const auto m4 = male::midpoint(4, -1, 1);
  const double expect[] = {-0.75, -0.25, 0.25, 0.75};
  for (int j = 0; j < 4; ++j) {
    EXPECT_DOUBLE_EQ(m4.nodes()[j], expect[j]);
    EXPECT_DOUBLE_EQ(m4.weights()[j], 0.5);
  }
  EXPECT_THROW(male::midpoint(4, 1, -1), male::invalid_argument);
}

TEST(Halton, RadicalInverseDigits) {
  const double base2[] = {0.5, 0.25, 0.75, 0.125};
  for (int i = 0; i < 4; ++i) EXPECT_EQ(male::radical_inverse(i + 1, 2), base2[i]);
  const double base3[] = {1.0 / 3, 2.0 / 3, 1.0 / 9};
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(male::radical_inverse(i + 1, 3), base3[i], 1e-16);
}

TEST(Halton, SingleNodeAndDimensionCap) {
  const auto h = male::halton(1, 1, 1);
  EXPECT_EQ(h.point(0)[0], 0.0);
  EXPECT_EQ(h.weights()[0], 1.0);
  EXPECT_NO_THROW(male::halton(4, 20));
  EXPECT_THROW(male::halton(4, 21), male::unsupported_dimension);
  EXPECT_THROW(male::halton(4, 1, 0), male::domain_error);
}

TEST(Halton, EqualWeightsAndDiscrepancyProxy) {
  for (std::size_t r : {64u, 256u, 1024u}) {
    auto u = male::halton_unit(r, 1);
    std::sort(u.begin(), u.end());
    double dev = 0.0;
    for (std::size_t j = 0; j < r; ++j) {
      dev = std::max(dev, std::abs(static_cast<double>(j + 1) / r - u[j]));
      dev = std::max(dev, std::abs(static_cast<double>(j) / r - u[j]));
    }
    EXPECT_LE(dev, 3.0 * std::log(static_cast<double>(r)) / r) << r;
    const auto rule = male::halton(r, 1);
    for (double w : rule.weights()) EXPECT_EQ(w, 1.0 / r);
  }
}

TEST(MonteCarlo, DeterministicAndMoments) {
  const auto a = male::monte_carlo_gaussian(3, 1, 99), b = male::monte_carlo_gaussian(3, 1, 99);
  EXPECT_TRUE(std::equal(a.points().begin(), a.points().end(), b.points().begin()));

  const std::size_t r = 100000;
  const auto one = male::monte_carlo_gaussian(r, 1, 5);
  double mean = 0.0;
  for (double x : one.points()) mean += x;
  EXPECT_LE(std::abs(mean / r), 4.0 / std::sqrt(static_cast<double>(r)));
  for (double w : one.weights()) ASSERT_EQ(w, 1.0 / r);

  const auto two = male::monte_carlo_gaussian(r, 2, 6);
  double m[2] = {0, 0}, c[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t j = 0; j < r; ++j)
    for (int i = 0; i < 2; ++i) m[i] += two.point(j)[i] / r;
  for (std::size_t j = 0; j < r; ++j)
    for (int i = 0; i < 2; ++i)
      for (int k = 0; k < 2; ++k) c[i][k] += (two.point(j)[i] - m[i]) * (two.point(j)[k] - m[k]) / (r - 1);
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k) EXPECT_NEAR(c[i][k], i == k ? 1.0 : 0.0, 0.02);
}

TEST(Mlhs, StratifiedShiftedLattice) {
  const auto two = male::mlhs_unit(2, 1, 11);
  const double lo = std::min(two[0], two[1]), hi = std::max(two[0], two[1]);
  EXPECT_LT(lo, 0.5);
  EXPECT_GE(hi, 0.5);
  for (std::size_t r : {2u, 7u, 100u}) {
    auto u = male::mlhs_unit(r, 3, 12);
    for (std::size_t k = 0; k < 3; ++k) {
      std::vector<double> col;
      for (std::size_t j = 0; j < r; ++j) col.push_back(u[j * 3 + k]);
      std::sort(col.begin(), col.end());
      for (std::size_t j = 1; j < r; ++j) EXPECT_NEAR(col[j] - col[j - 1], 1.0 / r, 1e-14);
    }
  }
  const auto a = male::mlhs(50, 2, 4), b = male::mlhs(50, 2, 4);
  EXPECT_TRUE(std::equal(a.points().begin(), a.points().end(), b.points().begin()));
}

TEST(ProductRule, TensorShapes) {
  const auto gh2 = gauss_hermite(2);
  const auto one = male::product_rule(gh2, 1);
  EXPECT_EQ(one.r(), 2u);
  EXPECT_EQ(one.point(1)[0], gh2.nodes()[1]);

  const auto sq = male::product_rule(gh2, 2);
  ASSERT_EQ(sq.r(), 4u);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_NEAR(std::abs(sq.point(j)[0]), 1.0, 1e-15);
    EXPECT_NEAR(std::abs(sq.point(j)[1]), 1.0, 1e-15);
    EXPECT_NEAR(sq.weights()[j], 0.25, 1e-15);
  }
  const auto gh3 = male::product_rule(gauss_hermite(3), 2);
  EXPECT_NEAR(male::apply(gh3, [](auto) { return 1.0; }), 1.0, 1e-14);
  EXPECT_THROW(male::product_rule(gauss_hermite(10), 8), male::resource_limit);
}

TEST(Apply, ListedIntegrals) {
  const auto gh2 = male::product_rule(gauss_hermite(2), 1);
  EXPECT_EQ(male::apply(gh2, [](auto v) { return v[0] * v[0]; }), 1.0);
  const auto gh3 = male::product_rule(gauss_hermite(3), 1);
  EXPECT_NEAR(male::apply(gh3, [](auto v) { return std::pow(v[0], 4); }), 3.0, 1e-12);
  for (const auto& rule : {male::halton(77, 3), male::monte_carlo_gaussian(10, 2, 1), male::mlhs(9, 1, 2)})
    EXPECT_NEAR(male::apply(rule, [](auto) { return 1.0; }), 1.0, 1e-10);
  EXPECT_NEAR(male::apply(male::halton(77, 1), [](auto) { return 1.0; }, male::summation::compensated), 1.0, 1e-14);
}

TEST(Apply, NonFiniteValueReportsTheNode) {
  const auto rule = male::product_rule(gauss_hermite(3), 1);
  try {
    male::apply(rule, [](auto v) { return v[0] > 1.0 ? std::nan("") : 1.0; });
    FAIL() << "expected numeric_failure";
  } catch (const male::numeric_failure& e) {
    ASSERT_EQ(e.node().size(), 1u);
    EXPECT_NEAR(e.node()[0], std::sqrt(3.0), 1e-15);
  }
}

TEST(GaussHermite, ErrorShrinksOnSmoothIntegrand) {
  // max error over a fixed (z, theta) set on the regression integrand, against
  // its closed-form likelihood
  const male::rc_regression model;
  std::vector<std::array<double, 3>> probes;  // y, x, theta
  for (double y : {-2.0, -0.5, 0.3, 1.7})
    for (double x : {-1.5, -0.2, 0.8, 2.0})
      for (double t : {-1.0, 0.0, 0.5}) probes.push_back({y, x, t});
  double prev = 1e300;
  for (std::size_t r : {2u, 4u, 8u, 16u, 32u}) {
    const auto rule = male::product_rule(gauss_hermite(r), 1);
    double worst = 0.0;
    for (const auto& p : probes) {
      const double z[2] = {p[0], p[1]};
      const double th[1] = {p[2]};
      const double approx = male::apply(rule, [&](auto v) { return model.value(v, z, th); });
      worst = std::max(worst, std::abs(approx - *model.exact(z, th, {}, {})));
    }
    EXPECT_LE(worst, prev) << r;
    prev = worst;
  }
}
