#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "male/dataset.hpp"
#include "male/estimator.hpp"
#include "male/methods.hpp"
#include "male/models.hpp"
#include "male/quadrature.hpp"
#include "male/sparse_grid.hpp"

namespace {

male::rule_nd gh(std::size_t r, std::size_t d = 1) { return male::product_rule(male::gauss_hermite(r), d); }

male::dataset rc_data(std::size_t n, std::uint64_t seed, double theta = 0.0) {
  const double t[1] = {theta};
  return male::generate_dataset(male::dgp::rc_regression, n, seed, t);
}

std::span<const double> as_span(const Eigen::VectorXd& x) { return {x.data(), static_cast<std::size_t>(x.size())}; }

// Independent plain-logit fit: maximize sum log logistic(z_i mu) by scalar
// Newton on the closed form.
double scalar_logit_fit(const male::dataset& data) {
  double mu = 0.0;
  for (int it = 0; it < 100; ++it) {
    double g = 0.0, h = 0.0;
    for (std::size_t i = 0; i < data.n(); ++i) {
      const double z = data.record(i)[0];
      const double p = 1.0 / (1.0 + std::exp(-z * mu));
      g += (1.0 - p) * z;
      h -= p * (1.0 - p) * z * z;
    }
    const double step = g / h;
    mu -= step;
    if (std::abs(step) < 1e-15) break;
  }
  return mu;
}

// Narrow bump centred on a sparse-grid node with negative weight; the
// approximated contribution comes out negative.
struct bump_integrand {
  male::parameter_box box{{0.0}, {1.0}};
  std::string name() const { return "bump"; }
  std::size_t dim_v() const { return 2; }
  std::size_t dim_theta() const { return 1; }
  std::size_t dim_z() const { return 1; }
  const male::parameter_box& theta_box() const { return box; }
  bool has_derivatives() const { return true; }
  double value(std::span<const double> v, std::span<const double>, std::span<const double>) const {
    const double dx = v[0] - std::sqrt(3.0);
    return std::exp(-50.0 * (dx * dx + v[1] * v[1]));
  }
  double derivatives(std::span<const double> v, std::span<const double> z, std::span<const double> t,
                     std::span<double> g, std::span<double> h) const {
    g[0] = 0.0;
    if (!h.empty()) h[0] = 0.0;
    return value(v, z, t);
  }
  std::optional<double> exact(std::span<const double>, std::span<const double>, std::span<double>,
                              std::span<double>) const {
    return std::nullopt;
  }
};
static_assert(male::likelihood_integrand<bump_integrand>);

}  // namespace

TEST(Contribution, ConstantIntegrands) {
  const male::dataset zero(1, {0.0});
  const double theta[2] = {0.4, 2.0};
  for (const auto& rule : {gh(5), male::halton(31, 1), male::monte_carlo_gaussian(17, 1, 3)}) {
    const male::mal_problem prob(male::mixed_logit_1d{}, zero, rule);
    EXPECT_NEAR(male::approx_likelihood_contribution(prob, zero.record(0), theta).value, 0.5, 1e-15);

    const male::dataset xzero(2, {1.0, 0.0});
    const male::mal_problem reg(male::rc_regression{}, xzero, rule);
    const double t[1] = {0.7};
    EXPECT_NEAR(male::approx_likelihood_contribution(reg, xzero.record(0), t).value, 0.2419707245191434, 1e-12);
  }
  const male::dataset bm(1, {0.6});
  const auto rule = gh(20);
  const male::mal_problem prob(male::butler_moffitt(1), bm, rule);
  const double t[2] = {1.0, 0.0};
  EXPECT_NEAR(male::approx_likelihood_contribution(prob, bm.record(0), t).value, 0.5, 1e-10);
}

TEST(Loglik, SingleRecordAndDuplication) {
  const male::dataset zero(1, {0.0});
  const auto rule = gh(8);
  const double theta[2] = {0.0, 1.0};
  EXPECT_NEAR(male::approx_loglik(male::mal_problem(male::mixed_logit_1d{}, zero, rule), theta), std::log(0.5), 1e-15);

  const auto data = rc_data(100, 3);
  std::vector<double> twice;
  for (std::size_t i = 0; i < data.n(); ++i)
    for (int k = 0; k < 2; ++k) twice.insert(twice.end(), data.record(i).begin(), data.record(i).end());
  const male::dataset doubled(2, twice);
  const double t[1] = {0.3};
  EXPECT_NEAR(male::approx_loglik(male::mal_problem(male::rc_regression{}, data, rule), t),
              male::approx_loglik(male::mal_problem(male::rc_regression{}, doubled, rule), t), 1e-14);
}

TEST(Loglik, NearExactRulesAgree) {
  const auto data = rc_data(1000, 4);
  const auto r100 = gh(100), r99 = gh(99);
  const double t[1] = {0.0};
  EXPECT_NEAR(male::approx_loglik(male::mal_problem(male::rc_regression{}, data, r100), t),
              male::approx_loglik(male::mal_problem(male::rc_regression{}, data, r99), t), 1e-10);
}

TEST(Score, SymmetricDataCancels) {
  const male::dataset sym(1, {1.3, -1.3});
  const auto rule = gh(20);
  const double t[2] = {0.0, 0.8};
  EXPECT_NEAR(male::approx_score(male::mal_problem(male::mixed_logit_1d{}, sym, rule), t)[0], 0.0, 1e-10);
}

TEST(Score, MatchesFiniteDifferencesAndHessianSymmetric) {
  const double logit_theta[2] = {0.3, 1.2}, bm_theta[2] = {0.6, 0.8};
  const auto logit = male::generate_dataset(male::dgp::mixed_logit_1d, 300, 5, logit_theta);
  const auto bm = male::generate_dataset(male::dgp::butler_moffitt, 300, 6, bm_theta, 3);
  const auto rule = gh(32);
  auto check = [](const auto& prob, std::vector<double> theta) {
    const auto ev = male::evaluate_loglik(prob, theta, 2);
    for (std::size_t a = 0; a < theta.size(); ++a) {
      auto up = theta, dn = theta;
      up[a] += 1e-6;
      dn[a] -= 1e-6;
      const double fd = (male::approx_loglik(prob, up) - male::approx_loglik(prob, dn)) / 2e-6;
      const double s = ev.score[static_cast<Eigen::Index>(a)];
      EXPECT_LE(std::abs(s - fd) / std::max(1.0, std::abs(s)), 1e-6) << a;
    }
    EXPECT_LE((ev.hessian - ev.hessian.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  };
  check(male::mal_problem(male::mixed_logit_1d{}, logit, rule), {0.1, 0.9});
  check(male::mal_problem(male::butler_moffitt(3), bm, rule), {0.5, 1.1});
  check(male::mal_problem(male::rc_regression{}, rc_data(300, 7), rule), {0.4});
}

TEST(RuleInvariance, ConstantIntegrandGivesSameResults) {
  // x = 0 makes the regression integrand constant in v
  std::vector<double> vals;
  for (double y : {-1.0, 0.2, 0.9, 2.0}) vals.insert(vals.end(), {y, 0.0});
  const male::dataset data(2, vals);
  const double t[1] = {0.5};
  const auto ref = male::evaluate_loglik(male::mal_problem(male::rc_regression{}, data, gh(1)), t, 2);
  for (const auto& rule : {gh(7), male::halton(100, 1), male::mlhs(13, 1, 2), male::monte_carlo_gaussian(9, 1, 1)}) {
    const auto ev = male::evaluate_loglik(male::mal_problem(male::rc_regression{}, data, rule), t, 2);
    EXPECT_NEAR(ev.loglik, ref.loglik, 1e-12);
    EXPECT_NEAR(ev.score[0], ref.score[0], 1e-12);
    EXPECT_NEAR(ev.hessian(0, 0), ref.hessian(0, 0), 1e-12);
  }
}

TEST(Floor, NegativeSparseWeightsAreClampedAndFlagged) {
  const auto rule = male::smolyak({2, 3});
  const male::dataset data(1, {0.0, 0.0, 0.0});
  const male::mal_problem prob(bump_integrand{}, data, rule);
  const double t[1] = {0.5};
  const auto c = male::approx_likelihood_contribution(prob, data.record(0), t);
  EXPECT_TRUE(c.floored);
  EXPECT_EQ(c.value, 1e-12);
  const auto ev = male::evaluate_loglik(prob, t, 2);
  EXPECT_EQ(ev.floor_activations, 3u);
  EXPECT_NEAR(ev.loglik, std::log(1e-12), 1e-12);
  const double raw = male::apply(rule, [&](auto v) { return bump_integrand{}.value(v, {}, t); });
  ASSERT_LT(raw, 0.0);
  EXPECT_NEAR(ev.merit, std::log(1e-12) + (raw - 1e-12) / 1e-12, 1e-3);
  const double t0[1] = {0.5};
  EXPECT_GT(male::maximize(prob, t0).floor_activations, 0u);
}

// Two nodes and one outlying record push f~ below the floor while its
// derivative stays informative; the score must still be the gradient of
// the merit the maximizer climbs.
TEST(Floor, ScoreIsTheGradientOfTheMerit) {
  const male::dataset data(2, {0.3, 0.5, 10.0, 1.0, -0.8, 1.5});
  const auto rule = gh(2);
  const male::mal_problem prob(male::rc_regression{}, data, rule);
  for (double th : {-0.4, 0.0, 0.7}) {
    const double t[1] = {th};
    const auto ev = male::evaluate_loglik(prob, t, 1);
    ASSERT_GT(ev.floor_activations, 0u);
    EXPECT_LT(ev.merit, ev.loglik);
    const double h = 1e-5;
    const double tp[1] = {th + h}, tm[1] = {th - h};
    const double fd = (male::evaluate_loglik(prob, tp, 0).merit - male::evaluate_loglik(prob, tm, 0).merit) / (2 * h);
    EXPECT_NEAR(ev.score[0], fd, 1e-6 * std::max(1.0, std::abs(fd))) << th;
  }
  const double t0[1] = {0.0};
  const auto est = male::maximize(prob, t0);
  EXPECT_TRUE(est.converged) << est.score_norm;
  EXPECT_GT(est.floor_activations, 0u);
}

TEST(Floor, NoActivationsForGaussHermiteOnRegression) {
  const auto data = rc_data(2000, 8);
  for (std::size_t r : {4u, 8u, 32u}) {
    const auto rule = gh(r);
    const male::mal_problem prob(male::rc_regression{}, data, rule);
    const double t0[1] = {1.0};
    const auto est = male::maximize(prob, t0);
    EXPECT_TRUE(est.converged);
    EXPECT_EQ(est.floor_activations, 0u) << r;
  }
}

TEST(Problem, DimensionMismatchIsRejected) {
  const auto data = rc_data(5, 1);
  const auto rule2 = gh(3, 2);
  EXPECT_THROW(male::mal_problem(male::rc_regression{}, data, rule2), male::invalid_configuration);
  const auto rule1 = gh(3);
  EXPECT_THROW(male::mal_problem(male::mixed_logit_1d{}, data, rule1), male::invalid_configuration);
}

TEST(Maximize, RegressionEstimateWithinSamplingScale) {
  // sampling scale c = sqrt(n) * sd(theta_hat) from a small replication
  const std::size_t n = 5000;
  const auto rule = gh(100);
  const double t0[1] = {0.5};
  std::vector<double> hats;
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto data = rc_data(n, 1000 + s);
    const auto est = male::maximize(male::mal_problem(male::rc_regression{}, data, rule), t0);
    ASSERT_TRUE(est.converged);
    hats.push_back(est.theta_hat[0]);
  }
  const double mean = std::accumulate(hats.begin(), hats.end(), 0.0) / hats.size();
  double var = 0.0;
  for (double h : hats) var += (h - mean) * (h - mean) / (hats.size() - 1);
  const double c = std::sqrt(n * var);
  EXPECT_GT(c, 0.5);
  EXPECT_LT(c, 3.0);

  const auto data = rc_data(n, 42);
  const auto est = male::maximize(male::mal_problem(male::rc_regression{}, data, rule), t0);
  EXPECT_TRUE(est.converged);
  EXPECT_LE(std::abs(est.theta_hat[0]), 3.0 * c / std::sqrt(static_cast<double>(n)));
  EXPECT_TRUE(std::isfinite(est.std_errors[0]));
  EXPECT_NEAR(est.std_errors[0] * std::sqrt(static_cast<double>(n)), c, 0.5 * c);
}

TEST(Maximize, RestartAtOptimumIsStationary) {
  const double logit_theta[2] = {0.3, 1.2};
  const auto data = male::generate_dataset(male::dgp::mixed_logit_1d, 500, 9, logit_theta);
  const auto rule = gh(32);
  const male::mal_problem prob(male::mixed_logit_1d{}, data, rule);
  const double t0[2] = {0.0, 1.0};
  male::maximize_options opts;
  opts.tol = 1e-10;
  const auto first = male::maximize(prob, t0, opts);
  ASSERT_TRUE(first.converged);
  const auto again = male::maximize(prob, as_span(first.theta_hat), opts);
  EXPECT_TRUE(again.converged);
  EXPECT_LE(again.iterations, 2);
  EXPECT_LE((again.theta_hat - first.theta_hat).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Maximize, MonotoneAscentAndSymmetricInformation) {
  const double bm_theta[2] = {0.8, -0.5};
  const auto data = male::generate_dataset(male::dgp::butler_moffitt, 400, 10, bm_theta, 3);
  const auto rule = gh(24);
  const double t0[2] = {2.0, 1.0};
  const auto est = male::maximize(male::mal_problem(male::butler_moffitt(3), data, rule), t0);
  EXPECT_TRUE(est.converged);
  for (std::size_t i = 1; i < est.trace.size(); ++i) EXPECT_GE(est.trace[i].loglik, est.trace[i - 1].loglik);
  EXPECT_LE((est.observed_information - est.observed_information.transpose()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE(est.score_norm, 1e-8);
}

TEST(Maximize, PinnedSigmaMatchesScalarLogit) {
  const male::mixed_logit_1d pinned(male::parameter_box{{-10.0, 0.0}, {10.0, 0.0}});
  const auto rule = gh(8);
  male::maximize_options opts;
  opts.tol = 1e-12;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const double theta[2] = {0.7, 0.0};
    const auto data = male::generate_dataset(male::dgp::mixed_logit_1d, 200, 300 + s, theta);
    const double t0[2] = {0.0, 0.0};
    const auto est = male::maximize(male::mal_problem(pinned, data, rule), t0, opts);
    EXPECT_TRUE(est.converged);
    EXPECT_NEAR(est.theta_hat[0], scalar_logit_fit(data), 1e-8);
    EXPECT_EQ(est.theta_hat[1], 0.0);
    EXPECT_TRUE(std::isnan(est.std_errors[1]) || est.std_errors[1] == 0.0);
  }
}

TEST(Maximize, CauchyInRuleSize) {
  // below r = 16 the estimates are pre-asymptotic and the gaps oscillate;
  // from there on consecutive doublings must move theta_hat less and less
  male::maximize_options opts;
  opts.tol = 1e-13;
  const double t0[1] = {0.5};
  for (std::uint64_t seed = 11; seed < 16; ++seed) {
    const auto data = rc_data(500, seed);
    std::vector<double> hats;
    for (std::size_t r : {16u, 32u, 64u, 128u}) {
      const auto rule = gh(r);
      const auto est = male::maximize(male::mal_problem(male::rc_regression{}, data, rule), t0, opts);
      ASSERT_TRUE(est.converged) << r;
      hats.push_back(est.theta_hat[0]);
    }
    for (std::size_t i = 2; i < hats.size(); ++i)
      EXPECT_LT(std::abs(hats[i] - hats[i - 1]), std::abs(hats[i - 1] - hats[i - 2])) << seed << " " << i;
  }
}

TEST(Maximize, RejectsStartOutsideBox) {
  const auto data = rc_data(10, 1);
  const auto rule = gh(4);
  const double bad[1] = {11.0};
  EXPECT_THROW(male::maximize(male::mal_problem(male::rc_regression{}, data, rule), bad), male::invalid_argument);
}
