#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "male/detail/jacobi.hpp"
#include "male/error.hpp"
#include "male/normal.hpp"
#include "male/rng.hpp"

namespace male {

enum class weight_kind { gaussian_density, lebesgue_on_interval };

/// One-dimensional rule: sum_j w_j g(v_j).
class rule_1d {
 public:
  rule_1d(std::vector<double> nodes, std::vector<double> weights, weight_kind kind)
      : nodes_(std::move(nodes)), weights_(std::move(weights)), kind_(kind) {
    if (nodes_.size() != weights_.size() || nodes_.empty())
      throw invalid_argument("rule_1d: nodes and weights must be non-empty and of equal length");
  }

  std::size_t r() const noexcept { return nodes_.size(); }
  std::span<const double> nodes() const noexcept { return nodes_; }
  std::span<const double> weights() const noexcept { return weights_; }
  weight_kind kind() const noexcept { return kind_; }

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
  weight_kind kind_;
};

enum class construction { product, monte_carlo, halton, mlhs, sparse_grid };

inline std::string_view to_string(construction c) {
  switch (c) {
    case construction::product: return "product";
    case construction::monte_carlo: return "monte_carlo";
    case construction::halton: return "halton";
    case construction::mlhs: return "mlhs";
    case construction::sparse_grid: return "sparse_grid";
  }
  return "unknown";
}

/// Multivariate rule against the standard Gaussian weight on R^d. Points are
/// stored row-major; point j occupies [j*d, (j+1)*d).
class rule_nd {
 public:
  rule_nd(std::size_t d, std::vector<double> points, std::vector<double> weights,
          construction how)
      : d_(d), points_(std::move(points)), weights_(std::move(weights)), construction_(how) {
    if (d_ == 0) throw invalid_argument("rule_nd: dimension must be >= 1");
    if (weights_.empty() || points_.size() != weights_.size() * d_)
      throw invalid_argument("rule_nd: points and weights disagree in size");
    if (how != construction::sparse_grid &&
        std::any_of(weights_.begin(), weights_.end(), [](double w) { return w < 0.0; }))
      throw invalid_argument("rule_nd: negative weights are only allowed for sparse grids");
  }

  std::size_t d() const noexcept { return d_; }
  std::size_t r() const noexcept { return weights_.size(); }
  std::span<const double> point(std::size_t j) const noexcept {
    return {points_.data() + j * d_, d_};
  }
  std::span<const double> points() const noexcept { return points_; }
  std::span<const double> weights() const noexcept { return weights_; }
  construction how() const noexcept { return construction_; }

 private:
  std::size_t d_;
  std::vector<double> points_;
  std::vector<double> weights_;
  construction construction_;
};

// ---------------------------------------------------------------------------
// Gauss rules

/// Probabilists' Gauss-Hermite rule: exact for polynomials of degree
/// <= 2r-1 against the standard normal density.
inline rule_1d gauss_hermite(std::size_t r) {
  if (r == 0) throw invalid_argument("gauss_hermite: r must be >= 1");
  std::vector<double> beta(r);
  for (std::size_t k = 0; k < r; ++k) beta[k] = std::sqrt(static_cast<double>(k + 1));
  auto g = detail::golub_welsch_symmetric(beta, r, 1.0);
  return rule_1d(std::move(g.nodes), std::move(g.weights), weight_kind::gaussian_density);
}

/// Gauss-Legendre rule for the Lebesgue weight on [a, b].
inline rule_1d gauss_legendre(std::size_t r, double a = -1.0, double b = 1.0) {
  if (r == 0) throw invalid_argument("gauss_legendre: r must be >= 1");
  if (!(a < b)) throw invalid_argument("gauss_legendre: need a < b");
  std::vector<double> beta(r);
  for (std::size_t k = 0; k < r; ++k) {
    const double kk = static_cast<double>(k + 1);
    beta[k] = kk / std::sqrt(4.0 * kk * kk - 1.0);
  }
  auto g = detail::golub_welsch_symmetric(beta, r, 2.0);
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  for (std::size_t j = 0; j < r; ++j) {
    g.nodes[j] = mid + half * g.nodes[j];
    g.weights[j] *= half;
  }
  return rule_1d(std::move(g.nodes), std::move(g.weights), weight_kind::lebesgue_on_interval);
}

/// Midpoint rule on [a, b] with r equal cells.
inline rule_1d midpoint(std::size_t r, double a = 0.0, double b = 1.0) {
  if (r == 0) throw invalid_argument("midpoint: r must be >= 1");
  if (!(a < b)) throw invalid_argument("midpoint: need a < b");
  const double h = (b - a) / static_cast<double>(r);
  std::vector<double> nodes(r), weights(r, h);
  for (std::size_t j = 0; j < r; ++j) nodes[j] = a + (static_cast<double>(j) + 0.5) * h;
  return rule_1d(std::move(nodes), std::move(weights), weight_kind::lebesgue_on_interval);
}

/// Transports a rule on (0, 1) to the standard Gaussian weight through the
/// inverse normal CDF; weights are unchanged.
inline rule_1d to_gaussian(const rule_1d& unit_rule) {
  if (unit_rule.kind() != weight_kind::lebesgue_on_interval)
    throw invalid_argument("to_gaussian: expects a rule on (0, 1)");
  std::vector<double> nodes(unit_rule.r());
  std::transform(unit_rule.nodes().begin(), unit_rule.nodes().end(), nodes.begin(),
                 [](double u) { return inverse_normal_cdf(u); });
  return rule_1d(std::move(nodes), {unit_rule.weights().begin(), unit_rule.weights().end()},
                 weight_kind::gaussian_density);
}

// ---------------------------------------------------------------------------
// Equal-weight rules

inline constexpr std::array<unsigned, 20> halton_bases = {2,  3,  5,  7,  11, 13, 17,
                                                          19, 23, 29, 31, 37, 41, 43,
                                                          47, 53, 59, 61, 67, 71};

/// Radical inverse of `index` in `base`: digits mirrored about the radix point.
inline double radical_inverse(std::uint64_t index, unsigned base) {
  const double inv_base = 1.0 / static_cast<double>(base);
  double scale = inv_base;
  double result = 0.0;
  while (index > 0) {
    result += static_cast<double>(index % base) * scale;
    index /= base;
    scale *= inv_base;
  }
  return result;
}

/// Halton points for indices skip .. skip+r-1 in the unit cube, before the
/// Gaussian transform.
inline std::vector<double> halton_unit(std::size_t r, std::size_t d, std::uint64_t skip = 1) {
  if (r == 0) throw invalid_argument("halton: r must be >= 1");
  if (d == 0) throw invalid_argument("halton: d must be >= 1");
  if (d > halton_bases.size()) throw unsupported_dimension("halton: d > 20 is not supported");
  std::vector<double> pts(r * d);
  for (std::size_t j = 0; j < r; ++j)
    for (std::size_t k = 0; k < d; ++k)
      pts[j * d + k] = radical_inverse(skip + j, halton_bases[k]);
  return pts;
}

inline rule_nd halton(std::size_t r, std::size_t d, std::uint64_t skip = 1) {
  auto pts = halton_unit(r, d, skip);
  for (double& u : pts) {
    if (u <= 0.0) throw domain_error("halton: index 0 maps to -infinity; use skip >= 1");
    u = inverse_normal_cdf(u);
  }
  return rule_nd(d, std::move(pts), std::vector<double>(r, 1.0 / static_cast<double>(r)),
                 construction::halton);
}

/// Pseudo-random standard normal points; a pure function of (r, d, seed).
inline rule_nd monte_carlo_gaussian(std::size_t r, std::size_t d, std::uint64_t seed) {
  if (r == 0) throw invalid_argument("monte_carlo_gaussian: r must be >= 1");
  if (d == 0) throw invalid_argument("monte_carlo_gaussian: d must be >= 1");
  counter_rng rng(seed);
  std::vector<double> pts(r * d);
  for (double& x : pts) x = rng.normal();
  return rule_nd(d, std::move(pts), std::vector<double>(r, 1.0 / static_cast<double>(r)),
                 construction::monte_carlo);
}

/// Modified Latin hypercube points in the unit cube: per coordinate a grid
/// (i + u) / r with one uniform shift u, independently permuted across
/// coordinates.
inline std::vector<double> mlhs_unit(std::size_t r, std::size_t d, std::uint64_t seed) {
  if (r == 0) throw invalid_argument("mlhs: r must be >= 1");
  if (d == 0) throw invalid_argument("mlhs: d must be >= 1");
  counter_rng rng(seed);
  std::vector<double> pts(r * d);
  std::vector<double> column(r);
  for (std::size_t k = 0; k < d; ++k) {
    const double shift = rng.uniform();
    for (std::size_t i = 0; i < r; ++i)
      column[i] = (static_cast<double>(i) + shift) / static_cast<double>(r);
    for (std::size_t i = r; i > 1; --i) std::swap(column[i - 1], column[rng.below(i)]);
    for (std::size_t i = 0; i < r; ++i) pts[i * d + k] = column[i];
  }
  return pts;
}

inline rule_nd mlhs(std::size_t r, std::size_t d, std::uint64_t seed) {
  auto pts = mlhs_unit(r, d, seed);
  for (double& u : pts) u = inverse_normal_cdf(u);
  return rule_nd(d, std::move(pts), std::vector<double>(r, 1.0 / static_cast<double>(r)),
                 construction::mlhs);
}

// ---------------------------------------------------------------------------
// Tensor products and application

inline constexpr std::size_t product_rule_limit = 10'000'000;

/// Full tensor grid of a Gaussian-weight 1-D rule.
inline rule_nd product_rule(const rule_1d& rule, std::size_t d) {
  if (d == 0) throw invalid_argument("product_rule: d must be >= 1");
  if (rule.kind() != weight_kind::gaussian_density)
    throw invalid_argument("product_rule: expects a Gaussian-weight rule");
  std::size_t total = 1;
  for (std::size_t k = 0; k < d; ++k) {
    if (total > product_rule_limit / rule.r())
      throw resource_limit("product_rule: r^d exceeds 1e7 points");
    total *= rule.r();
  }
  std::vector<double> pts(total * d), weights(total);
  std::vector<std::size_t> idx(d, 0);
  for (std::size_t j = 0; j < total; ++j) {
    double w = 1.0;
    for (std::size_t k = 0; k < d; ++k) {
      pts[j * d + k] = rule.nodes()[idx[k]];
      w *= rule.weights()[idx[k]];
    }
    weights[j] = w;
    // Last coordinate varies fastest.
    for (std::size_t k = d; k-- > 0;) {
      if (++idx[k] < rule.r()) break;
      idx[k] = 0;
    }
  }
  return rule_nd(d, std::move(pts), std::move(weights), construction::product);
}

enum class summation { ordered, compensated };

/// sum_j w_j g(v_j), accumulated in node order. Throws numeric_failure
/// carrying the node when g is not finite there.
template <class F>
double apply(const rule_nd& rule, F&& g, summation mode = summation::ordered) {
  double sum = 0.0, carry = 0.0;
  for (std::size_t j = 0; j < rule.r(); ++j) {
    const auto v = rule.point(j);
    const double value = g(v);
    if (!std::isfinite(value))
      throw numeric_failure("apply: integrand is not finite at a rule point",
                            std::vector<double>(v.begin(), v.end()));
    const double term = rule.weights()[j] * value;
    if (mode == summation::ordered) {
      sum += term;
    } else {
      const double y = term - carry;
      const double t = sum + y;
      carry = (t - sum) - y;
      sum = t;
    }
  }
  return sum;
}

/// Same for a 1-D rule with a scalar integrand.
template <class F>
double apply(const rule_1d& rule, F&& g) {
  double sum = 0.0;
  for (std::size_t j = 0; j < rule.r(); ++j) {
    const double value = g(rule.nodes()[j]);
    if (!std::isfinite(value))
      throw numeric_failure("apply: integrand is not finite at a rule node", {rule.nodes()[j]});
    sum += rule.weights()[j] * value;
  }
  return sum;
}

}  // namespace male
