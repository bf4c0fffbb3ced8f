#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "male/error.hpp"
#include "male/normal.hpp"

namespace male {

/// Closed coordinate box standing in for the compact parameter set.
struct parameter_box {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t size() const noexcept { return lower.size(); }

  bool contains(std::span<const double> theta) const noexcept {
    if (theta.size() != lower.size()) return false;
    for (std::size_t k = 0; k < theta.size(); ++k)
      if (!(theta[k] >= lower[k] && theta[k] <= upper[k])) return false;
    return true;
  }

  template <class Vec>
  void project(Vec& theta) const {
    for (std::size_t k = 0; k < lower.size(); ++k)
      theta[k] = std::clamp(static_cast<double>(theta[k]), lower[k], upper[k]);
  }

  bool pinned(std::size_t k) const noexcept { return lower[k] == upper[k]; }
};

/// The integrand phi(v, z, theta) of a likelihood contribution
/// f(z; theta) = int phi(v, z, theta) omega(v) dv under the standard normal
/// weight, with analytic theta-derivatives.
///
/// `derivatives` returns phi and writes the gradient into `grad` (size p)
/// and, when `hess` is non-empty, the row-major p x p Hessian. `exact`
/// returns f in closed form when the model has one, filling the derivative
/// outputs the same way.
template <class M>
concept likelihood_integrand = requires(const M& m, std::span<const double> v,
                                        std::span<const double> z, std::span<const double> theta,
                                        std::span<double> grad, std::span<double> hess) {
  { m.name() } -> std::convertible_to<std::string>;
  { m.dim_v() } -> std::convertible_to<std::size_t>;
  { m.dim_theta() } -> std::convertible_to<std::size_t>;
  { m.dim_z() } -> std::convertible_to<std::size_t>;
  { m.theta_box() } -> std::convertible_to<const parameter_box&>;
  { m.has_derivatives() } -> std::convertible_to<bool>;
  { m.value(v, z, theta) } -> std::convertible_to<double>;
  { m.derivatives(v, z, theta, grad, hess) } -> std::convertible_to<double>;
  { m.exact(z, theta, grad, hess) } -> std::convertible_to<std::optional<double>>;
};

namespace detail {

inline double logistic(double s) noexcept { return 1.0 / (1.0 + std::exp(-s)); }

}  // namespace detail

// ---------------------------------------------------------------------------

/// Scalar mixed logit, theta = (mu, sigma):
///   phi(v, z, theta) = 1 / (1 + exp(-z (sigma v + mu))).
class mixed_logit_1d {
 public:
  mixed_logit_1d() : box_{{-10.0, 0.01}, {10.0, 10.0}} {}
  explicit mixed_logit_1d(parameter_box box) : box_(std::move(box)) {
    if (box_.size() != 2) throw invalid_configuration("mixed_logit_1d: box must have 2 coordinates");
  }

  std::string name() const { return "mixed_logit_1d"; }
  std::size_t dim_v() const noexcept { return 1; }
  std::size_t dim_theta() const noexcept { return 2; }
  std::size_t dim_z() const noexcept { return 1; }
  const parameter_box& theta_box() const noexcept { return box_; }
  bool has_derivatives() const noexcept { return true; }

  double value(std::span<const double> v, std::span<const double> z,
               std::span<const double> theta) const noexcept {
    return detail::logistic(z[0] * (theta[1] * v[0] + theta[0]));
  }

  // d phi / d theta_a = phi (1 - phi) ds/dtheta_a, with ds = (z, z v).
  double derivatives(std::span<const double> v, std::span<const double> z,
                     std::span<const double> theta, std::span<double> grad,
                     std::span<double> hess) const noexcept {
    const double phi = value(v, z, theta);
    const double d1 = phi * (1.0 - phi);
    const double ds[2] = {z[0], z[0] * v[0]};
    grad[0] = d1 * ds[0];
    grad[1] = d1 * ds[1];
    if (!hess.empty()) {
      const double d2 = d1 * (1.0 - 2.0 * phi);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) hess[2 * a + b] = d2 * ds[a] * ds[b];
    }
    return phi;
  }

  std::optional<double> exact(std::span<const double>, std::span<const double>,
                              std::span<double>, std::span<double>) const noexcept {
    return std::nullopt;
  }

 private:
  parameter_box box_;
};

/// Multivariate random-coefficients logit on R^d:
///   phi(v, z, theta) = 1 / (1 + exp(-z . C (v + mu))),
/// theta = (mu, C) with C lower triangular. C is stored row by row, and
/// within row i the diagonal C_ii comes first, followed by C_i0 .. C_i,i-1.
class rc_logit_mv {
 public:
  explicit rc_logit_mv(std::size_t d) : rc_logit_mv(d, default_box(d)) {}

  rc_logit_mv(std::size_t d, parameter_box box) : d_(d), box_(std::move(box)) {
    if (d_ == 0) throw invalid_argument("rc_logit_mv: d must be >= 1");
    const std::size_t p = d_ + d_ * (d_ + 1) / 2;
    if (box_.size() != p) throw invalid_configuration("rc_logit_mv: box has wrong dimension");
    index_.assign(d_ * d_, 0);
    std::size_t k = d_;
    for (std::size_t i = 0; i < d_; ++i) {
      index_[i * d_ + i] = k++;
      for (std::size_t j = 0; j < i; ++j) index_[i * d_ + j] = k++;
    }
    for (std::size_t i = 0; i < d_; ++i)
      if (!(box_.lower[index_[i * d_ + i]] > 0.0))
        throw invalid_configuration("rc_logit_mv: diagonal of C must be bounded away from 0");
  }

  static parameter_box default_box(std::size_t d) {
    parameter_box b;
    for (std::size_t i = 0; i < d; ++i) {
      b.lower.push_back(-10.0);
      b.upper.push_back(10.0);
    }
    for (std::size_t i = 0; i < d; ++i) {
      b.lower.push_back(0.01);
      b.upper.push_back(10.0);
      for (std::size_t j = 0; j < i; ++j) {
        b.lower.push_back(-10.0);
        b.upper.push_back(10.0);
      }
    }
    return b;
  }

  std::string name() const { return "rc_logit_mv"; }
  std::size_t dim_v() const noexcept { return d_; }
  std::size_t dim_theta() const noexcept { return d_ + d_ * (d_ + 1) / 2; }
  std::size_t dim_z() const noexcept { return d_; }
  const parameter_box& theta_box() const noexcept { return box_; }
  bool has_derivatives() const noexcept { return true; }

  /// Position of C_ij (j <= i) inside theta.
  std::size_t c_index(std::size_t i, std::size_t j) const noexcept { return index_[i * d_ + j]; }

  double value(std::span<const double> v, std::span<const double> z,
               std::span<const double> theta) const noexcept {
    return detail::logistic(index(v, z, theta));
  }

  double derivatives(std::span<const double> v, std::span<const double> z,
                     std::span<const double> theta, std::span<double> grad,
                     std::span<double> hess) const {
    const std::size_t p = dim_theta();
    const double phi = value(v, z, theta);
    const double d1 = phi * (1.0 - phi);
    // ds/dmu_j = sum_{i>=j} z_i C_ij ; ds/dC_ij = z_i (v_j + mu_j)
    std::vector<double> ds(p, 0.0);
    for (std::size_t i = 0; i < d_; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        const double c = theta[c_index(i, j)];
        ds[j] += z[i] * c;
        ds[c_index(i, j)] = z[i] * (v[j] + theta[j]);
      }
    for (std::size_t a = 0; a < p; ++a) grad[a] = d1 * ds[a];
    if (!hess.empty()) {
      const double d2 = d1 * (1.0 - 2.0 * phi);
      for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = 0; b < p; ++b) hess[a * p + b] = d2 * ds[a] * ds[b];
      // d^2 s / dmu_j dC_ij = z_i
      for (std::size_t i = 0; i < d_; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
          const std::size_t c = c_index(i, j);
          hess[j * p + c] += d1 * z[i];
          hess[c * p + j] += d1 * z[i];
        }
    }
    return phi;
  }

  std::optional<double> exact(std::span<const double>, std::span<const double>,
                              std::span<double>, std::span<double>) const noexcept {
    return std::nullopt;
  }

 private:
  double index(std::span<const double> v, std::span<const double> z,
               std::span<const double> theta) const noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < d_; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j <= i; ++j) row += theta[c_index(i, j)] * (v[j] + theta[j]);
      s += z[i] * row;
    }
    return s;
  }

  std::size_t d_;
  parameter_box box_;
  std::vector<std::size_t> index_;
};

/// Random-effects panel probit, theta = (sigma, beta):
///   phi(v, z, theta) = prod_t Phi(z_t beta + sigma v).
class butler_moffitt {
 public:
  explicit butler_moffitt(std::size_t periods) : butler_moffitt(periods, {{0.0, -10.0}, {10.0, 10.0}}) {}

  butler_moffitt(std::size_t periods, parameter_box box) : periods_(periods), box_(std::move(box)) {
    if (periods_ == 0) throw invalid_argument("butler_moffitt: T must be >= 1");
    if (box_.size() != 2) throw invalid_configuration("butler_moffitt: box must have 2 coordinates");
  }

  std::string name() const { return "butler_moffitt"; }
  std::size_t periods() const noexcept { return periods_; }
  std::size_t dim_v() const noexcept { return 1; }
  std::size_t dim_theta() const noexcept { return 2; }
  std::size_t dim_z() const noexcept { return periods_; }
  const parameter_box& theta_box() const noexcept { return box_; }
  bool has_derivatives() const noexcept { return true; }

  double value(std::span<const double> v, std::span<const double> z,
               std::span<const double> theta) const noexcept {
    double phi = 1.0;
    for (std::size_t t = 0; t < periods_; ++t) phi *= normal_cdf(z[t] * theta[1] + theta[0] * v[0]);
    return phi;
  }

  double derivatives(std::span<const double> v, std::span<const double> z,
                     std::span<const double> theta, std::span<double> grad,
                     std::span<double> hess) const {
    const std::size_t T = periods_;
    std::vector<double> cdf(T), pdf(T);
    for (std::size_t t = 0; t < T; ++t) {
      const double a = z[t] * theta[1] + theta[0] * v[0];
      cdf[t] = normal_cdf(a);
      pdf[t] = normal_pdf(a);
    }
    // Products excluding one or two factors, computed directly so that a
    // vanishing factor does not poison the others.
    auto product_without = [&](std::size_t s1, std::size_t s2) {
      double prod = 1.0;
      for (std::size_t s = 0; s < T; ++s)
        if (s != s1 && s != s2) prod *= cdf[s];
      return prod;
    };
    auto jac = [&](std::size_t t, int a) { return a == 0 ? v[0] : z[t]; };

    const double phi = product_without(T, T);
    grad[0] = grad[1] = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const double rest = product_without(t, T);
      grad[0] += pdf[t] * jac(t, 0) * rest;
      grad[1] += pdf[t] * jac(t, 1) * rest;
    }
    if (!hess.empty()) {
      std::fill(hess.begin(), hess.begin() + 4, 0.0);
      for (std::size_t t = 0; t < T; ++t) {
        const double a = z[t] * theta[1] + theta[0] * v[0];
        const double dpdf = -a * pdf[t];
        const double rest = product_without(t, T);
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j) hess[2 * i + j] += dpdf * jac(t, i) * jac(t, j) * rest;
        for (std::size_t u = 0; u < T; ++u) {
          if (u == t) continue;
          const double rest2 = product_without(t, u);
          for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
              hess[2 * i + j] += pdf[t] * pdf[u] * jac(t, i) * jac(u, j) * rest2;
        }
      }
    }
    return phi;
  }

  std::optional<double> exact(std::span<const double>, std::span<const double>,
                              std::span<double>, std::span<double>) const noexcept {
    return std::nullopt;
  }

 private:
  std::size_t periods_;
  parameter_box box_;
};

/// Random-coefficient regression y = x b + e, b ~ N(theta, 1), e ~ N(0, 1),
/// z = (y, x). With b = theta + v:
///   phi(v, z, theta) = g(y - x (theta + v)),  g the standard normal pdf.
/// The likelihood contribution is the N(x theta, 1 + x^2) density of y,
/// which is exposed as `exact`.
class rc_regression {
 public:
  rc_regression() : box_{{-10.0}, {10.0}} {}
  explicit rc_regression(parameter_box box) : box_(std::move(box)) {
    if (box_.size() != 1) throw invalid_configuration("rc_regression: box must have 1 coordinate");
  }

  std::string name() const { return "rc_regression"; }
  std::size_t dim_v() const noexcept { return 1; }
  std::size_t dim_theta() const noexcept { return 1; }
  std::size_t dim_z() const noexcept { return 2; }
  const parameter_box& theta_box() const noexcept { return box_; }
  bool has_derivatives() const noexcept { return true; }

  double value(std::span<const double> v, std::span<const double> z,
               std::span<const double> theta) const noexcept {
    return normal_pdf(z[0] - z[1] * (theta[0] + v[0]));
  }

  double derivatives(std::span<const double> v, std::span<const double> z,
                     std::span<const double> theta, std::span<double> grad,
                     std::span<double> hess) const noexcept {
    const double x = z[1];
    const double t = z[0] - x * (theta[0] + v[0]);
    const double g = normal_pdf(t);
    grad[0] = x * t * g;
    if (!hess.empty()) hess[0] = x * x * (t * t - 1.0) * g;
    return g;
  }

  std::optional<double> exact(std::span<const double> z, std::span<const double> theta,
                              std::span<double> grad, std::span<double> hess) const noexcept {
    const double x = z[1];
    const double s2 = 1.0 + x * x;
    const double s = std::sqrt(s2);
    const double u = (z[0] - x * theta[0]) / s;
    const double f = normal_pdf(u) / s;
    if (!grad.empty()) grad[0] = x * u * f / s;
    if (!hess.empty()) hess[0] = -x * x * (1.0 - u * u) * f / s2;
    return f;
  }

 private:
  parameter_box box_;
};

/// Indicator integrand phi(v, z) = 1(v <= z) whose integral is Phi(z). It has
/// no parameters and no derivatives; it only serves as an integration
/// benchmark with a discontinuity.
class ars_normal_cdf {
 public:
  std::string name() const { return "ars_normal_cdf"; }
  std::size_t dim_v() const noexcept { return 1; }
  std::size_t dim_theta() const noexcept { return 0; }
  std::size_t dim_z() const noexcept { return 1; }
  const parameter_box& theta_box() const noexcept { return box_; }
  bool has_derivatives() const noexcept { return false; }

  double value(std::span<const double> v, std::span<const double> z,
               std::span<const double>) const noexcept {
    return v[0] <= z[0] ? 1.0 : 0.0;
  }

  double derivatives(std::span<const double>, std::span<const double>, std::span<const double>,
                     std::span<double>, std::span<double>) const {
    throw unsupported_operation("ars_normal_cdf: derivatives are not available");
  }

  std::optional<double> exact(std::span<const double> z, std::span<const double>,
                              std::span<double>, std::span<double>) const noexcept {
    return 0.5 * (1.0 + std::erf(z[0] / std::numbers::sqrt2));
  }

 private:
  parameter_box box_{};
};

// ---------------------------------------------------------------------------

/// Type-erased integrand for runtime model selection.
class any_integrand {
 public:
  template <likelihood_integrand M>
    requires(!std::same_as<std::remove_cvref_t<M>, any_integrand>)
  any_integrand(M model) : self_(std::make_shared<holder<M>>(std::move(model))) {}

  std::string name() const { return self_->name(); }
  std::size_t dim_v() const { return self_->dim_v(); }
  std::size_t dim_theta() const { return self_->dim_theta(); }
  std::size_t dim_z() const { return self_->dim_z(); }
  const parameter_box& theta_box() const { return self_->theta_box(); }
  bool has_derivatives() const { return self_->has_derivatives(); }

  double value(std::span<const double> v, std::span<const double> z,
               std::span<const double> theta) const {
    return self_->value(v, z, theta);
  }
  double derivatives(std::span<const double> v, std::span<const double> z,
                     std::span<const double> theta, std::span<double> grad,
                     std::span<double> hess) const {
    return self_->derivatives(v, z, theta, grad, hess);
  }
  std::optional<double> exact(std::span<const double> z, std::span<const double> theta,
                              std::span<double> grad, std::span<double> hess) const {
    return self_->exact(z, theta, grad, hess);
  }

 private:
  struct concept_t {
    virtual ~concept_t() = default;
    virtual std::string name() const = 0;
    virtual std::size_t dim_v() const = 0;
    virtual std::size_t dim_theta() const = 0;
    virtual std::size_t dim_z() const = 0;
    virtual const parameter_box& theta_box() const = 0;
    virtual bool has_derivatives() const = 0;
    virtual double value(std::span<const double>, std::span<const double>,
                         std::span<const double>) const = 0;
    virtual double derivatives(std::span<const double>, std::span<const double>,
                               std::span<const double>, std::span<double>,
                               std::span<double>) const = 0;
    virtual std::optional<double> exact(std::span<const double>, std::span<const double>,
                                        std::span<double>, std::span<double>) const = 0;
  };

  template <class M>
  struct holder final : concept_t {
    explicit holder(M m) : model(std::move(m)) {}
    std::string name() const override { return model.name(); }
    std::size_t dim_v() const override { return model.dim_v(); }
    std::size_t dim_theta() const override { return model.dim_theta(); }
    std::size_t dim_z() const override { return model.dim_z(); }
    const parameter_box& theta_box() const override { return model.theta_box(); }
    bool has_derivatives() const override { return model.has_derivatives(); }
    double value(std::span<const double> v, std::span<const double> z,
                 std::span<const double> t) const override {
      return model.value(v, z, t);
    }
    double derivatives(std::span<const double> v, std::span<const double> z,
                       std::span<const double> t, std::span<double> g,
                       std::span<double> h) const override {
      return model.derivatives(v, z, t, g, h);
    }
    std::optional<double> exact(std::span<const double> z, std::span<const double> t,
                                std::span<double> g, std::span<double> h) const override {
      return model.exact(z, t, g, h);
    }
    M model;
  };

  std::shared_ptr<const concept_t> self_;
};

/// Builds a model by name: mixed_logit_1d, rc_logit_mv (uses `dim`),
/// butler_moffitt (uses `dim` as the number of periods), rc_regression,
/// ars_normal_cdf.
inline any_integrand make_integrand(const std::string& name, std::size_t dim = 1) {
  if (name == "mixed_logit_1d") return mixed_logit_1d();
  if (name == "rc_logit_mv") return rc_logit_mv(dim);
  if (name == "butler_moffitt") return butler_moffitt(dim);
  if (name == "rc_regression") return rc_regression();
  if (name == "ars_normal_cdf" || name == "ars") return ars_normal_cdf();
  throw invalid_argument("unknown model: " + name);
}

}  // namespace male
