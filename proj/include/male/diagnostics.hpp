#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "male/dataset.hpp"
#include "male/error.hpp"
#include "male/link.hpp"
#include "male/methods.hpp"
#include "male/models.hpp"
#include "male/quadrature.hpp"
#include "male/rng.hpp"

namespace male {

/// Finite grid of (z, theta) pairs standing in for the supremum over
/// Z x Theta. Pairs are enumerated z-major.
struct probe_set {
  std::size_t dim_z = 1;
  std::size_t p = 0;
  std::vector<double> z;      // row-major, one record per row
  std::vector<double> theta;  // row-major, one parameter vector per row
  std::string description;

  std::size_t z_count() const noexcept { return z.size() / dim_z; }
  std::size_t theta_count() const noexcept { return p == 0 ? 1 : theta.size() / p; }
  std::size_t size() const noexcept { return z_count() * theta_count(); }
  std::span<const double> z_at(std::size_t i) const noexcept { return {z.data() + i * dim_z, dim_z}; }
  std::span<const double> theta_at(std::size_t k) const noexcept {
    return p == 0 ? std::span<const double>{} : std::span<const double>{theta.data() + k * p, p};
  }
};

/// nz records drawn from the model's data generator and ntheta points spread
/// evenly along the diagonal of the parameter box.
inline probe_set default_probes(dgp g, const parameter_box& box, std::size_t nz = 200,
                                std::size_t ntheta = 9, std::uint64_t seed = 20240101,
                                std::span<const double> true_theta = {}, std::size_t periods = 3) {
  std::vector<double> tt(true_theta.begin(), true_theta.end());
  if (tt.empty()) tt.assign(dgp_theta_size(g), 0.0);
  if (g == dgp::mixed_logit_1d && true_theta.empty()) tt = {0.5, 1.0};
  if (g == dgp::butler_moffitt && true_theta.empty()) tt = {0.5, 1.0};
  const auto data = generate_dataset(g, nz, seed, tt, periods);
  probe_set ps;
  ps.dim_z = data.dim_z();
  ps.p = box.size();
  ps.z.assign(data.values().begin(), data.values().end());
  if (ps.p > 0) {
    for (std::size_t k = 0; k < ntheta; ++k) {
      const double t = ntheta == 1 ? 0.5 : static_cast<double>(k) / static_cast<double>(ntheta - 1);
      for (std::size_t a = 0; a < ps.p; ++a)
        ps.theta.push_back(box.lower[a] + t * (box.upper[a] - box.lower[a]));
    }
  }
  ps.description = std::to_string(nz) + " z-draws from the " + to_string(g) + " generator (seed " +
                   std::to_string(seed) + ") x " + std::to_string(ps.p == 0 ? 1 : ntheta) +
                   " theta points on the box diagonal";
  return ps;
}

/// Where the "true" f comes from.
struct reference_spec {
  enum class kind { exact, gauss_hermite } type = kind::gauss_hermite;
  std::size_t r = 100;  // per dimension, tensorized for d > 1

  std::string describe() const {
    return type == kind::exact ? std::string("closed form")
                               : "Gauss-Hermite(" + std::to_string(r) + ")";
  }
};

/// Closed form when the model has one for which derivatives are not needed
/// elsewhere (the indicator benchmark), GH(100) otherwise.
template <likelihood_integrand M>
reference_spec default_reference(const M& model) {
  if (!model.has_derivatives()) return {reference_spec::kind::exact, 0};
  return {reference_spec::kind::gauss_hermite, 100};
}

/// Number of derivative components up to order k: 1, 1 + p, 1 + p + p^2.
inline std::size_t derivative_components(std::size_t p, int k) {
  std::size_t n = 1;
  if (k >= 1) n += p;
  if (k >= 2) n += p * p;
  return n;
}

/// (f~, grad f~, hess f~) at (z, theta) under `rule`, truncated at order k.
template <likelihood_integrand M>
void integrate_derivatives(const M& model, const rule_nd& rule, std::span<const double> z,
                           std::span<const double> theta, int k, std::span<double> out) {
  const std::size_t p = model.dim_theta();
  const int order = p == 0 ? 0 : k;
  std::fill(out.begin(), out.end(), 0.0);
  if (order == 0) {
    out[0] = apply(rule, [&](std::span<const double> v) { return model.value(v, z, theta); });
    return;
  }
  std::vector<double> g(p), h(order >= 2 ? p * p : 0);
  for (std::size_t j = 0; j < rule.r(); ++j) {
    const auto v = rule.point(j);
    const double w = rule.weights()[j];
    const double phi = model.derivatives(v, z, theta, g, h);
    if (!std::isfinite(phi))
      throw numeric_failure("integrate_derivatives: integrand is not finite at a rule point",
                            std::vector<double>(v.begin(), v.end()));
    out[0] += w * phi;
    for (std::size_t a = 0; a < p; ++a) out[1 + a] += w * g[a];
    if (order >= 2)
      for (std::size_t a = 0; a < p * p; ++a) out[1 + p + a] += w * h[a];
  }
}

template <likelihood_integrand M>
void exact_derivatives(const M& model, std::span<const double> z, std::span<const double> theta,
                       int k, std::span<double> out) {
  const std::size_t p = model.dim_theta();
  const int order = p == 0 ? 0 : k;
  std::vector<double> g(order >= 1 ? p : 0), h(order >= 2 ? p * p : 0);
  const auto f = model.exact(z, theta, g, h);
  if (!f) throw invalid_configuration(model.name() + " has no closed-form likelihood");
  out[0] = *f;
  for (std::size_t a = 0; a < g.size(); ++a) out[1 + a] = g[a];
  for (std::size_t a = 0; a < h.size(); ++a) out[1 + p + a] = h[a];
}

/// Reference values for every probe, laid out probe-major.
template <likelihood_integrand M>
std::vector<double> reference_values(const M& model, const probe_set& probes,
                                     const reference_spec& ref, int k) {
  const std::size_t nc = derivative_components(model.dim_theta(), model.dim_theta() == 0 ? 0 : k);
  std::vector<double> out(probes.size() * nc);
  std::optional<rule_nd> rule;
  if (ref.type == reference_spec::kind::gauss_hermite)
    rule.emplace(make_rule(method::gh, ref.r, model.dim_v()));
  std::size_t idx = 0;
  for (std::size_t i = 0; i < probes.z_count(); ++i)
    for (std::size_t t = 0; t < probes.theta_count(); ++t, ++idx) {
      std::span<double> slot(out.data() + idx * nc, nc);
      if (rule)
        integrate_derivatives(model, *rule, probes.z_at(i), probes.theta_at(t), k, slot);
      else
        exact_derivatives(model, probes.z_at(i), probes.theta_at(t), k, slot);
    }
  return out;
}

struct error_report {
  std::string method;
  std::vector<std::size_t> r_values;
  std::vector<double> sup_error;
  std::vector<double> rmse;
  int k = 0;
  std::size_t reps = 1;
  std::string probe_spec;
  std::string reference;
};

/// Errors of the method's rule against the reference over the probe grid.
/// For each r, the error at a probe is the largest deviation over the
/// derivative components of order <= k. Stochastic methods are repeated
/// `reps` times with seed base_seed ^ rep; sup_error is the maximum over
/// probes of the rep-averaged error and rmse pools reps and probes.
template <likelihood_integrand M>
error_report error_curve(const M& model, method how, const std::vector<std::size_t>& r_values,
                         const probe_set& probes, const reference_spec& ref, int k,
                         std::size_t reps = 1, std::uint64_t base_seed = 0) {
  if (k < 0 || k > 2) throw invalid_argument("error_curve: k must be 0, 1 or 2");
  if (r_values.empty()) throw invalid_argument("error_curve: no r values");
  for (std::size_t i = 1; i < r_values.size(); ++i)
    if (r_values[i] <= r_values[i - 1]) throw invalid_argument("error_curve: r values must increase");
  if (probes.size() == 0) throw invalid_argument("error_curve: empty probe set");
  if (probes.dim_z != model.dim_z() || probes.p != model.dim_theta())
    throw invalid_configuration("error_curve: probe set does not match the model");
  if (ref.type == reference_spec::kind::gauss_hermite && how == method::gh &&
      r_values.back() > ref.r)
    throw invalid_configuration("error_curve: reference Gauss-Hermite rule is coarser than the tested rule");
  if (reps == 0) throw invalid_argument("error_curve: reps must be >= 1");

  const std::size_t p = model.dim_theta();
  const int kk = p == 0 ? 0 : k;
  const std::size_t nc = derivative_components(p, kk);
  const auto reference = reference_values(model, probes, ref, kk);
  const std::size_t runs = is_stochastic(how) ? reps : 1;

  error_report rep;
  rep.method = to_string(how);
  rep.r_values = r_values;
  rep.k = k;
  rep.reps = runs;
  rep.probe_spec = probes.description;
  rep.reference = ref.describe();

  std::vector<double> values(nc), mean_err(probes.size());
  for (std::size_t r : r_values) {
    std::fill(mean_err.begin(), mean_err.end(), 0.0);
    double sq = 0.0;
    for (std::size_t run = 0; run < runs; ++run) {
      const rule_nd rule = make_rule(how, r, model.dim_v(), base_seed ^ run);
      std::size_t idx = 0;
      for (std::size_t i = 0; i < probes.z_count(); ++i)
        for (std::size_t t = 0; t < probes.theta_count(); ++t, ++idx) {
          integrate_derivatives(model, rule, probes.z_at(i), probes.theta_at(t), kk, values);
          double e = 0.0;
          for (std::size_t c = 0; c < nc; ++c)
            e = std::max(e, std::abs(values[c] - reference[idx * nc + c]));
          mean_err[idx] += e;
          sq += e * e;
        }
    }
    double sup = 0.0;
    for (double& e : mean_err) {
      e /= static_cast<double>(runs);
      sup = std::max(sup, e);
    }
    rep.sup_error.push_back(sup);
    rep.rmse.push_back(std::sqrt(sq / static_cast<double>(runs * probes.size())));
  }
  return rep;
}

// ---------------------------------------------------------------------------

struct rate_fit {
  enum class family { algebraic, exponential } model = family::algebraic;
  double c = 0.0;      // E(r) ~ c r^-s  or  c exp(-alpha r^beta)
  double s = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double r2 = 0.0;
  bool degenerate = false;
};

namespace detail {

struct line_fit {
  double slope, intercept, r2;
};

inline line_fit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  double sse = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double res = y[i] - (my + slope * (x[i] - mx));
    sse += res * res;
  }
  return {slope, my - slope * mx, syy > 0 ? 1.0 - sse / syy : 1.0};
}

}  // namespace detail

/// Least-squares rate fit of E against r: log E on log r (algebraic) and
/// log E on r^beta for beta in {0.5, 1} (exponential). The fit with the
/// larger r^2 wins.
inline rate_fit fit_rate(const std::vector<std::size_t>& r_values, const std::vector<double>& errors) {
  if (r_values.size() != errors.size()) throw invalid_argument("fit_rate: size mismatch");
  rate_fit out;
  if (std::all_of(errors.begin(), errors.end(), [](double e) { return e < 1e-14; })) {
    out.degenerate = true;
    return out;
  }
  std::vector<double> r, le;
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (errors[i] > 0.0) {
      r.push_back(static_cast<double>(r_values[i]));
      le.push_back(std::log(errors[i]));
    }
  if (r.size() < 4) throw invalid_argument("fit_rate: need at least 4 positive errors");

  std::vector<double> lr(r.size());
  std::transform(r.begin(), r.end(), lr.begin(), [](double x) { return std::log(x); });
  const auto alg = detail::least_squares(lr, le);
  out.model = rate_fit::family::algebraic;
  out.s = -alg.slope;
  out.c = std::exp(alg.intercept);
  out.r2 = alg.r2;

  for (double beta : {0.5, 1.0}) {
    std::vector<double> x(r.size());
    std::transform(r.begin(), r.end(), x.begin(), [&](double v) { return std::pow(v, beta); });
    const auto ex = detail::least_squares(x, le);
    if (ex.r2 > out.r2) {
      out = rate_fit{};
      out.model = rate_fit::family::exponential;
      out.alpha = -ex.slope;
      out.beta = beta;
      out.c = std::exp(ex.intercept);
      out.r2 = ex.r2;
    }
  }
  return out;
}

inline rate_fit fit_rate(const error_report& report, bool use_rmse = false) {
  return fit_rate(report.r_values, use_rmse ? report.rmse : report.sup_error);
}

/// Algebraic slope alone (log E on log r), without model selection.
inline double algebraic_slope(const std::vector<std::size_t>& r_values, const std::vector<double>& errors) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (errors[i] > 0.0) {
      x.push_back(std::log(static_cast<double>(r_values[i])));
      y.push_back(std::log(errors[i]));
    }
  if (x.size() < 2) throw invalid_argument("algebraic_slope: need at least 2 positive errors");
  return detail::least_squares(x, y).slope;
}

// ---------------------------------------------------------------------------

struct scaled_series {
  std::vector<std::size_t> n_values;
  std::vector<std::size_t> r_values;
  std::vector<double> error;   // E(R(n)), first-order
  std::vector<double> scaled;  // sqrt(n) E(R(n))
};

/// sqrt(n) E(R(n)) along n_values, with E the first-order sup error.
template <likelihood_integrand M>
scaled_series scaled_error_series(const M& model, method how, const link_function& link,
                                  const std::vector<std::size_t>& n_values, const probe_set& probes,
                                  const reference_spec& ref, std::size_t reps = 1,
                                  std::uint64_t base_seed = 0) {
  for (std::size_t i = 1; i < n_values.size(); ++i)
    if (n_values[i] <= n_values[i - 1]) throw invalid_argument("scaled_error_series: n values must increase");
  scaled_series out;
  std::map<std::size_t, double> cache;
  for (std::size_t n : n_values) {
    const std::size_t r = evaluate(link, n);
    auto it = cache.find(r);
    if (it == cache.end()) {
      const auto rep = error_curve(model, how, {r}, probes, ref, 1, reps, base_seed);
      it = cache.emplace(r, rep.sup_error[0]).first;
    }
    out.n_values.push_back(n);
    out.r_values.push_back(r);
    out.error.push_back(it->second);
    out.scaled.push_back(std::sqrt(static_cast<double>(n)) * it->second);
  }
  return out;
}

// ---------------------------------------------------------------------------

/// Values, gradients and Hessians of a function over a probe grid.
struct sampled_function {
  std::vector<double> value;
  std::vector<Eigen::VectorXd> grad;
  std::vector<Eigen::MatrixXd> hess;
};

struct composition_report {
  // index 0: log values, 1: gradients, 2: Hessians
  double lhs[3] = {0, 0, 0};
  double rhs[3] = {0, 0, 0};
  double slack[3] = {0, 0, 0};
  double c1 = 0.0;
  double c2 = 0.0;
  int violations = 0;
};

namespace detail {

inline double spectral_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

}  // namespace detail

/// Checks the three log-composition inequalities on the probe grid:
///   sup|log g - log h|   <= (1/delta) A
///   sup|grad log g - grad log h| <= C1(h) (A + B)
///   sup|hess log g - hess log h| <= C2(h) (A + B + B^2 + H)
/// with A = sup|g - h|, B = sup|grad g - grad h|, H = sup|hess g - hess h|,
/// C1 = (1 + sup|grad h|)/delta^2, C2 = 4 (1 + sup|grad h|^2 + sup|hess h|)/delta^3.
inline composition_report check_log_composition_bounds(const sampled_function& g,
                                                       const sampled_function& h, double delta) {
  const std::size_t n = g.value.size();
  if (h.value.size() != n || g.grad.size() != n || h.grad.size() != n || g.hess.size() != n ||
      h.hess.size() != n)
    throw invalid_argument("check_log_composition_bounds: g and h sampled on different grids");
  if (!(delta > 0.0)) throw invalid_argument("check_log_composition_bounds: delta must be positive");
  for (std::size_t i = 0; i < n; ++i)
    if (g.value[i] < delta || h.value[i] < delta)
      throw precondition_failure("check_log_composition_bounds: g or h falls below delta");

  double a = 0, b = 0, hh = 0, grad_h = 0, hess_h = 0;
  composition_report rep;
  for (std::size_t i = 0; i < n; ++i) {
    const double gv = g.value[i], hv = h.value[i];
    a = std::max(a, std::abs(gv - hv));
    b = std::max(b, (g.grad[i] - h.grad[i]).norm());
    hh = std::max(hh, detail::spectral_norm(g.hess[i] - h.hess[i]));
    grad_h = std::max(grad_h, h.grad[i].norm());
    hess_h = std::max(hess_h, detail::spectral_norm(h.hess[i]));

    rep.lhs[0] = std::max(rep.lhs[0], std::abs(std::log(gv) - std::log(hv)));
    const Eigen::VectorXd sg = g.grad[i] / gv, sh = h.grad[i] / hv;
    rep.lhs[1] = std::max(rep.lhs[1], (sg - sh).norm());
    const Eigen::MatrixXd lg = g.hess[i] / gv - sg * sg.transpose();
    const Eigen::MatrixXd lh = h.hess[i] / hv - sh * sh.transpose();
    rep.lhs[2] = std::max(rep.lhs[2], detail::spectral_norm(lg - lh));
  }
  rep.c1 = (1.0 + grad_h) / (delta * delta);
  rep.c2 = 4.0 * (1.0 + grad_h * grad_h + hess_h) / (delta * delta * delta);
  rep.rhs[0] = a / delta;
  rep.rhs[1] = rep.c1 * (a + b);
  rep.rhs[2] = rep.c2 * (a + b + b * b + hh);
  for (int j = 0; j < 3; ++j) {
    rep.slack[j] = rep.rhs[j] - rep.lhs[j];
    if (rep.slack[j] < 0.0) ++rep.violations;
  }
  return rep;
}

/// Samples f~ (rule) and its derivatives over every probe.
template <likelihood_integrand M>
sampled_function sample_likelihood(const M& model, const rule_nd& rule, const probe_set& probes) {
  const std::size_t p = model.dim_theta();
  const std::size_t nc = derivative_components(p, 2);
  std::vector<double> buf(nc);
  sampled_function out;
  for (std::size_t i = 0; i < probes.z_count(); ++i)
    for (std::size_t t = 0; t < probes.theta_count(); ++t) {
      integrate_derivatives(model, rule, probes.z_at(i), probes.theta_at(t), 2, buf);
      out.value.push_back(buf[0]);
      out.grad.push_back(Eigen::Map<const Eigen::VectorXd>(buf.data() + 1, static_cast<Eigen::Index>(p)));
      out.hess.push_back(
          Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
              buf.data() + 1 + p, static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p)));
    }
  return out;
}

// ---------------------------------------------------------------------------

/// One (v, z, theta) evaluation point for derivative checks.
struct eval_point {
  std::vector<double> v, z, theta;
};

struct fd_report {
  double grad_deviation = 0.0;
  double hess_deviation = 0.0;
  double hess_asymmetry = 0.0;
};

inline constexpr double fd_grad_step = 1e-5;
inline constexpr double fd_hess_step = 1e-4;

/// Analytic derivatives against central differences: the gradient against
/// differences of phi (step 1e-5), the Hessian against differences of the
/// analytic gradient (step 1e-4). Deviations are |a - fd| / max(1, |a|).
template <likelihood_integrand M>
fd_report fd_check(const M& model, const std::vector<eval_point>& points) {
  if (!model.has_derivatives()) throw unsupported_operation("fd_check: integrand has no derivatives");
  const std::size_t p = model.dim_theta();
  std::vector<double> g(p), h(p * p), gp(p), gm(p), none;
  fd_report rep;
  auto dev = [](double a, double fd) { return std::abs(a - fd) / std::max(1.0, std::abs(a)); };
  for (const auto& pt : points) {
    model.derivatives(pt.v, pt.z, pt.theta, g, h);
    std::vector<double> th = pt.theta;
    for (std::size_t a = 0; a < p; ++a) {
      const double t0 = th[a];
      th[a] = t0 + fd_grad_step;
      const double fp = model.value(pt.v, pt.z, th);
      th[a] = t0 - fd_grad_step;
      const double fm = model.value(pt.v, pt.z, th);
      rep.grad_deviation = std::max(rep.grad_deviation, dev(g[a], (fp - fm) / (2 * fd_grad_step)));

      th[a] = t0 + fd_hess_step;
      model.derivatives(pt.v, pt.z, th, gp, none);
      th[a] = t0 - fd_hess_step;
      model.derivatives(pt.v, pt.z, th, gm, none);
      th[a] = t0;
      for (std::size_t b = 0; b < p; ++b) {
        rep.hess_deviation =
            std::max(rep.hess_deviation, dev(h[b * p + a], (gp[b] - gm[b]) / (2 * fd_hess_step)));
        rep.hess_asymmetry = std::max(rep.hess_asymmetry, std::abs(h[a * p + b] - h[b * p + a]));
      }
    }
  }
  return rep;
}

/// Random evaluation points: v, z ~ N(0, 1) coordinatewise and theta
/// uniform in the parameter box.
template <likelihood_integrand M>
std::vector<eval_point> random_eval_points(const M& model, std::size_t count, std::uint64_t seed) {
  const auto& box = model.theta_box();
  counter_rng rng(seed);
  std::vector<eval_point> pts(count);
  for (auto& pt : pts) {
    pt.v.resize(model.dim_v());
    for (double& v : pt.v) v = rng.normal();
    pt.z.resize(model.dim_z());
    for (double& z : pt.z) z = rng.normal();
    pt.theta.resize(model.dim_theta());
    for (std::size_t a = 0; a < pt.theta.size(); ++a)
      pt.theta[a] = box.lower[a] + rng.uniform() * (box.upper[a] - box.lower[a]);
  }
  return pts;
}

}  // namespace male
