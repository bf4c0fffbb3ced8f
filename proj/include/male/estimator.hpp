#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "male/dataset.hpp"
#include "male/error.hpp"
#include "male/models.hpp"
#include "male/quadrature.hpp"

namespace male {

/// Integrand, data and a single rule shared by every observation.
template <likelihood_integrand M>
class mal_problem {
 public:
  mal_problem(M integrand, const dataset& data, const rule_nd& rule, double floor_delta = 1e-12)
      : integrand_(std::move(integrand)), data_(&data), rule_(&rule), floor_delta_(floor_delta) {
    if (rule.d() != integrand_.dim_v())
      throw invalid_configuration("mal_problem: rule dimension does not match the integrand");
    if (data.dim_z() != integrand_.dim_z())
      throw invalid_configuration("mal_problem: record dimension does not match the integrand");
    if (!(floor_delta > 0.0)) throw invalid_argument("mal_problem: floor_delta must be positive");
  }

  const M& integrand() const noexcept { return integrand_; }
  const dataset& data() const noexcept { return *data_; }
  const rule_nd& rule() const noexcept { return *rule_; }
  double floor_delta() const noexcept { return floor_delta_; }
  std::size_t p() const noexcept { return integrand_.dim_theta(); }

 private:
  M integrand_;
  const dataset* data_;
  const rule_nd* rule_;
  double floor_delta_;
};

struct contribution_value {
  double value;
  bool floored;
};

/// f~(z; theta) = sum_j w_j phi(v_j, z, theta), clamped at the floor.
template <class M>
contribution_value approx_likelihood_contribution(const mal_problem<M>& prob,
                                                  std::span<const double> z,
                                                  std::span<const double> theta) {
  const double f = apply(prob.rule(), [&](std::span<const double> v) {
    return prob.integrand().value(v, z, theta);
  });
  if (f < prob.floor_delta()) return {prob.floor_delta(), true};
  return {f, false};
}

struct loglik_eval {
  double loglik = 0.0;
  // loglik with floored terms continued linearly below the floor,
  // log(delta) + (f - delta)/delta, so that score is its exact gradient.
  // Equal to loglik when nothing is floored.
  double merit = 0.0;
  Eigen::VectorXd score;    // order >= 1
  Eigen::MatrixXd hessian;  // order >= 2
  std::size_t floor_activations = 0;
};

/// L~_n(theta) together with its score (order >= 1) and Hessian (order 2).
/// Contributions are accumulated in record order.
template <class M>
loglik_eval evaluate_loglik(const mal_problem<M>& prob, std::span<const double> theta,
                            int order = 0) {
  const auto& model = prob.integrand();
  const auto& rule = prob.rule();
  const auto& data = prob.data();
  const std::size_t p = prob.p();
  const std::size_t n = data.n();
  if (order > 0 && !model.has_derivatives())
    throw unsupported_operation("evaluate_loglik: the integrand has no derivatives");

  loglik_eval out;
  if (order >= 1) out.score = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  if (order >= 2) out.hessian = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));

  std::vector<double> g(p), h(order >= 2 ? p * p : 0);
  Eigen::VectorXd df(static_cast<Eigen::Index>(p));
  Eigen::MatrixXd d2f(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));

  for (std::size_t i = 0; i < n; ++i) {
    const auto z = data.record(i);
    double f = 0.0;
    if (order == 0) {
      f = apply(rule, [&](std::span<const double> v) { return model.value(v, z, theta); });
    } else {
      df.setZero();
      if (order >= 2) d2f.setZero();
      for (std::size_t j = 0; j < rule.r(); ++j) {
        const auto v = rule.point(j);
        const double w = rule.weights()[j];
        const double phi = model.derivatives(v, z, theta, g, h);
        if (!std::isfinite(phi))
          throw numeric_failure("evaluate_loglik: integrand is not finite at a rule point",
                                std::vector<double>(v.begin(), v.end()));
        f += w * phi;
        for (std::size_t a = 0; a < p; ++a) df[static_cast<Eigen::Index>(a)] += w * g[a];
        if (order >= 2)
          for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = 0; b < p; ++b)
              d2f(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += w * h[a * p + b];
      }
    }
    if (f < prob.floor_delta()) {
      out.merit += (f - prob.floor_delta()) / prob.floor_delta();
      f = prob.floor_delta();
      ++out.floor_activations;
    }
    out.loglik += std::log(f);
    if (order >= 1) {
      const Eigen::VectorXd s = df / f;
      out.score += s;
      if (order >= 2) out.hessian += d2f / f - s * s.transpose();
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.loglik *= inv_n;
  out.merit = out.loglik + out.merit * inv_n;
  if (order >= 1) out.score *= inv_n;
  if (order >= 2) {
    out.hessian *= inv_n;
    out.hessian = 0.5 * (out.hessian + out.hessian.transpose()).eval();
  }
  if (!std::isfinite(out.merit)) throw numeric_failure("evaluate_loglik: log-likelihood is not finite");
  return out;
}

template <class M>
double approx_loglik(const mal_problem<M>& prob, std::span<const double> theta) {
  return evaluate_loglik(prob, theta, 0).loglik;
}

template <class M>
Eigen::VectorXd approx_score(const mal_problem<M>& prob, std::span<const double> theta) {
  return evaluate_loglik(prob, theta, 1).score;
}

template <class M>
Eigen::MatrixXd approx_hessian(const mal_problem<M>& prob, std::span<const double> theta) {
  return evaluate_loglik(prob, theta, 2).hessian;
}

// ---------------------------------------------------------------------------

struct maximize_options {
  double tol = 1e-8;
  int max_iter = 200;
  double armijo = 1e-4;
  double eigen_floor = 1e-8;
  int max_backtracks = 60;
};

struct iteration_record {
  int iteration;
  double loglik;
  double score_norm;
  double step;  // accepted step length along the Newton direction
};

struct mal_estimate {
  Eigen::VectorXd theta_hat;
  double loglik = 0.0;
  double score_norm = 0.0;
  Eigen::MatrixXd observed_information;
  Eigen::VectorXd std_errors;
  int iterations = 0;
  bool converged = false;
  std::size_t floor_activations = 0;  // summed over every evaluation of the run
  std::vector<iteration_record> trace;
};

namespace detail {

// Coordinates that may move: not pinned by the box, and not sitting on a
// bound with the score pointing outward.
inline std::vector<std::size_t> free_coordinates(const parameter_box& box,
                                                 const Eigen::VectorXd& theta,
                                                 const Eigen::VectorXd& score) {
  std::vector<std::size_t> free;
  for (std::size_t k = 0; k < box.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    if (box.pinned(k)) continue;
    if (theta[kk] <= box.lower[k] && score[kk] < 0.0) continue;
    if (theta[kk] >= box.upper[k] && score[kk] > 0.0) continue;
    free.push_back(k);
  }
  return free;
}

inline double projected_norm(const Eigen::VectorXd& score, const std::vector<std::size_t>& free) {
  double m = 0.0;
  for (std::size_t k : free) m = std::max(m, std::abs(score[static_cast<Eigen::Index>(k)]));
  return m;
}

}  // namespace detail

/// Projected Newton ascent on L~_n over the parameter box. The Hessian block
/// of the free coordinates is shifted, when needed, to be negative definite
/// with its largest eigenvalue at -eigen_floor; steps are backtracked until
/// the Armijo condition holds. Non-convergence is reported, not thrown.
template <class M>
mal_estimate maximize(const mal_problem<M>& prob, std::span<const double> theta0,
                      const maximize_options& opts = {}) {
  const auto& box = prob.integrand().theta_box();
  const std::size_t p = prob.p();
  if (theta0.size() != p) throw invalid_argument("maximize: theta0 has the wrong size");
  if (!box.contains(theta0)) throw invalid_argument("maximize: theta0 lies outside the parameter box");

  mal_estimate est;
  Eigen::VectorXd theta = Eigen::Map<const Eigen::VectorXd>(theta0.data(), static_cast<Eigen::Index>(p));
  auto span_of = [](const Eigen::VectorXd& x) { return std::span<const double>(x.data(), static_cast<std::size_t>(x.size())); };

  loglik_eval cur = evaluate_loglik(prob, span_of(theta), 2);
  est.floor_activations += cur.floor_activations;
  std::vector<std::size_t> free;

  int iter = 0;
  double last_step = 0.0;
  for (;; ++iter) {
    free = detail::free_coordinates(box, theta, cur.score);
    const double norm = detail::projected_norm(cur.score, free);
    est.trace.push_back({iter, cur.loglik, norm, last_step});
    if (norm <= opts.tol) {
      est.converged = true;
      break;
    }
    if (iter >= opts.max_iter) break;

    const auto m = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd hff(m, m);
    Eigen::VectorXd sf(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      sf[a] = cur.score[static_cast<Eigen::Index>(free[a])];
      for (Eigen::Index b = 0; b < m; ++b)
        hff(a, b) = cur.hessian(static_cast<Eigen::Index>(free[a]), static_cast<Eigen::Index>(free[b]));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hff);
    const Eigen::VectorXd mu = eig.eigenvalues();
    const double shift = std::max(0.0, mu.maxCoeff() + opts.eigen_floor);
    const Eigen::MatrixXd& u = eig.eigenvectors();
    const Eigen::VectorXd coef = u.transpose() * sf;
    Eigen::VectorXd dir_f = Eigen::VectorXd::Zero(m);
    for (Eigen::Index k = 0; k < m; ++k) dir_f -= (coef[k] / (mu[k] - shift)) * u.col(k);

    Eigen::VectorXd dir = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    for (Eigen::Index a = 0; a < m; ++a) dir[static_cast<Eigen::Index>(free[a])] = dir_f[a];

    // Close to the optimum the predicted gain drops below the rounding noise
    // of L~; there a full step is taken when it shrinks the projected score.
    // Ascent is measured on the merit, whose gradient the score is.
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(cur.merit));
    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd trial;
    std::optional<loglik_eval> next;
    for (int b = 0; b <= opts.max_backtracks; ++b, t *= 0.5) {
      trial = theta + t * dir;
      box.project(trial);
      const Eigen::VectorXd moved = trial - theta;
      if (moved.cwiseAbs().maxCoeff() == 0.0) break;
      const double gain = cur.score.dot(moved);
      if (b == 0 && gain <= noise) {
        auto e2 = evaluate_loglik(prob, span_of(trial), 2);
        est.floor_activations += e2.floor_activations;
        const auto trial_free = detail::free_coordinates(box, trial, e2.score);
        if (e2.merit >= cur.merit - noise && detail::projected_norm(e2.score, trial_free) < norm) {
          next = std::move(e2);
          accepted = true;
          break;
        }
        continue;
      }
      const auto e0 = evaluate_loglik(prob, span_of(trial), 0);
      est.floor_activations += e0.floor_activations;
      if (e0.merit >= cur.merit + opts.armijo * gain) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // no ascent possible at working precision
    theta = trial;
    if (next) {
      cur = std::move(*next);
    } else {
      cur = evaluate_loglik(prob, span_of(theta), 2);
      est.floor_activations += cur.floor_activations;
    }
    last_step = t;
  }

  est.theta_hat = theta;
  est.loglik = cur.loglik;
  est.iterations = iter;
  est.score_norm = detail::projected_norm(cur.score, free);

  const double n = static_cast<double>(prob.data().n());
  est.observed_information = -n * cur.hessian;
  est.std_errors = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  std::vector<std::size_t> unpinned;
  for (std::size_t k = 0; k < p; ++k)
    if (!box.pinned(k)) unpinned.push_back(k);
  if (!unpinned.empty()) {
    const auto m = static_cast<Eigen::Index>(unpinned.size());
    Eigen::MatrixXd info(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b < m; ++b)
        info(a, b) = est.observed_information(static_cast<Eigen::Index>(unpinned[a]),
                                              static_cast<Eigen::Index>(unpinned[b]));
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() == Eigen::Success) {
      const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(m, m));
      for (Eigen::Index a = 0; a < m; ++a)
        est.std_errors[static_cast<Eigen::Index>(unpinned[a])] = std::sqrt(cov(a, a));
    } else {
      for (std::size_t k : unpinned)
        est.std_errors[static_cast<Eigen::Index>(k)] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return est;
}

}  // namespace male
