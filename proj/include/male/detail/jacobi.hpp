#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "male/error.hpp"

namespace male::detail {

// Gauss rules from the three-term recurrence of the orthonormal polynomials
//   beta_{k+1} p_{k+1}(x) = (x - alpha_k) p_k(x) - beta_k p_{k-1}(x),
// with p_0 = 1 / sqrt(mu0). Only symmetric weights (alpha == 0) are needed
// here, so the recurrence is stored as its off-diagonal alone:
// beta[k] == beta_{k+1}, k = 0 .. n-2.

struct gauss_nodes {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline constexpr double ql_tolerance = 1e-15;
inline constexpr int ql_max_iterations = 50;

/// Eigenvalues and first eigenvector components of the symmetric
/// tridiagonal matrix with zero diagonal and the given sub-diagonal,
/// by implicit-shift QL. Only the first row of the accumulated rotation is
/// tracked, so the cost is O(n^2) rather than O(n^3).
inline void tridiagonal_ql(std::vector<double>& d, std::vector<double>& e,
                           std::vector<double>& z0) {
  const std::size_t n = d.size();
  for (std::size_t l = 0; l < n; ++l) {
    int iter = 0;
    std::size_t m;
    do {
      for (m = l; m + 1 < n; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= ql_tolerance * dd) break;
      }
      if (m != l) {
        if (iter++ == ql_max_iterations)
          throw numeric_failure("tridiagonal QL did not converge");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0, c = 1.0, p = 0.0;
        bool underflow = false;
        for (std::size_t i = m; i-- > l;) {
          const double f = s * e[i];
          const double b = c * e[i];
          // entries are O(sqrt(n)), so the plain root cannot overflow
          r = std::sqrt(f * f + g * g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            underflow = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          const double zf = z0[i + 1];
          z0[i + 1] = s * z0[i] + c * zf;
          z0[i] = c * z0[i] - s * zf;
        }
        if (underflow) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
}

// Evaluates q(x) = beta_n p_n(x) (same zeros as p_n), its derivative, and the
// Christoffel sum sum_{k<n} p_k(x)^2.
struct recurrence_eval {
  double q;
  double dq;
  double christoffel_sum;
};

inline recurrence_eval eval_recurrence(double x, const std::vector<double>& beta,
                                       std::size_t n, double mu0) {
  double p_prev = 0.0, dp_prev = 0.0;
  double p = 1.0 / std::sqrt(mu0), dp = 0.0;
  double sum = p * p;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double b_prev = k == 0 ? 0.0 : beta[k - 1];
    const double p_next = (x * p - b_prev * p_prev) / beta[k];
    const double dp_next = (p + x * dp - b_prev * dp_prev) / beta[k];
    p_prev = p;
    dp_prev = dp;
    p = p_next;
    dp = dp_next;
    sum += p * p;
  }
  const double b_prev = n >= 2 ? beta[n - 2] : 0.0;
  return {x * p - b_prev * p_prev, p + x * dp - b_prev * dp_prev, sum};
}

/// Golub-Welsch for a symmetric weight, followed by Newton refinement of each
/// node on the recurrence and Christoffel-number weights, which keep full
/// relative accuracy for the tiny outer weights. Where the recurrence
/// overflows (far tails of very large rules) the Golub-Welsch values are kept.
inline gauss_nodes golub_welsch_symmetric(const std::vector<double>& beta, std::size_t n,
                                          double mu0) {
  std::vector<double> d(n, 0.0);
  std::vector<double> e(n, 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) e[k] = beta[k];
  std::vector<double> z0(n, 0.0);
  z0[0] = 1.0;
  tridiagonal_ql(d, e, z0);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });

  gauss_nodes out;
  out.nodes.resize(n);
  out.weights.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    out.nodes[j] = d[order[j]];
    out.weights[j] = mu0 * z0[order[j]] * z0[order[j]];
  }

  // Refine the upper half and mirror it.
  const std::size_t half = n / 2;
  for (std::size_t j = n - half; j < n; ++j) {
    double x = out.nodes[j];
    const double lo = j > 0 ? out.nodes[j - 1] : x - 1.0;
    const double hi = j + 1 < n ? out.nodes[j + 1] : x + 1.0;
    bool ok = true;
    for (int it = 0; it < 3; ++it) {
      const auto ev = eval_recurrence(x, beta, n, mu0);
      if (!std::isfinite(ev.q) || !std::isfinite(ev.dq) || ev.dq == 0.0) {
        ok = false;
        break;
      }
      const double next = x - ev.q / ev.dq;
      if (!(next > 0.5 * (lo + x) && next < 0.5 * (x + hi))) {
        ok = false;
        break;
      }
      const double step = std::abs(next - x);
      x = next;
      if (step <= 1e-17 * std::max(1.0, std::abs(x))) break;
    }
    if (ok) {
      const auto ev = eval_recurrence(x, beta, n, mu0);
      if (std::isfinite(ev.christoffel_sum) && ev.christoffel_sum > 0.0) {
        out.nodes[j] = x;
        out.weights[j] = 1.0 / ev.christoffel_sum;
      }
    }
  }
  for (std::size_t j = 0; j < half; ++j) {
    out.nodes[j] = -out.nodes[n - 1 - j];
    out.weights[j] = out.weights[n - 1 - j];
  }
  if (n % 2 == 1) {
    out.nodes[half] = 0.0;
    const auto ev = eval_recurrence(0.0, beta, n, mu0);
    if (std::isfinite(ev.christoffel_sum) && ev.christoffel_sum > 0.0)
      out.weights[half] = 1.0 / ev.christoffel_sum;
  }
  return out;
}

}  // namespace male::detail
