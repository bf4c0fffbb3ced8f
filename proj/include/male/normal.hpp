#pragma once

#include <cmath>
#include <numbers>

#include "male/error.hpp"

namespace male {

inline constexpr double inv_sqrt_2pi = 0.3989422804014326779399460599343818684758586311649;

/// Standard normal density.
inline double normal_pdf(double x) noexcept { return inv_sqrt_2pi * std::exp(-0.5 * x * x); }

/// Standard normal CDF. The erfc form keeps full relative accuracy in the
/// lower tail.
inline double normal_cdf(double x) noexcept {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

namespace detail {

// Acklam's rational approximation, relative error about 1.2e-9 on (0, 0.5].
inline double acklam_lower(double u) noexcept {
  constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                          -2.759285104469687e+02, 1.383577518672690e+02,
                          -3.066479806614716e+01, 2.506628277459239e+00};
  constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                          -1.556989798598866e+02, 6.680131188771972e+01,
                          -1.328068155288572e+01};
  constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                          -2.400758277161838e+00, -2.549732539343734e+00,
                          4.374664141464968e+00,  2.938163982698783e+00};
  constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                          2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  if (u < p_low) {
    const double q = std::sqrt(-2.0 * std::log(u));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = u - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace detail

/// Inverse of the standard normal CDF on (0, 1).
///
/// A rational initial guess is refined by one Halley step against the erfc
/// representation of the CDF. Values above 0.5 are reflected through
/// 1 - u, which is exact in binary floating point, so the result is exactly
/// antisymmetric about 0.5.
inline double inverse_normal_cdf(double u) {
  if (!(u > 0.0 && u < 1.0)) throw domain_error("inverse_normal_cdf: u must lie in (0, 1)");
  if (u > 0.5) return -inverse_normal_cdf(1.0 - u);
  if (u == 0.5) return 0.0;

  double x = detail::acklam_lower(u);
  const double e = normal_cdf(x) - u;
  const double t = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x -= t / (1.0 + 0.5 * x * t);
  return x;
}

}  // namespace male
