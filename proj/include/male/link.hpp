#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "male/error.hpp"

namespace male {

/// Link functions n -> R(n) coupling the rule size to the sample size.
///
///   constant     ceil(a)
///   logarithmic  ceil(a log n)
///   sqrt         ceil(a sqrt n)
///   linear       ceil(a n)
///   algebraic    ceil(c^(1/s) n^(gamma/s))                  error ~ c r^-s
///   exponential  ceil(((log c)/alpha + (gamma/alpha) log n)^(1/beta))
///                                                           error ~ c e^(-alpha r^beta)
/// Every kind is floored at 1. The last two need gamma > 1/2 so that
/// sqrt(n) E(R(n)) ~ n^(1/2 - gamma) vanishes.
struct link_function {
  enum class kind { constant, logarithmic, sqrt, linear, algebraic, exponential };

  kind type = kind::constant;
  double a = 1.0;
  double c = 1.0;
  double s = 1.0;
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 0.6;
  std::string label;

  bool operator==(const link_function&) const = default;

  static link_function constant(double r0) { return scaled(kind::constant, r0); }
  static link_function logarithmic(double a) { return scaled(kind::logarithmic, a); }
  static link_function square_root(double a) { return scaled(kind::sqrt, a); }
  static link_function linear(double a) { return scaled(kind::linear, a); }
  static link_function algebraic(double c, double s, double gamma = 0.6) {
    link_function f;
    f.type = kind::algebraic;
    f.c = c;
    f.s = s;
    f.gamma = gamma;
    return checked(f);
  }
  static link_function exponential(double c, double alpha, double beta, double gamma = 0.6) {
    link_function f;
    f.type = kind::exponential;
    f.c = c;
    f.alpha = alpha;
    f.beta = beta;
    f.gamma = gamma;
    return checked(f);
  }

  static link_function scaled(kind k, double a) {
    link_function f;
    f.type = k;
    f.a = a;
    return checked(f);
  }

  static link_function checked(link_function f) {
    auto positive = [](double x, const char* what) {
      if (!(x > 0.0 && std::isfinite(x)))
        throw invalid_configuration(std::string("link: ") + what + " must be positive and finite");
    };
    switch (f.type) {
      case kind::constant:
      case kind::logarithmic:
      case kind::sqrt:
      case kind::linear: positive(f.a, "a"); break;
      case kind::algebraic:
        positive(f.c, "c");
        positive(f.s, "s");
        break;
      case kind::exponential:
        positive(f.c, "c");
        positive(f.alpha, "alpha");
        positive(f.beta, "beta");
        break;
    }
    if ((f.type == kind::algebraic || f.type == kind::exponential) && !(f.gamma > 0.5))
      throw invalid_configuration("link: gamma must exceed 1/2");
    return f;
  }
};

inline std::string to_string(link_function::kind k) {
  using K = link_function::kind;
  switch (k) {
    case K::constant: return "constant";
    case K::logarithmic: return "logarithmic";
    case K::sqrt: return "sqrt";
    case K::linear: return "linear";
    case K::algebraic: return "algebraic";
    case K::exponential: return "exponential";
  }
  return "unknown";
}

namespace detail {

// Ceiling that ignores a few ulps of overshoot from pow/log, so that values
// which are integers in exact arithmetic stay integers.
inline std::size_t ceil_count(double x) {
  if (!(x > 1.0)) return 1;
  if (!std::isfinite(x) || x > 9e18) throw resource_limit("link: R(n) overflows");
  return static_cast<std::size_t>(std::ceil(x * (1.0 - 4.0 * 0x1p-52)));
}

}  // namespace detail

/// R(n) for real n >= 1 (the formulas are stated for real arguments).
inline std::size_t evaluate(const link_function& f, double n) {
  if (!(n >= 1.0)) throw invalid_argument("link: n must be >= 1");
  using K = link_function::kind;
  switch (f.type) {
    case K::constant: return detail::ceil_count(f.a);
    case K::logarithmic: return detail::ceil_count(f.a * std::log(n));
    case K::sqrt: return detail::ceil_count(f.a * std::sqrt(n));
    case K::linear: return detail::ceil_count(f.a * n);
    case K::algebraic:
      return detail::ceil_count(std::pow(f.c, 1.0 / f.s) * std::pow(n, f.gamma / f.s));
    case K::exponential: {
      const double inner = std::log(f.c) / f.alpha + (f.gamma / f.alpha) * std::log(n);
      if (!(inner > 0.0)) return 1;
      return detail::ceil_count(std::pow(inner, 1.0 / f.beta));
    }
  }
  return 1;
}

inline std::size_t evaluate(const link_function& f, std::size_t n) {
  return evaluate(f, static_cast<double>(n));
}

/// Integrand evaluations for one pass over the data: n R(n).
inline std::uint64_t total_cost(const link_function& f, std::size_t n) {
  return static_cast<std::uint64_t>(n) * evaluate(f, n);
}

inline void to_json(nlohmann::json& j, const link_function& f) {
  using K = link_function::kind;
  j = nlohmann::json{{"kind", to_string(f.type)}};
  switch (f.type) {
    case K::constant: j["r0"] = f.a; break;
    case K::logarithmic:
    case K::sqrt:
    case K::linear: j["a"] = f.a; break;
    case K::algebraic:
      j["c"] = f.c;
      j["s"] = f.s;
      j["gamma"] = f.gamma;
      break;
    case K::exponential:
      j["c"] = f.c;
      j["alpha"] = f.alpha;
      j["beta"] = f.beta;
      j["gamma"] = f.gamma;
      break;
  }
  if (!f.label.empty()) j["label"] = f.label;
}

inline void from_json(const nlohmann::json& j, link_function& f) {
  const std::string k = j.at("kind").get<std::string>();
  if (k == "constant") {
    f = link_function::constant(j.contains("r0") ? j.at("r0").get<double>() : j.value("a", 1.0));
  } else if (k == "logarithmic") {
    f = link_function::logarithmic(j.value("a", 1.0));
  } else if (k == "sqrt") {
    f = link_function::square_root(j.value("a", 1.0));
  } else if (k == "linear") {
    f = link_function::linear(j.value("a", 1.0));
  } else if (k == "algebraic") {
    f = link_function::algebraic(j.value("c", 1.0), j.value("s", 1.0), j.value("gamma", 0.6));
  } else if (k == "exponential") {
    f = link_function::exponential(j.value("c", 1.0), j.value("alpha", 1.0), j.value("beta", 1.0),
                                   j.value("gamma", 0.6));
  } else {
    throw invalid_configuration("unknown link kind: " + k);
  }
  f.label = j.value("label", std::string{});
}

}  // namespace male
