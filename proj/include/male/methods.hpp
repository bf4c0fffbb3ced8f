#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "male/error.hpp"
#include "male/quadrature.hpp"
#include "male/sparse_grid.hpp"

namespace male {

/// Integration method labels used by the CLI, experiment configs and CSVs.
enum class method { mc, halton, mlhs, gh, gl, midpoint, sparse };

inline std::string to_string(method m) {
  switch (m) {
    case method::mc: return "mc";
    case method::halton: return "halton";
    case method::mlhs: return "mlhs";
    case method::gh: return "gh";
    case method::gl: return "gl";
    case method::midpoint: return "midpoint";
    case method::sparse: return "sparse";
  }
  return "unknown";
}

inline method parse_method(const std::string& s) {
  if (s == "mc") return method::mc;
  if (s == "halton") return method::halton;
  if (s == "mlhs") return method::mlhs;
  if (s == "gh" || s == "hermite") return method::gh;
  if (s == "gl" || s == "legendre") return method::gl;
  if (s == "midpoint") return method::midpoint;
  if (s == "sparse") return method::sparse;
  throw invalid_argument("unknown method: " + s);
}

/// Randomized methods change with the seed; the others are fixed rules.
constexpr bool is_stochastic(method m) noexcept {
  return m == method::mc || m == method::mlhs;
}

/// Builds the d-dimensional Gaussian-weight rule for a method at size r. For
/// the sparse method r is the Smolyak level. Gauss-Legendre and midpoint are
/// built on (0, 1) and carried to the real line through the inverse normal
/// CDF, then tensorized.
inline rule_nd make_rule(method m, std::size_t r, std::size_t d = 1, std::uint64_t seed = 0) {
  switch (m) {
    case method::mc: return monte_carlo_gaussian(r, d, seed);
    case method::halton: return halton(r, d);
    case method::mlhs: return mlhs(r, d, seed);
    case method::gh: return product_rule(gauss_hermite(r), d);
    case method::gl: return product_rule(to_gaussian(gauss_legendre(r, 0.0, 1.0)), d);
    case method::midpoint: return product_rule(to_gaussian(midpoint(r, 0.0, 1.0)), d);
    case method::sparse: return smolyak({d, r, sparse_family::gauss_hermite});
  }
  throw invalid_argument("make_rule: unknown method");
}

/// Parses "method:r" or "method:r:seed", e.g. "gh:100" or "mc:1000:7".
struct rule_spec {
  method how = method::gh;
  std::size_t r = 1;
  std::uint64_t seed = 0;

  std::string str() const {
    std::string s = to_string(how) + ":" + std::to_string(r);
    if (is_stochastic(how)) s += ":" + std::to_string(seed);
    return s;
  }
};

inline rule_spec parse_rule_spec(const std::string& text) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(':', start);
    parts.push_back(text.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  if (parts.size() < 2 || parts.size() > 3)
    throw invalid_argument("rule spec must look like method:r[:seed], got " + text);
  rule_spec spec;
  spec.how = parse_method(parts[0]);
  try {
    spec.r = std::stoull(parts[1]);
    if (parts.size() == 3) spec.seed = std::stoull(parts[2]);
  } catch (const std::exception&) {
    throw invalid_argument("rule spec has a bad number: " + text);
  }
  return spec;
}

}  // namespace male
