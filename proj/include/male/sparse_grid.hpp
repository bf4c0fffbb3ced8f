#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <algorithm>
#include <map>
#include <span>
#include <vector>

#include "male/error.hpp"
#include "male/quadrature.hpp"

namespace male {

enum class sparse_family { gauss_hermite };

struct sparse_grid_spec {
  std::size_t d = 1;
  std::size_t level = 1;
  sparse_family family = sparse_family::gauss_hermite;
  std::size_t point_cap = 1'000'000;
};

/// Level-to-size map: m(1) = 1, m(l) = 2l - 1.
constexpr std::size_t sparse_level_size(std::size_t level) noexcept {
  return level <= 1 ? 1 : 2 * level - 1;
}

namespace detail {

inline void validate(const sparse_grid_spec& spec) {
  if (spec.d == 0) throw invalid_argument("sparse grid: d must be >= 1");
  if (spec.level == 0) throw invalid_argument("sparse grid: level must be >= 1");
}

// Visits every multi-index l >= 1 with |l|_1 == total.
template <class F>
void for_each_level_index(std::size_t d, std::size_t total, F&& visit) {
  std::vector<std::size_t> l(d, 1);
  if (total < d) return;
  const std::size_t extra = total - d;
  // Distribute `extra` over d slots (compositions), lexicographically.
  std::vector<std::size_t> add(d, 0);
  add[d - 1] = extra;
  while (true) {
    for (std::size_t k = 0; k < d; ++k) l[k] = 1 + add[k];
    visit(l);
    // next composition
    std::size_t k = d - 1;
    while (k > 0 && add[k] == 0) --k;
    if (k == 0) return;
    const std::size_t moved = add[k];
    add[k] = 0;
    add[k - 1] += 1;
    add[d - 1] = moved - 1;
  }
}

inline double binomial(std::size_t n, std::size_t k) {
  double c = 1.0;
  for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  return c;
}

using merge_key = std::vector<std::int64_t>;

inline merge_key key_of(std::span<const double> x) {
  merge_key k(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) k[i] = std::llround(x[i] * 1e12);
  return k;
}

// Walks the combination technique, handing each (point, weight) term to sink.
template <class Sink>
void smolyak_terms(const sparse_grid_spec& spec, Sink&& sink) {
  const std::size_t d = spec.d;
  const std::size_t q = spec.level + d - 1;
  std::vector<rule_1d> rules;
  for (std::size_t l = 1; l <= spec.level; ++l) rules.push_back(gauss_hermite(sparse_level_size(l)));

  std::vector<double> x(d);
  std::vector<std::size_t> idx(d);
  for (std::size_t total = std::max(d, spec.level); total <= q; ++total) {
    const double coeff = ((q - total) % 2 == 0 ? 1.0 : -1.0) * binomial(d - 1, q - total);
    for_each_level_index(d, total, [&](const std::vector<std::size_t>& l) {
      std::fill(idx.begin(), idx.end(), 0);
      while (true) {
        double w = coeff;
        for (std::size_t k = 0; k < d; ++k) {
          const rule_1d& rk = rules[l[k] - 1];
          x[k] = rk.nodes()[idx[k]];
          w *= rk.weights()[idx[k]];
        }
        sink(std::span<const double>(x), w);
        std::size_t k = d;
        while (k-- > 0) {
          if (++idx[k] < rules[l[k] - 1].r()) break;
          idx[k] = 0;
        }
        if (k == static_cast<std::size_t>(-1)) break;
      }
    });
  }
}

}  // namespace detail

/// Exact merged point count, without building the weights of the rule.
inline std::size_t sparse_grid_size(const sparse_grid_spec& spec) {
  detail::validate(spec);
  std::map<detail::merge_key, int> seen;
  detail::smolyak_terms(spec, [&](std::span<const double> x, double) {
    if (seen.emplace(detail::key_of(x), 0).second && seen.size() > spec.point_cap)
      throw resource_limit("sparse_grid_size: point cap exceeded");
  });
  return seen.size();
}

/// Smolyak combination of Gauss-Hermite rules on R^d. Points shared between
/// tensor terms are merged (coordinates equal to 1e-12) and their weights
/// summed; merged weights may be negative.
inline rule_nd smolyak(const sparse_grid_spec& spec) {
  detail::validate(spec);
  std::map<detail::merge_key, std::pair<std::vector<double>, double>> merged;
  detail::smolyak_terms(spec, [&](std::span<const double> x, double w) {
    auto [it, inserted] =
        merged.try_emplace(detail::key_of(x), std::vector<double>(x.begin(), x.end()), 0.0);
    it->second.second += w;
    if (inserted && merged.size() > spec.point_cap)
      throw resource_limit("smolyak: point cap exceeded");
  });
  std::vector<double> pts, weights;
  pts.reserve(merged.size() * spec.d);
  weights.reserve(merged.size());
  for (const auto& [key, entry] : merged) {
    pts.insert(pts.end(), entry.first.begin(), entry.first.end());
    weights.push_back(entry.second);
  }
  return rule_nd(spec.d, std::move(pts), std::move(weights), construction::sparse_grid);
}

}  // namespace male
