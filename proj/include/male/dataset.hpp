#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "male/error.hpp"
#include "male/rng.hpp"

namespace male {

enum class dgp { rc_regression, mixed_logit_1d, butler_moffitt, ars };

inline std::string to_string(dgp g) {
  switch (g) {
    case dgp::rc_regression: return "rc_regression";
    case dgp::mixed_logit_1d: return "mixed_logit_1d";
    case dgp::butler_moffitt: return "butler_moffitt";
    case dgp::ars: return "ars";
  }
  return "unknown";
}

inline dgp parse_dgp(const std::string& s) {
  if (s == "rc_regression") return dgp::rc_regression;
  if (s == "mixed_logit_1d") return dgp::mixed_logit_1d;
  if (s == "butler_moffitt") return dgp::butler_moffitt;
  if (s == "ars" || s == "ars_normal_cdf") return dgp::ars;
  throw invalid_argument("unknown dgp: " + s);
}

struct provenance {
  enum class kind { synthetic, file } source = kind::synthetic;
  std::string dgp_id;  // synthetic only
  std::uint64_t seed = 0;
  std::vector<double> true_theta;
  std::string path;  // file only
};

/// n records of dimension dim_z, stored row-major.
class dataset {
 public:
  dataset(std::size_t dim_z, std::vector<double> values, provenance prov = {})
      : dim_z_(dim_z), values_(std::move(values)), prov_(std::move(prov)) {
    if (dim_z_ == 0) throw invalid_argument("dataset: dim_z must be >= 1");
    if (values_.empty() || values_.size() % dim_z_ != 0)
      throw invalid_argument("dataset: need n >= 1 complete records");
  }

  std::size_t n() const noexcept { return values_.size() / dim_z_; }
  std::size_t dim_z() const noexcept { return dim_z_; }
  std::span<const double> record(std::size_t i) const noexcept {
    return {values_.data() + i * dim_z_, dim_z_};
  }
  std::span<const double> values() const noexcept { return values_; }
  const provenance& origin() const noexcept { return prov_; }

 private:
  std::size_t dim_z_;
  std::vector<double> values_;
  provenance prov_;
};

inline std::size_t dgp_theta_size(dgp g) {
  switch (g) {
    case dgp::rc_regression: return 1;
    case dgp::mixed_logit_1d: return 2;
    case dgp::butler_moffitt: return 2;
    case dgp::ars: return 0;
  }
  return 0;
}

/// Synthetic data, a pure function of (g, n, seed, true_theta, periods).
///
///  rc_regression   z = (y, x), x ~ N(0,1), b ~ N(theta, 1), y = x b + e
///  mixed_logit_1d  theta = (mu, sigma); x ~ N(0,1), b = mu + sigma v,
///                  y ~ Bernoulli(logistic(x b)), z = (2y - 1) x
///  butler_moffitt  theta = (sigma, beta); v ~ N(0,1) per record,
///                  y_t = 1(x_t beta + sigma v + e_t > 0), z_t = (2 y_t - 1) x_t
///  ars             z ~ N(0,1)
inline dataset generate_dataset(dgp g, std::size_t n, std::uint64_t seed,
                                std::span<const double> true_theta, std::size_t periods = 3) {
  if (n == 0) throw invalid_argument("generate_dataset: n must be >= 1");
  if (true_theta.size() != dgp_theta_size(g))
    throw invalid_argument("generate_dataset: true_theta has the wrong size for " + to_string(g));
  counter_rng rng(seed);
  std::size_t q = 1;
  std::vector<double> values;
  switch (g) {
    case dgp::rc_regression: {
      q = 2;
      values.reserve(2 * n);
      for (std::size_t i = 0; i < n; ++i) {
        const double x = rng.normal();
        const double b = true_theta[0] + rng.normal();
        const double e = rng.normal();
        values.push_back(x * b + e);
        values.push_back(x);
      }
      break;
    }
    case dgp::mixed_logit_1d: {
      values.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double x = rng.normal();
        const double b = true_theta[0] + true_theta[1] * rng.normal();
        const double p = 1.0 / (1.0 + std::exp(-x * b));
        const bool y = rng.uniform() < p;
        values.push_back(y ? x : -x);
      }
      break;
    }
    case dgp::butler_moffitt: {
      if (periods == 0) throw invalid_argument("generate_dataset: periods must be >= 1");
      q = periods;
      values.reserve(n * periods);
      for (std::size_t i = 0; i < n; ++i) {
        const double v = rng.normal();
        for (std::size_t t = 0; t < periods; ++t) {
          const double x = rng.normal();
          const double latent = x * true_theta[1] + true_theta[0] * v + rng.normal();
          values.push_back(latent > 0.0 ? x : -x);
        }
      }
      break;
    }
    case dgp::ars: {
      values.reserve(n);
      for (std::size_t i = 0; i < n; ++i) values.push_back(rng.normal());
      break;
    }
  }
  provenance prov;
  prov.source = provenance::kind::synthetic;
  prov.dgp_id = to_string(g);
  prov.seed = seed;
  prov.true_theta.assign(true_theta.begin(), true_theta.end());
  return dataset(q, std::move(values), std::move(prov));
}

// ---------------------------------------------------------------------------
// CSV with header z_1,...,z_q; synthetic provenance goes to a sidecar JSON
// next to the CSV (same stem, .json).

inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".json");
  return p;
}

inline void write_dataset(const dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw invalid_argument("write_dataset: cannot open " + path.string());
  out << std::setprecision(17);
  for (std::size_t k = 0; k < data.dim_z(); ++k) out << (k ? "," : "") << "z_" << k + 1;
  out << '\n';
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto z = data.record(i);
    for (std::size_t k = 0; k < z.size(); ++k) out << (k ? "," : "") << z[k];
    out << '\n';
  }
  const auto& prov = data.origin();
  if (prov.source == provenance::kind::synthetic) {
    nlohmann::json side = {{"dgp", prov.dgp_id},
                           {"seed", prov.seed},
                           {"n", data.n()},
                           {"true_theta", prov.true_theta}};
    std::ofstream js(sidecar_path(path));
    js << side.dump(2) << '\n';
  }
}

inline dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw invalid_argument("read_dataset: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw invalid_argument("read_dataset: empty file");
  std::size_t q = 0;
  {
    std::stringstream header(line);
    std::string col;
    while (std::getline(header, col, ',')) {
      if (col.rfind("z_", 0) != 0) throw invalid_argument("read_dataset: bad header column " + col);
      ++q;
    }
  }
  std::vector<double> values;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t cols = 0;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double x = 0.0;
      try {
        x = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0) throw invalid_argument("read_dataset: bad number on line " + std::to_string(row));
      values.push_back(x);
      ++cols;
    }
    if (cols != q) throw invalid_argument("read_dataset: wrong column count on line " + std::to_string(row));
  }
  provenance prov;
  prov.source = provenance::kind::file;
  prov.path = path.string();
  const auto side = sidecar_path(path);
  if (std::filesystem::exists(side)) {
    std::ifstream js(side);
    const auto j = nlohmann::json::parse(js);
    prov.dgp_id = j.value("dgp", "");
    prov.seed = j.value("seed", std::uint64_t{0});
    prov.true_theta = j.value("true_theta", std::vector<double>{});
  }
  return dataset(q, std::move(values), std::move(prov));
}

}  // namespace male
