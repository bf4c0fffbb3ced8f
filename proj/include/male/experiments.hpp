#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "male/dataset.hpp"
#include "male/diagnostics.hpp"
#include "male/error.hpp"
#include "male/estimator.hpp"
#include "male/link.hpp"
#include "male/methods.hpp"
#include "male/models.hpp"
#include "male/rng.hpp"
#include "male/version.hpp"

namespace male {

enum class experiment_kind { smooth_convergence, ars_convergence, link_scaling, rmse_fixed_n };

inline std::string to_string(experiment_kind k) {
  switch (k) {
    case experiment_kind::smooth_convergence: return "smooth_convergence";
    case experiment_kind::ars_convergence: return "ars_convergence";
    case experiment_kind::link_scaling: return "link_scaling";
    case experiment_kind::rmse_fixed_n: return "rmse_fixed_n";
  }
  return "unknown";
}

inline experiment_kind parse_experiment_kind(const std::string& s) {
  if (s == "smooth_convergence") return experiment_kind::smooth_convergence;
  if (s == "ars_convergence") return experiment_kind::ars_convergence;
  if (s == "link_scaling") return experiment_kind::link_scaling;
  if (s == "rmse_fixed_n") return experiment_kind::rmse_fixed_n;
  throw invalid_configuration("unknown experiment: " + s);
}

struct experiment_config {
  experiment_kind experiment = experiment_kind::smooth_convergence;
  std::string model = "rc_regression";
  std::vector<std::string> methods;
  std::vector<std::size_t> r_grid;
  std::vector<link_function> links;
  std::vector<std::size_t> n_values;
  std::size_t reps = 1;
  std::uint64_t base_seed = 1;
  std::string output = "out";
  std::string reference = "gh:100";  // "gh:R" or "exact"
  // probe grid for link_scaling
  std::size_t probe_z = 200;
  std::size_t probe_theta = 9;
  std::uint64_t probe_seed = 20240101;
  double true_theta = 0.0;

  bool operator==(const experiment_config&) const = default;
};

inline std::vector<std::size_t> powers_of_two(std::size_t from, std::size_t to) {
  std::vector<std::size_t> out;
  for (std::size_t r = from; r <= to; r *= 2) out.push_back(r);
  return out;
}

/// Desk defaults for each study. Repetition counts follow the original
/// recipe (5000 for convergence, 2000 for the RMSE study, fewer for the
/// seed-averaged link study); pass a smaller count for quick runs.
inline experiment_config default_config(experiment_kind k) {
  experiment_config c;
  c.experiment = k;
  switch (k) {
    case experiment_kind::smooth_convergence:
      c.model = "rc_regression";
      c.methods = {"mc", "halton", "gh"};
      c.r_grid = powers_of_two(16, 16384);
      c.reps = 5000;
      c.reference = "gh:100";
      break;
    case experiment_kind::ars_convergence:
      c.model = "ars_normal_cdf";
      c.methods = {"mc", "halton", "gh", "gl"};
      c.r_grid = powers_of_two(16, 16384);
      c.reps = 5000;
      c.reference = "exact";
      break;
    case experiment_kind::link_scaling:
      c.model = "rc_regression";
      c.methods = {"mc", "halton", "gh"};
      c.links = {link_function::constant(8), link_function::logarithmic(4),
                 link_function::square_root(1), link_function::linear(1)};
      c.n_values = {10, 30, 100, 300, 1000, 3000, 10000};
      c.reps = 20;
      c.reference = "exact";
      break;
    case experiment_kind::rmse_fixed_n:
      c.model = "rc_regression";
      c.methods = {"mc", "halton", "gh"};
      c.r_grid = powers_of_two(2, 64);
      c.n_values = {50, 5000};
      c.reps = 2000;
      c.reference = "gh:100";
      break;
  }
  return c;
}

inline void to_json(nlohmann::json& j, const experiment_config& c) {
  j = nlohmann::json{{"experiment", to_string(c.experiment)},
                     {"model", c.model},
                     {"methods", c.methods},
                     {"r_grid", c.r_grid},
                     {"links", c.links},
                     {"n_values", c.n_values},
                     {"reps", c.reps},
                     {"base_seed", c.base_seed},
                     {"output", c.output},
                     {"reference", c.reference},
                     {"probe_z", c.probe_z},
                     {"probe_theta", c.probe_theta},
                     {"probe_seed", c.probe_seed},
                     {"true_theta", c.true_theta}};
}

/// Missing keys fall back to the defaults of the named experiment.
inline void from_json(const nlohmann::json& j, experiment_config& c) {
  c = default_config(parse_experiment_kind(j.at("experiment").get<std::string>()));
  if (j.contains("model")) c.model = j["model"].get<std::string>();
  if (j.contains("methods")) c.methods = j["methods"].get<std::vector<std::string>>();
  if (j.contains("r_grid")) c.r_grid = j["r_grid"].get<std::vector<std::size_t>>();
  if (j.contains("links")) c.links = j["links"].get<std::vector<link_function>>();
  if (j.contains("n_values")) c.n_values = j["n_values"].get<std::vector<std::size_t>>();
  if (j.contains("reps")) c.reps = j["reps"].get<std::size_t>();
  if (j.contains("base_seed")) c.base_seed = j["base_seed"].get<std::uint64_t>();
  if (j.contains("output")) c.output = j["output"].get<std::string>();
  if (j.contains("reference")) c.reference = j["reference"].get<std::string>();
  if (j.contains("probe_z")) c.probe_z = j["probe_z"].get<std::size_t>();
  if (j.contains("probe_theta")) c.probe_theta = j["probe_theta"].get<std::size_t>();
  if (j.contains("probe_seed")) c.probe_seed = j["probe_seed"].get<std::uint64_t>();
  if (j.contains("true_theta")) c.true_theta = j["true_theta"].get<double>();
}

namespace detail {

inline void require_increasing(const std::vector<std::size_t>& xs, const char* what) {
  if (xs.empty()) throw invalid_configuration(std::string(what) + " is empty");
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (xs[i] <= xs[i - 1]) throw invalid_configuration(std::string(what) + " must be strictly increasing");
}

inline reference_spec parse_reference(const std::string& s) {
  if (s == "exact") return {reference_spec::kind::exact, 0};
  const auto spec = parse_rule_spec(s);
  if (spec.how != method::gh) throw invalid_configuration("reference must be exact or gh:R");
  return {reference_spec::kind::gauss_hermite, spec.r};
}

inline std::vector<method> parse_methods(const std::vector<std::string>& names) {
  if (names.empty()) throw invalid_configuration("methods list is empty");
  std::vector<method> out;
  for (const auto& s : names) out.push_back(parse_method(s));
  return out;
}

// Sub-seeds of a repetition: the data and the random rule must not share a
// stream, otherwise the first draws coincide.
inline std::uint64_t rep_seed(std::uint64_t base, std::size_t rep) { return base ^ rep; }
inline std::uint64_t data_seed(std::uint64_t s) { return mix64(s ^ 0x5EED0DA7A5EED0DAULL); }
inline std::uint64_t rule_seed(std::uint64_t s) { return mix64(s ^ 0x0123456789ABCDEFULL); }

inline std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Result tables. Every experiment writes results.csv (one row per repetition
// where that is meaningful) and aggregate.csv; the column layouts below are
// what the plotting scripts read.

struct table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw invalid_argument("cannot write " + path.string());
    for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
    out << '\n';
    for (const auto& row : rows) {
      for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
      out << '\n';
    }
  }
};

struct convergence_result {
  struct row {
    std::string method;
    std::size_t r;
    std::size_t rep;
    double abs_error;
  };
  struct aggregate_row {
    std::string method;
    std::size_t r;
    double max_abs_error;
    double rmse;
  };
  std::string model;
  std::vector<row> rows;
  std::vector<aggregate_row> aggregate;

  /// Aggregate series of one method, in r order.
  std::vector<aggregate_row> series(const std::string& m) const {
    std::vector<aggregate_row> out;
    for (const auto& a : aggregate)
      if (a.method == m) out.push_back(a);
    return out;
  }

  table results_table() const {
    table t{{"model", "method", "r", "rep", "abs_error"}, {}};
    for (const auto& r : rows)
      t.rows.push_back({model, r.method, std::to_string(r.r), std::to_string(r.rep), detail::fmt(r.abs_error)});
    return t;
  }
  table aggregate_table() const {
    table t{{"model", "method", "r", "max_abs_error", "rmse"}, {}};
    for (const auto& a : aggregate)
      t.rows.push_back({model, a.method, std::to_string(a.r), detail::fmt(a.max_abs_error), detail::fmt(a.rmse)});
    return t;
  }
};

/// Figure 1 and 2 studies: per repetition one fresh record z, the
/// likelihood at theta = 0 under each (method, r) against the reference.
template <likelihood_integrand M>
convergence_result run_convergence(const M& model, dgp generator, const experiment_config& cfg) {
  const auto methods = detail::parse_methods(cfg.methods);
  detail::require_increasing(cfg.r_grid, "r_grid");
  if (cfg.reps == 0) throw invalid_configuration("reps must be >= 1");
  const auto ref = detail::parse_reference(cfg.reference);
  if (model.dim_v() != 1) throw invalid_configuration("convergence studies are one-dimensional");

  const std::vector<double> theta(model.dim_theta(), 0.0);
  std::vector<double> true_theta(dgp_theta_size(generator), cfg.true_theta);

  // r grid per method; a Gauss-Hermite reference caps the Gauss-Hermite grid
  std::vector<std::vector<std::size_t>> grids;
  for (method m : methods) {
    std::vector<std::size_t> g;
    for (std::size_t r : cfg.r_grid)
      if (!(m == method::gh && ref.type == reference_spec::kind::gauss_hermite && r > ref.r)) g.push_back(r);
    if (g.empty()) throw invalid_configuration("r_grid leaves no sizes for " + to_string(m));
    grids.push_back(std::move(g));
  }

  std::optional<rule_nd> ref_rule;
  if (ref.type == reference_spec::kind::gauss_hermite) ref_rule.emplace(make_rule(method::gh, ref.r, 1));

  // fixed rules built once
  std::map<std::pair<int, std::size_t>, rule_nd> fixed;
  for (std::size_t mi = 0; mi < methods.size(); ++mi)
    if (!is_stochastic(methods[mi]))
      for (std::size_t r : grids[mi]) fixed.emplace(std::make_pair(static_cast<int>(methods[mi]), r), make_rule(methods[mi], r));

  convergence_result res;
  res.model = model.name();
  // errors[mi][ri][rep]
  std::vector<std::vector<std::vector<double>>> errors(methods.size());
  for (std::size_t mi = 0; mi < methods.size(); ++mi)
    errors[mi].assign(grids[mi].size(), std::vector<double>(cfg.reps));

  for (std::size_t rep = 0; rep < cfg.reps; ++rep) {
    const auto s = detail::rep_seed(cfg.base_seed, rep);
    const auto data = generate_dataset(generator, 1, detail::data_seed(s), true_theta);
    const auto z = data.record(0);
    double f_ref;
    if (ref_rule) {
      f_ref = apply(*ref_rule, [&](std::span<const double> v) { return model.value(v, z, theta); });
    } else {
      const auto e = model.exact(z, theta, {}, {});
      if (!e) throw invalid_configuration(model.name() + " has no closed form; use a gh reference");
      f_ref = *e;
    }
    for (std::size_t mi = 0; mi < methods.size(); ++mi)
      for (std::size_t ri = 0; ri < grids[mi].size(); ++ri) {
        const std::size_t r = grids[mi][ri];
        auto g = [&](std::span<const double> v) { return model.value(v, z, theta); };
        double f;
        if (is_stochastic(methods[mi])) {
          f = apply(make_rule(methods[mi], r, 1, detail::rule_seed(s)), g);
        } else {
          f = apply(fixed.at({static_cast<int>(methods[mi]), r}), g);
        }
        errors[mi][ri][rep] = std::abs(f - f_ref);
      }
  }

  for (std::size_t mi = 0; mi < methods.size(); ++mi)
    for (std::size_t ri = 0; ri < grids[mi].size(); ++ri) {
      double mx = 0.0, sq = 0.0;
      for (std::size_t rep = 0; rep < cfg.reps; ++rep) {
        const double e = errors[mi][ri][rep];
        res.rows.push_back({to_string(methods[mi]), grids[mi][ri], rep, e});
        mx = std::max(mx, e);
        sq += e * e;
      }
      res.aggregate.push_back({to_string(methods[mi]), grids[mi][ri], mx,
                               std::sqrt(sq / static_cast<double>(cfg.reps))});
    }
  return res;
}

inline convergence_result run_smooth_convergence(const experiment_config& cfg) {
  if (cfg.model != "rc_regression")
    throw invalid_configuration("smooth_convergence runs on rc_regression, got " + cfg.model);
  return run_convergence(rc_regression(), dgp::rc_regression, cfg);
}

inline convergence_result run_ars_convergence(const experiment_config& cfg) {
  if (cfg.model != "ars_normal_cdf" && cfg.model != "ars")
    throw invalid_configuration("ars_convergence runs on ars_normal_cdf, got " + cfg.model);
  if (cfg.reference != "exact") throw invalid_configuration("ars_convergence uses the exact reference");
  return run_convergence(ars_normal_cdf(), dgp::ars, cfg);
}

// ---------------------------------------------------------------------------

struct link_scaling_result {
  struct row {
    std::string link;
    std::string method;
    std::size_t n;
    std::size_t r;
    double error;
    double scaled_error;
  };
  std::string model;
  std::string probe_spec;
  std::string reference;
  std::vector<row> rows;

  std::vector<double> series(const std::string& link, const std::string& m) const {
    std::vector<double> out;
    for (const auto& r : rows)
      if (r.link == link && r.method == m) out.push_back(r.scaled_error);
    return out;
  }

  table aggregate_table() const {
    table t{{"link", "method", "n", "r", "scaled_error"}, {}};
    for (const auto& r : rows)
      t.rows.push_back({r.link, r.method, std::to_string(r.n), std::to_string(r.r), detail::fmt(r.scaled_error)});
    return t;
  }
  table results_table() const {
    table t{{"link", "method", "n", "r", "error", "scaled_error"}, {}};
    for (const auto& r : rows)
      t.rows.push_back({r.link, r.method, std::to_string(r.n), std::to_string(r.r), detail::fmt(r.error),
                        detail::fmt(r.scaled_error)});
    return t;
  }
};

/// Figure 3 study: sqrt(n) E(R(n)) with first-order errors on the default
/// probe grid, for every (link, method).
inline link_scaling_result run_link_scaling(const experiment_config& cfg) {
  if (cfg.model != "rc_regression")
    throw invalid_configuration("link_scaling runs on rc_regression, got " + cfg.model);
  const auto methods = detail::parse_methods(cfg.methods);
  detail::require_increasing(cfg.n_values, "n_values");
  if (cfg.links.empty()) throw invalid_configuration("links list is empty");
  if (cfg.reps == 0) throw invalid_configuration("reps must be >= 1");
  const auto ref = detail::parse_reference(cfg.reference);

  const rc_regression model;
  const std::vector<double> tt{cfg.true_theta};
  const auto probes = default_probes(dgp::rc_regression, model.theta_box(), cfg.probe_z,
                                     cfg.probe_theta, cfg.probe_seed, tt);
  link_scaling_result res;
  res.model = model.name();
  res.probe_spec = probes.description;
  res.reference = ref.describe();
  for (const auto& link : cfg.links) {
    const std::string label = link.label.empty() ? to_string(link.type) : link.label;
    for (method m : methods) {
      const auto s = scaled_error_series(model, m, link, cfg.n_values, probes, ref, cfg.reps,
                                         detail::rule_seed(cfg.base_seed));
      for (std::size_t i = 0; i < s.n_values.size(); ++i)
        res.rows.push_back({label, to_string(m), s.n_values[i], s.r_values[i], s.error[i], s.scaled[i]});
    }
  }
  return res;
}

// ---------------------------------------------------------------------------

struct rmse_result {
  struct row {
    std::size_t n;
    std::string method;
    std::size_t r;
    std::size_t rep;
    double theta_hat;
    bool converged;
    int iterations;
    std::size_t floor_activations;
  };
  struct aggregate_row {
    std::size_t n;
    std::string method;
    std::size_t r;
    double rmse;
    double floor;
    std::size_t non_converged;
  };
  std::vector<row> rows;
  std::vector<aggregate_row> aggregate;

  std::optional<aggregate_row> find(std::size_t n, const std::string& m, std::size_t r) const {
    for (const auto& a : aggregate)
      if (a.n == n && a.method == m && a.r == r) return a;
    return std::nullopt;
  }

  table results_table() const {
    table t{{"n", "method", "r", "rep", "theta_hat", "converged", "iterations", "floor_activations"}, {}};
    for (const auto& r : rows)
      t.rows.push_back({std::to_string(r.n), r.method, std::to_string(r.r), std::to_string(r.rep),
                        detail::fmt(r.theta_hat), r.converged ? "1" : "0", std::to_string(r.iterations),
                        std::to_string(r.floor_activations)});
    return t;
  }
  table aggregate_table() const {
    table t{{"method", "n", "r", "rmse", "floor", "non_converged"}, {}};
    for (const auto& a : aggregate)
      t.rows.push_back({a.method, std::to_string(a.n), std::to_string(a.r), detail::fmt(a.rmse),
                        detail::fmt(a.floor), std::to_string(a.non_converged)});
    return t;
  }
};

/// Figure 4 study: per repetition a fresh data set, one fit per (method, r)
/// and one fit with the reference rule, whose RMSE is the sampling floor.
/// Fits that fail to converge are excluded; more than 1% of them in any cell
/// aborts the run.
inline rmse_result run_rmse_fixed_n(const experiment_config& cfg) {
  if (cfg.model != "rc_regression")
    throw invalid_configuration("rmse_fixed_n runs on rc_regression, got " + cfg.model);
  const auto methods = detail::parse_methods(cfg.methods);
  detail::require_increasing(cfg.r_grid, "r_grid");
  detail::require_increasing(cfg.n_values, "n_values");
  if (cfg.reps == 0) throw invalid_configuration("reps must be >= 1");
  const auto ref = detail::parse_reference(cfg.reference);
  if (ref.type != reference_spec::kind::gauss_hermite)
    throw invalid_configuration("rmse_fixed_n needs a gh:R reference rule for the floor");

  const rc_regression model;
  const double theta0 = cfg.true_theta;
  const std::vector<double> start{theta0};
  const rule_nd floor_rule = make_rule(method::gh, ref.r, 1);
  std::map<std::pair<int, std::size_t>, rule_nd> fixed;
  for (method m : methods)
    if (!is_stochastic(m))
      for (std::size_t r : cfg.r_grid) fixed.emplace(std::make_pair(static_cast<int>(m), r), make_rule(m, r));

  rmse_result res;
  const std::string floor_label = "floor";
  for (std::size_t n : cfg.n_values) {
    // (method index or floor) x r -> sums
    struct cell {
      double sq = 0.0;
      std::size_t ok = 0, bad = 0;
    };
    std::map<std::pair<std::string, std::size_t>, cell> cells;
    for (std::size_t rep = 0; rep < cfg.reps; ++rep) {
      const auto s = detail::rep_seed(cfg.base_seed, rep);
      const std::vector<double> tt{theta0};
      const auto data = generate_dataset(dgp::rc_regression, n, detail::data_seed(s), tt);
      auto fit = [&](const rule_nd& rule, const std::string& label, std::size_t r) {
        const mal_problem prob(model, data, rule);
        const auto est = maximize(prob, start);
        const double th = est.theta_hat[0];
        res.rows.push_back({n, label, r, rep, th, est.converged, est.iterations, est.floor_activations});
        auto& c = cells[{label, r}];
        if (est.converged) {
          c.sq += (th - theta0) * (th - theta0);
          ++c.ok;
        } else {
          ++c.bad;
        }
      };
      fit(floor_rule, floor_label, ref.r);
      for (method m : methods)
        for (std::size_t r : cfg.r_grid) {
          if (is_stochastic(m))
            fit(make_rule(m, r, 1, detail::rule_seed(s)), to_string(m), r);
          else
            fit(fixed.at({static_cast<int>(m), r}), to_string(m), r);
        }
    }
    auto rmse_of = [&](const cell& c) {
      if (static_cast<double>(c.bad) > 0.01 * static_cast<double>(cfg.reps))
        throw experiment_failure("rmse_fixed_n: more than 1% of fits did not converge");
      return c.ok ? std::sqrt(c.sq / static_cast<double>(c.ok)) : std::nan("");
    };
    const auto& fc = cells.at({floor_label, ref.r});
    const double floor = rmse_of(fc);
    res.aggregate.push_back({n, floor_label, ref.r, floor, floor, fc.bad});
    for (method m : methods)
      for (std::size_t r : cfg.r_grid) {
        const auto& c = cells.at({to_string(m), r});
        res.aggregate.push_back({n, to_string(m), r, rmse_of(c), floor, c.bad});
      }
  }
  return res;
}

// ---------------------------------------------------------------------------

struct experiment_output {
  table results;
  table aggregate;
  nlohmann::json notes;
};

/// Runs the configured study and returns its tables.
inline experiment_output run_experiment(const experiment_config& cfg) {
  experiment_output out;
  switch (cfg.experiment) {
    case experiment_kind::smooth_convergence:
    case experiment_kind::ars_convergence: {
      const auto res = cfg.experiment == experiment_kind::smooth_convergence ? run_smooth_convergence(cfg)
                                                                             : run_ars_convergence(cfg);
      out.results = res.results_table();
      out.aggregate = res.aggregate_table();
      out.notes["theta"] = 0.0;
      break;
    }
    case experiment_kind::link_scaling: {
      const auto res = run_link_scaling(cfg);
      out.results = res.results_table();
      out.aggregate = res.aggregate_table();
      out.notes["probe_spec"] = res.probe_spec;
      out.notes["error_order"] = 1;
      break;
    }
    case experiment_kind::rmse_fixed_n: {
      const auto res = run_rmse_fixed_n(cfg);
      out.results = res.results_table();
      out.aggregate = res.aggregate_table();
      out.notes["optimizer"] = "projected Newton, tol 1e-8, start at the true theta";
      break;
    }
  }
  out.notes["reference"] = detail::parse_reference(cfg.reference).describe();
  out.notes["gl_transform"] = "Gauss-Legendre and midpoint rules on (0,1) mapped by the inverse normal CDF";
  out.notes["seeds"] = "repetition seed = base_seed xor rep; data and random rules use distinct sub-streams";
  return out;
}

/// Runs and writes results.csv, aggregate.csv and meta.json into `dir`.
inline experiment_output run_and_write(const experiment_config& cfg, const std::filesystem::path& dir) {
  const auto t0 = std::chrono::steady_clock::now();
  auto out = run_experiment(cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::filesystem::create_directories(dir);
  out.results.write(dir / "results.csv");
  out.aggregate.write(dir / "aggregate.csv");
  nlohmann::json meta = {{"config", cfg},
                         {"library_version", version_string},
                         {"wall_time_seconds", secs},
                         {"notes", out.notes}};
  std::ofstream(dir / "meta.json") << meta.dump(2) << '\n';
  return out;
}

}  // namespace male
