// Command-line front end: quadrature rules, data simulation, estimation and
// the convergence / experiment drivers.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "male/male.hpp"

namespace {

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (cell.empty()) continue;
    std::size_t used = 0;
    const double x = std::stod(cell, &used);
    if (used != cell.size()) throw male::invalid_argument("not a number: " + cell);
    out.push_back(x);
  }
  return out;
}

void print_rule(const male::rule_nd& rule) {
  std::cout << "index";
  for (std::size_t k = 0; k < rule.d(); ++k) std::cout << ",node_" << k + 1;
  std::cout << ",weight\n" << std::setprecision(17);
  for (std::size_t j = 0; j < rule.r(); ++j) {
    std::cout << j;
    for (double x : rule.point(j)) std::cout << ',' << x;
    std::cout << ',' << rule.weights()[j] << '\n';
  }
}

male::rule_nd rule_from_1d(const male::rule_1d& r) {
  return male::rule_nd(1, {r.nodes().begin(), r.nodes().end()}, {r.weights().begin(), r.weights().end()},
                       male::construction::product);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maximum approximated likelihood toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", male::version_string);

  // quad ---------------------------------------------------------------
  auto* quad = app.add_subcommand("quad", "Print a quadrature rule as CSV");
  std::string family;
  std::size_t r = 1, d = 1, level = 1;
  std::uint64_t seed = 0, skip = 1;
  double lo = 0.0, hi = 1.0;
  bool gaussian = false;
  quad->add_option("--family", family, "hermite|legendre|midpoint|mc|halton|mlhs|sparse")
      ->required()
      ->check(CLI::IsMember({"hermite", "legendre", "midpoint", "mc", "halton", "mlhs", "sparse"}));
  quad->add_option("--r", r, "Number of points");
  quad->add_option("--d", d, "Dimension");
  quad->add_option("--seed", seed, "Seed for mc and mlhs");
  quad->add_option("--skip", skip, "First Halton index");
  quad->add_option("--level", level, "Smolyak level");
  auto* lo_opt = quad->add_option("--a", lo, "Left end for legendre/midpoint");
  auto* hi_opt = quad->add_option("--b", hi, "Right end for legendre/midpoint");
  quad->add_flag("--gaussian", gaussian,
                 "Map legendre/midpoint from (0,1) to the Gaussian weight by the inverse normal CDF");

  // simulate -----------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "Write a synthetic data set (CSV + sidecar JSON)");
  std::string dgp_name, out_path, theta_text;
  std::size_t n = 100, periods = 3;
  sim->add_option("--dgp", dgp_name, "rc_regression|mixed_logit_1d|butler_moffitt|ars")->required();
  sim->add_option("--n", n, "Number of records");
  sim->add_option("--seed", seed, "Seed");
  sim->add_option("--theta", theta_text, "True parameter, comma separated");
  sim->add_option("--periods", periods, "Panel length for butler_moffitt");
  sim->add_option("--out", out_path, "Output CSV")->required();

  // estimate -----------------------------------------------------------
  auto* est = app.add_subcommand("estimate", "Maximize the approximated log-likelihood");
  std::string model_name, data_path, rule_text = "gh:32", theta0_text;
  double tol = 1e-8;
  int max_iter = 200;
  std::size_t model_dim = 0;
  est->add_option("--model", model_name,
                  "rc_regression|mixed_logit_1d|rc_logit_mv|butler_moffitt")->required();
  est->add_option("--data", data_path, "Data CSV")->required()->check(CLI::ExistingFile);
  est->add_option("--rule", rule_text, "Rule spec method:r[:seed], e.g. gh:32 or mc:1000:7");
  est->add_option("--theta0", theta0_text, "Starting value, comma separated");
  est->add_option("--tol", tol, "Score tolerance (sup norm)");
  est->add_option("--max-iter", max_iter, "Iteration cap");
  est->add_option("--dim", model_dim, "Dimension for rc_logit_mv / periods for butler_moffitt (default: from data)");

  // convergence --------------------------------------------------------
  auto* conv = app.add_subcommand("convergence", "Per-repetition integration errors against the reference");
  std::string methods_text = "mc,halton,gh", r_text = "16,32,64,128,256,512,1024,2048,4096,8192,16384";
  std::size_t reps = 500;
  std::string conv_model = "rc_regression";
  conv->add_option("--model", conv_model, "rc_regression|ars_normal_cdf");
  conv->add_option("--methods", methods_text, "Comma separated: mc,halton,mlhs,gh,gl,midpoint");
  conv->add_option("--r", r_text, "Comma separated r grid");
  conv->add_option("--reps", reps, "Repetitions");
  conv->add_option("--seed", seed, "Base seed");
  conv->add_option("--out", out_path, "Per-repetition CSV; aggregates go next to it")->required();

  // experiment ---------------------------------------------------------
  auto* exp = app.add_subcommand("experiment", "Run a study from a JSON config");
  std::string config_path, out_dir;
  std::size_t reps_override = 0;
  std::uint64_t seed_override = 0;
  exp->add_option("--config", config_path, "Config JSON")->required()->check(CLI::ExistingFile);
  auto* reps_opt = exp->add_option("--reps", reps_override, "Override the repetition count");
  auto* seed_opt = exp->add_option("--seed", seed_override, "Override the base seed");
  exp->add_option("--out", out_dir, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*quad) {
      male::rule_nd rule = [&]() -> male::rule_nd {
        if (family == "hermite") return male::product_rule(male::gauss_hermite(r), d);
        if (family == "mc") return male::monte_carlo_gaussian(r, d, seed);
        if (family == "halton") return male::halton(r, d, skip);
        if (family == "mlhs") return male::mlhs(r, d, seed);
        if (family == "sparse") return male::smolyak({d, level, male::sparse_family::gauss_hermite});
        // legendre / midpoint
        if (gaussian) {
          const auto unit = family == "legendre" ? male::gauss_legendre(r, 0.0, 1.0) : male::midpoint(r, 0.0, 1.0);
          return male::product_rule(male::to_gaussian(unit), d);
        }
        if (d != 1) throw male::invalid_argument("legendre/midpoint on an interval are one-dimensional; use --gaussian");
        if (family == "legendre" && !*lo_opt && !*hi_opt) {
          lo = -1.0;
          hi = 1.0;
        }
        return rule_from_1d(family == "legendre" ? male::gauss_legendre(r, lo, hi) : male::midpoint(r, lo, hi));
      }();
      print_rule(rule);
    } else if (*sim) {
      const auto g = male::parse_dgp(dgp_name);
      auto theta = parse_doubles(theta_text);
      if (theta.empty()) theta.assign(male::dgp_theta_size(g), 0.0);
      const auto data = male::generate_dataset(g, n, seed, theta, periods);
      male::write_dataset(data, out_path);
      std::cout << "wrote " << data.n() << " records to " << out_path << '\n';
    } else if (*est) {
      const auto data = male::read_dataset(data_path);
      const std::size_t dim = model_dim ? model_dim : data.dim_z();
      const auto model = male::make_integrand(model_name, dim);
      const auto spec = male::parse_rule_spec(rule_text);
      const auto rule = male::make_rule(spec.how, spec.r, model.dim_v(), spec.seed);
      const male::mal_problem prob(model, data, rule);
      auto theta0 = parse_doubles(theta0_text);
      const auto& box = model.theta_box();
      if (theta0.empty()) {
        // zero where the box allows it, one for scale-like coordinates
        for (std::size_t k = 0; k < box.size(); ++k)
          theta0.push_back(std::clamp(box.lower[k] > 0.0 ? 1.0 : 0.0, box.lower[k], box.upper[k]));
      }
      male::maximize_options opts;
      opts.tol = tol;
      opts.max_iter = max_iter;
      const auto fit = male::maximize(prob, theta0, opts);
      nlohmann::json j = {
          {"model", model.name()},
          {"n", data.n()},
          {"theta_hat", std::vector<double>(fit.theta_hat.data(), fit.theta_hat.data() + fit.theta_hat.size())},
          {"std_errors", std::vector<double>(fit.std_errors.data(), fit.std_errors.data() + fit.std_errors.size())},
          {"loglik", fit.loglik},
          {"score_norm", fit.score_norm},
          {"iterations", fit.iterations},
          {"converged", fit.converged},
          {"floor_activations", fit.floor_activations},
          {"rule_spec", spec.str()},
          {"seed", spec.seed}};
      std::cout << std::setprecision(17) << j.dump(2) << '\n';
      return fit.converged ? 0 : 3;
    } else if (*conv) {
      auto cfg = male::default_config(conv_model == "rc_regression" ? male::experiment_kind::smooth_convergence
                                                                    : male::experiment_kind::ars_convergence);
      cfg.model = conv_model;
      cfg.methods.clear();
      {
        std::stringstream ss(methods_text);
        std::string m;
        while (std::getline(ss, m, ',')) cfg.methods.push_back(m);
      }
      cfg.r_grid.clear();
      for (double x : parse_doubles(r_text)) cfg.r_grid.push_back(static_cast<std::size_t>(x));
      cfg.reps = reps;
      cfg.base_seed = seed;
      const auto res = cfg.experiment == male::experiment_kind::smooth_convergence
                           ? male::run_smooth_convergence(cfg)
                           : male::run_ars_convergence(cfg);
      std::filesystem::path out(out_path);
      res.results_table().write(out);
      auto agg = out;
      agg.replace_extension(".aggregate.csv");
      res.aggregate_table().write(agg);
      std::cout << "wrote " << res.rows.size() << " rows to " << out.string() << " and "
                << res.aggregate.size() << " aggregate rows to " << agg.string() << '\n';
    } else if (*exp) {
      std::ifstream in(config_path);
      auto cfg = nlohmann::json::parse(in).get<male::experiment_config>();
      if (*reps_opt) cfg.reps = reps_override;
      if (*seed_opt) cfg.base_seed = seed_override;
      cfg.output = out_dir;
      const auto out = male::run_and_write(cfg, out_dir);
      std::cout << "wrote " << out.results.rows.size() << " result rows and " << out.aggregate.rows.size()
                << " aggregate rows to " << out_dir << '\n';
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
