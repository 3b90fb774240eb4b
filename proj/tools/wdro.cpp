// wdro: Wasserstein-robust precision-matrix estimation toolkit.
//
// Subcommands:
//   estimate    fit the robust precision matrix to a data CSV
//   rho-star    closed-form critical radius of a target covariance
//   experiment  radius-decay experiment with CSV/JSON/SVG outputs
//   check       run the invariant suites at a given dimension
//
// Exit codes: 0 success, 1 internal/solver failure, 2 usage/validation.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wdro/wdro.hpp"

namespace {

using nlohmann::ordered_json;

int resolve_threads(int flag_value) {
  if (const char* env = std::getenv("WDRO_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v >= 1) return v;
    } catch (const std::exception&) {
    }
    throw std::invalid_argument("WDRO_THREADS must be a positive integer");
  }
  return flag_value;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument(path + ": cannot open file for writing");
  out << content;
}

std::vector<std::size_t> parse_n_grid(const std::string& text) {
  std::vector<std::size_t> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::size_t first = item.find_first_not_of(" \t");
    if (first == std::string::npos) throw std::invalid_argument("empty entry in --n-grid");
    const std::size_t last = item.find_last_not_of(" \t");
    item = item.substr(first, last - first + 1);
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &pos);
    } catch (const std::exception&) {
      throw std::invalid_argument("--n-grid entry '" + item + "' is not a positive integer");
    }
    if (pos != item.size() || v == 0) {
      throw std::invalid_argument("--n-grid entry '" + item + "' is not a positive integer");
    }
    grid.push_back(static_cast<std::size_t>(v));
  }
  if (grid.empty()) throw std::invalid_argument("--n-grid must list at least one n");
  return grid;
}

// key = value lines; '#' starts a comment, blank lines ignored.
std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument(path + ": cannot open config file");
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": expected key = value");
    }
    auto trim = [](std::string s) {
      const std::size_t a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      const std::size_t b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": expected key = value");
    }
    if (kv.count(key)) {
      throw std::invalid_argument(path + ": duplicate key '" + key + "'");
    }
    kv[key] = value;
  }
  return kv;
}

double parse_double(const std::string& value, const std::string& what) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument(what + ": '" + value + "' is not a number");
  }
  if (pos != value.size()) throw std::invalid_argument(what + ": '" + value + "' is not a number");
  return v;
}

std::uint64_t parse_u64(const std::string& value, const std::string& what) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument(what + ": '" + value + "' is not a nonnegative integer");
  }
  if (pos != value.size()) {
    throw std::invalid_argument(what + ": '" + value + "' is not a nonnegative integer");
  }
  return v;
}

struct EstimateArgs {
  std::string data;
  std::string out;
  double rho = -1.0;
  bool rho_given = false;
  bool auto_rule = false;
};

int cmd_estimate(const EstimateArgs& args) {
  if (args.rho_given == args.auto_rule) {
    std::cerr << "wdro estimate: exactly one of --rho or --auto-rule is required\n";
    return 2;
  }
  if (args.rho_given && args.rho < 0.0) {
    std::cerr << "wdro estimate: rho must be nonnegative\n";
    return 2;
  }
  const wdro::Matrix data = wdro::read_data_csv(args.data);
  const std::size_t n = data.rows(), d = data.cols();
  if (n <= d) {
    throw std::invalid_argument(args.data + ": need more rows than columns (n > d), got " +
                                std::to_string(n) + " x " + std::to_string(d));
  }
  const wdro::SymMatrix cov = wdro::sample_cov(data);
  const double rho = args.auto_rule ? wdro::rho_rule(cov, n) : args.rho;
  const wdro::PrecisionEstimate est = wdro::estimate_precision(cov, rho);

  const std::string mode = args.auto_rule ? "auto-rule" : "explicit";
  const double residual = est.gamma ? est.gamma->residual : 0.0;
  std::vector<std::string> comments = {
      std::string("wdro ") + wdro::kVersion,
      "command: estimate",
      "data: " + args.data,
      "n: " + std::to_string(n),
      "d: " + std::to_string(d),
      "rho-mode: " + mode,
      "rho: " + wdro::fmt17(rho),
  };
  if (est.gamma) {
    comments.push_back("gamma: " + wdro::fmt17(est.gamma->gamma));
    comments.push_back("residual: " + wdro::fmt17(residual));
  }
  wdro::write_matrix_csv(args.out, est.x, comments);

  ordered_json meta;
  meta["version"] = wdro::kVersion;
  meta["command"] = "estimate";
  meta["parameters"] = {{"data", args.data},
                        {"out", args.out},
                        {"rho_mode", mode},
                        {"rho_requested", args.rho_given ? ordered_json(args.rho) : ordered_json()}};
  meta["n"] = n;
  meta["d"] = d;
  meta["rho"] = rho;
  if (est.gamma) {
    meta["gamma"] = est.gamma->gamma;
    meta["residual"] = est.gamma->residual;
    meta["iterations"] = est.gamma->iterations;
  } else {
    meta["gamma"] = nullptr;
    meta["residual"] = nullptr;
  }
  write_text_file(args.out + ".json", meta.dump(2) + "\n");
  std::cout << "wrote " << args.out << " and " << args.out << ".json (rho " << wdro::fmt6(rho)
            << ")\n";
  return 0;
}

struct RhoStarArgs {
  std::string sigma0;
  std::uint64_t mc_check = 0;
  std::uint64_t seed = 1;
};

int cmd_rho_star(const RhoStarArgs& args) {
  const wdro::SymMatrix sigma0 = wdro::read_matrix_csv(args.sigma0);
  const wdro::RhoStarReport closed = wdro::rho_star(sigma0);

  ordered_json out;
  out["version"] = wdro::kVersion;
  out["command"] = "rho-star";
  out["parameters"] = {{"sigma0", args.sigma0},
                       {"mc_check", args.mc_check ? ordered_json(args.mc_check) : ordered_json()},
                       {"seed", args.seed}};
  out["d"] = sigma0.dim();
  out["rho_star"] = closed.rho_star;
  out["numerator"] = closed.numerator;
  out["denominator"] = closed.denominator;
  out["method"] = wdro::to_string(closed.method);
  if (args.mc_check > 0) {
    const wdro::RhoStarReport mc = wdro::rho_star_mc(sigma0, args.mc_check, args.seed);
    out["mc"] = {{"rho_star", mc.rho_star},
                 {"std_error", mc.mc_std_error.value()},
                 {"samples", args.mc_check}};
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

struct ExperimentArgs {
  std::string config;
  std::string sigma0;
  std::string n_grid;
  std::uint64_t trials = 0;
  bool trials_given = false;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string svg;
  std::string out_prefix = "experiment";
  int threads = 1;
};

int cmd_experiment(const ExperimentArgs& args) {
  wdro::ExperimentConfig cfg;
  std::string sigma0_path;
  std::string svg_path = args.svg;
  std::string out_prefix = args.out_prefix;

  if (!args.config.empty()) {
    if (!args.sigma0.empty() || !args.n_grid.empty() || args.trials_given || args.seed_given) {
      std::cerr << "wdro experiment: --config excludes --sigma0/--n-grid/--trials/--seed\n";
      return 2;
    }
    const auto kv = parse_config_file(args.config);
    for (const auto& [key, value] : kv) {
      if (key == "sigma0") {
        sigma0_path = value;
      } else if (key == "n_grid") {
        cfg.n_grid = parse_n_grid(value);
      } else if (key == "trials") {
        cfg.trials = static_cast<std::size_t>(parse_u64(value, "trials"));
      } else if (key == "seed") {
        cfg.seed = parse_u64(value, "seed");
      } else if (key == "rho_min") {
        cfg.search.rho_min = parse_double(value, "rho_min");
      } else if (key == "rho_max") {
        cfg.search.rho_max = parse_double(value, "rho_max");
      } else if (key == "tolerance") {
        cfg.search.tolerance = parse_double(value, "tolerance");
      } else if (key == "svg") {
        if (svg_path.empty()) svg_path = value;
      } else if (key == "out") {
        out_prefix = value;
      } else {
        throw std::invalid_argument(args.config + ": unknown key '" + key + "'");
      }
    }
    if (sigma0_path.empty()) throw std::invalid_argument(args.config + ": missing key 'sigma0'");
    if (cfg.n_grid.empty()) throw std::invalid_argument(args.config + ": missing key 'n_grid'");
    if (!kv.count("trials")) throw std::invalid_argument(args.config + ": missing key 'trials'");
    if (!kv.count("seed")) throw std::invalid_argument(args.config + ": missing key 'seed'");
  } else {
    if (args.sigma0.empty() || args.n_grid.empty() || !args.trials_given || !args.seed_given) {
      std::cerr << "wdro experiment: need --config, or all of --sigma0/--n-grid/--trials/--seed\n";
      return 2;
    }
    sigma0_path = args.sigma0;
    cfg.n_grid = parse_n_grid(args.n_grid);
    cfg.trials = static_cast<std::size_t>(args.trials);
    cfg.seed = args.seed;
  }

  cfg.sigma0 = wdro::read_matrix_csv(sigma0_path);
  const int threads = resolve_threads(args.threads);
  const wdro::ExperimentResult result = wdro::run_experiment(cfg, threads);

  std::string grid_echo;
  for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
    if (i) grid_echo += ",";
    grid_echo += std::to_string(cfg.n_grid[i]);
  }

  std::ostringstream csv;
  csv << "# wdro " << wdro::kVersion << "\n";
  csv << "# command: experiment\n";
  csv << "# sigma0: " << sigma0_path << "\n";
  csv << "# d: " << cfg.sigma0.dim() << "\n";
  csv << "# n_grid: " << grid_echo << "\n";
  csv << "# trials: " << cfg.trials << "\n";
  csv << "# seed: " << cfg.seed << "\n";
  csv << "# rho_min: " << wdro::fmt17(cfg.search.rho_min) << "\n";
  csv << "# rho_max: " << wdro::fmt17(cfg.search.rho_max) << "\n";
  csv << "# tolerance: " << wdro::fmt17(cfg.search.tolerance) << "\n";
  csv << "n,rho_hat\n";
  for (const wdro::ExperimentRow& row : result.rows) {
    csv << row.n << "," << wdro::fmt17(row.rho_hat) << "\n";
  }
  const std::string csv_path = out_prefix + ".csv";
  write_text_file(csv_path, csv.str());

  ordered_json meta;
  meta["version"] = wdro::kVersion;
  meta["command"] = "experiment";
  meta["parameters"] = {{"sigma0", sigma0_path},    {"d", cfg.sigma0.dim()},
                        {"n_grid", cfg.n_grid},     {"trials", cfg.trials},
                        {"seed", cfg.seed},         {"rho_min", cfg.search.rho_min},
                        {"rho_max", cfg.search.rho_max}, {"tolerance", cfg.search.tolerance}};
  meta["regression"] = {
      {"slope", result.regression.slope},
      {"intercept", result.regression.intercept},
      {"slope_ci95", {result.regression.slope_ci95.first, result.regression.slope_ci95.second}},
      {"intercept_ci95",
       {result.regression.intercept_ci95.first, result.regression.intercept_ci95.second}},
      {"r_squared", result.regression.r_squared}};
  const std::string json_path = out_prefix + ".json";
  write_text_file(json_path, meta.dump(2) + "\n");

  if (!svg_path.empty()) {
    write_text_file(svg_path, wdro::svg_experiment_plot(result));
  }

  std::cout << "wrote " << csv_path << " and " << json_path;
  if (!svg_path.empty()) std::cout << " and " << svg_path;
  std::cout << "\n";
  std::cout << "slope " << wdro::fmt6(result.regression.slope) << ", intercept "
            << wdro::fmt6(result.regression.intercept) << ", R^2 "
            << wdro::fmt6(result.regression.r_squared) << "\n";
  return 0;
}

int cmd_check(std::size_t dim, std::uint64_t seed) {
  const std::vector<wdro::CheckResult> results = wdro::run_checks(dim, seed);
  std::size_t passed = 0;
  for (const wdro::CheckResult& r : results) {
    std::cout << (r.pass ? "PASS" : "FAIL") << " " << r.name << " slack=" << wdro::fmt6(r.slack)
              << " -- " << r.detail << "\n";
    if (r.pass) ++passed;
  }
  std::cout << passed << "/" << results.size() << " checks passed (dim=" << dim
            << ", seed=" << seed << ")\n";
  return passed == results.size() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein-robust precision matrix estimation toolkit"};
  app.require_subcommand(1);

  EstimateArgs est;
  CLI::App* estimate = app.add_subcommand("estimate", "Fit the robust precision matrix to data");
  estimate->add_option("--data", est.data, "Input data CSV (n rows x d columns, no header)")
      ->required();
  estimate->add_option("--out", est.out, "Output precision matrix CSV")->required();
  CLI::Option* rho_opt = estimate->add_option("--rho", est.rho, "Ambiguity radius (>= 0)");
  estimate->add_flag("--auto-rule", est.auto_rule,
                     "Choose the radius by the plug-in decay rule rho_star/n");

  RhoStarArgs rs;
  CLI::App* rho_star_cmd =
      app.add_subcommand("rho-star", "Critical radius of a target covariance");
  rho_star_cmd->add_option("--sigma0", rs.sigma0, "Covariance matrix CSV (d lines of d values)")
      ->required();
  rho_star_cmd->add_option("--mc-check", rs.mc_check,
                           "Also run a Monte Carlo estimate with this many samples");
  rho_star_cmd->add_option("--seed", rs.seed, "Seed for the Monte Carlo check");

  ExperimentArgs ex;
  CLI::App* experiment = app.add_subcommand("experiment", "Radius decay experiment");
  experiment->add_option("--config", ex.config, "Config file with key = value lines");
  experiment->add_option("--sigma0", ex.sigma0, "Target covariance CSV");
  experiment->add_option("--n-grid", ex.n_grid, "Comma-separated sample sizes");
  CLI::Option* trials_opt = experiment->add_option("--trials", ex.trials, "Trials per grid point");
  CLI::Option* seed_opt = experiment->add_option("--seed", ex.seed, "Root seed");
  experiment->add_option("--svg", ex.svg, "Also write a log-log scatter SVG here");
  experiment->add_option("--out", ex.out_prefix, "Output prefix for .csv/.json")
      ->capture_default_str();
  experiment->add_option("--threads", ex.threads, "Worker threads (WDRO_THREADS overrides)");

  std::size_t check_dim = 0;
  std::uint64_t check_seed = 7;
  CLI::App* check = app.add_subcommand("check", "Run the invariant suites");
  check->add_option("--dim", check_dim, "Dimension in [1, 10]")->required();
  check->add_option("--seed", check_seed, "Seed for the randomized suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (estimate->parsed()) {
      est.rho_given = rho_opt->count() > 0;
      return cmd_estimate(est);
    }
    if (rho_star_cmd->parsed()) return cmd_rho_star(rs);
    if (experiment->parsed()) {
      ex.trials_given = trials_opt->count() > 0;
      ex.seed_given = seed_opt->count() > 0;
      return cmd_experiment(ex);
    }
    if (check->parsed()) return cmd_check(check_dim, check_seed);
  } catch (const wdro::NotSpdError& e) {
    std::cerr << "wdro: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "wdro: " << e.what() << "\n";
    return 2;
  } catch (const wdro::SolverError& e) {
    std::cerr << "wdro: solver failure: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "wdro: internal error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
