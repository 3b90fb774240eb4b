// Acceptance gate: one pass/fail line per criterion, exit 0 iff all pass.
//
// Criteria 1-7 exercise the library directly; 8 and 9 drive the installed
// CLI binary (path injected as WDRO_CLI_PATH at compile time).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <thread>
#include <vector>

#include "wdro/wdro.hpp"

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

std::vector<Outcome> g_outcomes;

void run_criterion(const std::string& name, double budget_seconds,
                   const std::function<std::pair<bool, std::string>()>& body) {
  Outcome out;
  out.name = name;
  const auto start = Clock::now();
  try {
    const auto [pass, detail] = body();
    out.pass = pass;
    out.detail = detail;
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail = std::string("exception: ") + e.what();
  }
  out.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  if (budget_seconds > 0.0 && out.seconds > budget_seconds) {
    out.pass = false;
    out.detail += " [over time budget " + wdro::fmt6(budget_seconds) + " s]";
  }
  g_outcomes.push_back(out);
  std::cout << (out.pass ? "PASS" : "FAIL") << " [" << g_outcomes.size() << "/9] " << out.name
            << " (" << out.detail << "; " << wdro::fmt6(out.seconds) << " s)" << std::endl;
}

// ---------------------------------------------------------------- criterion 1

std::pair<bool, std::string> gamma_solver_cases() {
  struct Case {
    std::vector<double> lam;
    double rho;
    double gamma;
  };
  const std::vector<Case> cases = {
      {{1.0}, 0.5, 4.0 / 3.0}, {{1.0}, 1.0, 0.5}, {{4.0}, 1.0, 1.0 / 3.0}};
  double worst_case_err = 0.0;
  for (const Case& c : cases) {
    worst_case_err = std::max(worst_case_err, std::abs(wdro::solve_gamma(c.lam, c.rho).gamma - c.gamma));
  }
  if (worst_case_err > 1e-9) {
    return {false, "exact-case error " + wdro::fmt6(worst_case_err) + " > 1e-9"};
  }

  wdro::RngStream rng(2024);
  double worst_residual = 0.0;
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t d = 1 + static_cast<std::size_t>(rng.uniform(0.0, 10.0));
    std::vector<double> lam(std::min<std::size_t>(d, 10));
    for (double& v : lam) v = std::exp(rng.uniform(std::log(0.1), std::log(10.0)));
    const double rho = std::exp(rng.uniform(std::log(1e-4), std::log(2.0)));
    worst_residual = std::max(worst_residual, std::abs(wdro::solve_gamma(lam, rho).residual));
  }
  if (worst_residual > 1e-10) {
    return {false, "max residual " + wdro::fmt6(worst_residual) + " > 1e-10 on 500 instances"};
  }
  return {true, "exact roots within " + wdro::fmt6(worst_case_err) + ", max residual " +
                    wdro::fmt6(worst_residual)};
}

// ---------------------------------------------------------------- criterion 2

std::pair<bool, std::string> stein_loss_checks() {
  wdro::RngStream rng(77);
  double worst_floor = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const wdro::SymMatrix sigma0 = wdro::random_spd(2 + rep % 5, rng, 0.3, 3.0);
    worst_floor = std::max(worst_floor,
                           std::abs(wdro::stein_loss(wdro::spd_inverse(sigma0), sigma0)));
  }
  if (worst_floor > 1e-12) {
    return {false, "loss at the minimizer " + wdro::fmt6(worst_floor) + " > 1e-12"};
  }

  double worst_rel = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t d = 1 + rep % 5;
    const wdro::SymMatrix x = wdro::random_spd(d, rng, 0.3, 3.0);
    const wdro::SymMatrix sigma0 = wdro::random_spd(d, rng, 0.3, 3.0);
    const wdro::SymMatrix grad = wdro::stein_gradient(x, sigma0);
    wdro::SymMatrix dir = wdro::random_symmetric(d, rng);
    dir = (1.0 / frob_norm(dir)) * dir;
    const double h = 1e-6;
    const double fd = (wdro::stein_loss(x + h * dir, sigma0) - wdro::stein_loss(x + (-h) * dir, sigma0)) /
                      (2.0 * h);
    const double exact = wdro::frob_inner(grad, dir);
    worst_rel = std::max(worst_rel,
                         std::abs(fd - exact) / std::max(1e-3, frob_norm(grad)));
  }
  if (worst_rel > 1e-5) {
    return {false, "gradient FD relative error " + wdro::fmt6(worst_rel) + " > 1e-5"};
  }
  return {true, "minimizer floor " + wdro::fmt6(worst_floor) + ", max FD relative error " +
                    wdro::fmt6(worst_rel)};
}

// ---------------------------------------------------------------- criterion 3

std::pair<bool, std::string> rho_star_checks() {
  wdro::RngStream rng(303);
  double worst_scalar = 0.0;
  for (double var : {10.0, 4.0, 0.7, 2.3}) {
    wdro::SymMatrix s(1);
    s.set(0, 0, var);
    worst_scalar = std::max(worst_scalar,
                            std::abs(wdro::rho_star(s).rho_star - 1.5 * std::sqrt(var)));
  }
  if (worst_scalar > 1e-10) {
    return {false, "scalar closed form off by " + wdro::fmt6(worst_scalar)};
  }

  // Identity target: at d = 1 the constant is (2d^2+d)/(2 sqrt d) = 1.5; for
  // d >= 2 the second-moment contract gives (2d^2+2d-1)/(2 sqrt d).
  double worst_identity = 0.0;
  {
    wdro::SymMatrix one(1);
    one.set(0, 0, 1.0);
    worst_identity = std::abs(wdro::rho_star(one).rho_star - 1.5);
    for (std::size_t d = 2; d <= 3; ++d) {
      const double dd = static_cast<double>(d);
      const double want = (2.0 * dd * dd + 2.0 * dd - 1.0) / (2.0 * std::sqrt(dd));
      worst_identity = std::max(
          worst_identity, std::abs(wdro::rho_star(wdro::SymMatrix::identity(d)).rho_star - want));
    }
  }
  if (worst_identity > 1e-10) {
    return {false, "identity-target constant off by " + wdro::fmt6(worst_identity)};
  }

  double worst_sigmas = 0.0;
  for (std::size_t d = 1; d <= 3; ++d) {
    const wdro::SymMatrix sigma0 = wdro::random_spd(d, rng, 0.5, 2.0);
    const wdro::RhoStarReport closed = wdro::rho_star(sigma0);
    const wdro::RhoStarReport mc = wdro::rho_star_mc(sigma0, 1000000, 900 + d);
    worst_sigmas = std::max(
        worst_sigmas, std::abs(closed.rho_star - mc.rho_star) / mc.mc_std_error.value());
  }
  if (worst_sigmas > 3.0) {
    return {false, "closed form vs 1e6-sample MC at " + wdro::fmt6(worst_sigmas) + " SE"};
  }
  return {true, "scalar/identity constants within " +
                    wdro::fmt6(std::max(worst_scalar, worst_identity)) + ", MC gap " +
                    wdro::fmt6(worst_sigmas) + " SE"};
}

// ------------------------------------------------------- criteria 4, 5, and 7

wdro::ExperimentResult g_univariate_result;

std::pair<bool, std::string> univariate_experiment() {
  wdro::ExperimentConfig cfg;
  cfg.sigma0 = wdro::SymMatrix(1);
  cfg.sigma0.set(0, 0, 10.0);
  cfg.n_grid = {10, 18, 32, 56, 100, 178, 316, 562, 1000};
  cfg.trials = 500;
  cfg.seed = 5;
  const unsigned hw = std::thread::hardware_concurrency();
  g_univariate_result = wdro::run_experiment(cfg, hw ? static_cast<int>(hw) : 2);
  const wdro::Regression& reg = g_univariate_result.regression;

  std::ostringstream detail;
  detail << "slope " << wdro::fmt6(reg.slope) << ", intercept " << wdro::fmt6(reg.intercept)
         << ", R^2 " << wdro::fmt6(reg.r_squared);
  bool pass = reg.slope >= -1.15 && reg.slope <= -0.85 &&
              std::abs(reg.intercept - 1.5568) <= 0.35 && reg.r_squared >= 0.90;

  // Second run at the desk-config seed: the slope band must hold there too.
  cfg.seed = 42;
  const double slope42 = wdro::run_experiment(cfg, hw ? static_cast<int>(hw) : 2).regression.slope;
  detail << "; desk-seed slope " << wdro::fmt6(slope42);
  pass = pass && slope42 >= -1.15 && slope42 <= -0.85;
  return {pass, detail.str()};
}

std::pair<bool, std::string> multivariate_experiment() {
  const std::size_t d = 3;
  wdro::SymMatrix sigma0(d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      sigma0.set(i, j, 10.0 * std::pow(0.5, static_cast<double>(j - i)));
    }
  }
  wdro::ExperimentConfig cfg;
  cfg.sigma0 = sigma0;
  cfg.n_grid = {20, 33, 54, 89, 147, 243, 400};
  cfg.trials = 50;
  cfg.seed = 42;
  const unsigned hw = std::thread::hardware_concurrency();
  const wdro::Regression reg = wdro::run_experiment(cfg, hw ? static_cast<int>(hw) : 2).regression;
  const bool pass = reg.slope >= -1.25 && reg.slope <= -0.75;
  return {pass, "slope " + wdro::fmt6(reg.slope) + ", R^2 " + wdro::fmt6(reg.r_squared)};
}

std::pair<bool, std::string> scaling_evidence() {
  const auto& rows = g_univariate_result.rows;
  if (rows.size() < 3) return {false, "univariate run unavailable"};
  bool sqrt_decreasing = true;
  std::vector<double> n_scaled;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double n = static_cast<double>(rows[i].n);
    n_scaled.push_back(n * rows[i].rho_hat);
    if (i > 0) {
      sqrt_decreasing = sqrt_decreasing &&
                        std::sqrt(n) * rows[i].rho_hat <
                            std::sqrt(static_cast<double>(rows[i - 1].n)) * rows[i - 1].rho_hat;
    }
  }
  std::vector<double> sorted = n_scaled;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[sorted.size() / 2];
  double worst_factor = 1.0;
  for (double v : n_scaled) {
    worst_factor = std::max(worst_factor, std::max(v / median, median / v));
  }
  const bool pass = sqrt_decreasing && worst_factor <= 2.5;
  return {pass, std::string("sqrt(n) scaling ") + (sqrt_decreasing ? "decreasing" : "NOT decreasing") +
                    ", n-scaling spread factor " + wdro::fmt6(worst_factor)};
}

// ---------------------------------------------------------------- criterion 6

std::pair<bool, std::string> taylor_sandwich_batch() {
  wdro::RngStream rng(606);
  double min_slack = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t d = 1 + rep % 5;
    const wdro::SymMatrix truth = wdro::random_spd(d, rng, 0.5, 2.0);
    const wdro::SymMatrix sigma_hat =
        wdro::sample_cov(wdro::gaussian_sample(truth, 5 * d, rng));
    for (double rho : {1e-3, 1e-2, 1e-1}) {
      const wdro::TaylorDiagnostics diag = wdro::taylor_diagnostics(sigma_hat, rho);
      if (!diag.sandwich_ok.first || !diag.sandwich_ok.second) {
        return {false, "sandwich violated at d=" + std::to_string(d) + ", rho=" + wdro::fmt6(rho)};
      }
      min_slack = std::min({min_slack, diag.derivative_slack, diag.inverse_slack});
    }
  }
  return {true, "all 50x3 sandwiches hold, min slack " + wdro::fmt6(min_slack)};
}

// ------------------------------------------------------------- criteria 8, 9

std::string shell_quote(const std::string& s) { return "'" + s + "'"; }

int run_cli(const std::string& args, const std::string& log_path) {
  const std::string cmd = shell_quote(WDRO_CLI_PATH) + " " + args + " > " +
                          shell_quote(log_path) + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (status < 0) return -1;
  return WEXITSTATUS(status);
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::pair<bool, std::string> cli_check_suites() {
  const auto dir = std::filesystem::temp_directory_path();
  for (int dim : {1, 3, 5}) {
    const std::string log = (dir / ("wdro_acc_check_" + std::to_string(dim) + ".log")).string();
    const int code = run_cli("check --dim " + std::to_string(dim) + " --seed 7", log);
    if (code != 0) {
      return {false, "check --dim " + std::to_string(dim) + " exited " + std::to_string(code) +
                         ", log at " + log};
    }
  }
  return {true, "check --dim 1/3/5 all exited 0"};
}

std::pair<bool, std::string> cli_determinism() {
  const auto dir = std::filesystem::temp_directory_path();
  const auto sigma_path = dir / "wdro_acc_sigma0.csv";
  {
    std::ofstream out(sigma_path);
    out << "10\n";
  }
  const std::string common = "experiment --sigma0 " + shell_quote(sigma_path.string()) +
                             " --n-grid 10,18,32,56,100 --trials 40 --seed 7";
  struct Run {
    std::string prefix;
    std::string extra;
  };
  const std::vector<Run> runs = {{(dir / "wdro_acc_run_a").string(), " --threads 1"},
                                 {(dir / "wdro_acc_run_b").string(), " --threads 1"},
                                 {(dir / "wdro_acc_run_c").string(), " --threads 3"}};
  for (const Run& r : runs) {
    const int code = run_cli(common + " --out " + shell_quote(r.prefix) + r.extra,
                             r.prefix + ".log");
    if (code != 0) return {false, "experiment exited " + std::to_string(code)};
  }
  const std::string csv_a = slurp(runs[0].prefix + ".csv");
  const std::string json_a = slurp(runs[0].prefix + ".json");
  if (csv_a.empty() || json_a.empty()) return {false, "experiment outputs missing or empty"};
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (slurp(runs[i].prefix + ".csv") != csv_a) {
      return {false, "CSV differs between run 1 and run " + std::to_string(i + 1)};
    }
    if (slurp(runs[i].prefix + ".json") != json_a) {
      return {false, "JSON differs between run 1 and run " + std::to_string(i + 1)};
    }
  }
  return {true, "CSV and JSON byte-identical across 2 repeat runs and --threads 1 vs 3"};
}

}  // namespace

int main() {
  run_criterion("gamma solver exact roots and random residuals", 1.0, gamma_solver_cases);
  run_criterion("stein loss floor and gradient finite differences", 5.0, stein_loss_checks);
  run_criterion("critical radius closed form vs oracle", 60.0, rho_star_checks);
  run_criterion("univariate decay experiment regression", 300.0, univariate_experiment);
  run_criterion("ar covariance decay experiment trend", 600.0, multivariate_experiment);
  run_criterion("taylor remainder sandwich batch", 30.0, taylor_sandwich_batch);
  run_criterion("scaling rate evidence from the univariate run", 0.0, scaling_evidence);
  run_criterion("cli invariant suites at dims 1,3,5", 120.0, cli_check_suites);
  run_criterion("cli experiment byte determinism", 0.0, cli_determinism);

  std::size_t passed = 0;
  for (const Outcome& o : g_outcomes) {
    if (o.pass) ++passed;
  }
  std::cout << passed << "/" << g_outcomes.size() << " acceptance criteria passed" << std::endl;
  return passed == g_outcomes.size() ? 0 : 1;
}
