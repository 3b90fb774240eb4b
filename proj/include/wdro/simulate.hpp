#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

#include "wdro/error.hpp"
#include "wdro/matrix.hpp"
#include "wdro/rng.hpp"
#include "wdro/estimator.hpp"
#include "wdro/stein.hpp"

namespace wdro {

/// n independent rows drawn from N(0, sigma0).
inline Matrix gaussian_sample(const SymMatrix& sigma0, std::size_t n, RngStream& rng) {
  if (n == 0) throw std::invalid_argument("gaussian_sample: n must be >= 1");
  const std::size_t d = sigma0.dim();
  const Matrix l = cholesky_spd(sigma0);
  Matrix data(n, d);
  std::vector<double> g(d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < d; ++k) g[k] = rng.normal();
    for (std::size_t i = 0; i < d; ++i) {
      double v = 0.0;
      for (std::size_t k = 0; k <= i; ++k) v += l(i, k) * g[k];
      data(r, i) = v;
    }
  }
  return data;
}

/// Second-moment matrix (1/n) sum_r x_r x_r^T of known-zero-mean data; no
/// mean subtraction.
inline SymMatrix sample_cov(const Matrix& data) {
  const std::size_t n = data.rows();
  const std::size_t d = data.cols();
  SymMatrix s(d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < n; ++r) acc += data(r, i) * data(r, j);
      s.set(i, j, acc / static_cast<double>(n));
    }
  }
  return s;
}

namespace detail {

// Runs body(0..count-1) on up to `threads` workers pulling indices from a
// shared counter. Each index writes only its own outputs, so scheduling never
// affects results. The first exception wins and is rethrown on the caller.
template <typename F>
inline void parallel_for(std::size_t count, int threads, F&& body) {
  const std::size_t workers =
      std::min<std::size_t>(count, threads < 1 ? 1 : static_cast<std::size_t>(threads));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr err;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!err) err = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace detail

/// Averaged Stein loss rho |-> (1/T) sum_t L(X_t(rho), sigma0) over a frozen
/// set of T sample covariances, all drawn up front so every radius is scored
/// against the same randomness. Each trial t draws from stream.substream(t),
/// which makes the objective independent of construction order and thread
/// count.
///
/// Per trial only the eigenvalues lam_ti and the quadratic forms
/// w_ti = v_ti^T sigma0 v_ti are kept: the loss reduces to
///   sum_i [ -log x_i + x_i w_ti ] - log det sigma0 - d
/// with x_i the spectral weights at the probed radius.
class EmpiricalRhoObjective {
 public:
  EmpiricalRhoObjective(const SymMatrix& sigma0, std::size_t n, std::size_t trials,
                        const RngStream& stream, int threads = 1)
      : dim_(sigma0.dim()), trials_(trials), logdet_sigma0_(logdet_spd(sigma0)) {
    if (trials == 0) throw std::invalid_argument("EmpiricalRhoObjective: trials must be >= 1");
    if (n <= dim_) {
      throw std::invalid_argument("EmpiricalRhoObjective: need n > dim for a nonsingular sample covariance");
    }
    lam_.resize(trials);
    w_.resize(trials);
    detail::parallel_for(trials, threads, [&](std::size_t t) {
      RngStream st = stream.substream(t);
      const Matrix data = gaussian_sample(sigma0, n, st);
      const SymMatrix cov = sample_cov(data);
      const SpectralDecomp s = eig_sym(cov);
      if (s.eigenvalues.front() <= wdro::detail::spd_floor(frob_norm(cov))) {
        throw SolverError("EmpiricalRhoObjective: degenerate sample covariance draw");
      }
      lam_[t] = s.eigenvalues;
      std::vector<double> w(dim_);
      for (std::size_t i = 0; i < dim_; ++i) {
        double acc = 0.0;
        for (std::size_t a = 0; a < dim_; ++a) {
          for (std::size_t b = 0; b < dim_; ++b) {
            acc += s.eigenvectors(a, i) * sigma0(a, b) * s.eigenvectors(b, i);
          }
        }
        w[i] = acc;
      }
      w_[t] = std::move(w);
    });
  }

  /// Mean Stein loss at radius rho >= 0.
  double operator()(double rho) const {
    if (!(rho >= 0.0) || !std::isfinite(rho)) {
      throw std::invalid_argument("EmpiricalRhoObjective: rho must be nonnegative and finite");
    }
    double acc = 0.0;
    std::vector<double> x;
    for (std::size_t t = 0; t < trials_; ++t) {
      if (rho == 0.0) {
        x.resize(dim_);
        for (std::size_t i = 0; i < dim_; ++i) x[i] = 1.0 / lam_[t][i];
      } else {
        x = precision_weights(lam_[t], solve_gamma(lam_[t], rho).gamma);
      }
      double loss = 0.0;
      for (std::size_t i = 0; i < dim_; ++i) loss += -std::log(x[i]) + x[i] * w_[t][i];
      acc += loss;
    }
    return acc / static_cast<double>(trials_) - logdet_sigma0_ - static_cast<double>(dim_);
  }

  std::size_t trials() const { return trials_; }
  std::size_t dim() const { return dim_; }

 private:
  std::size_t dim_;
  std::size_t trials_;
  double logdet_sigma0_;
  std::vector<std::vector<double>> lam_;
  std::vector<std::vector<double>> w_;
};

/// Search window for the empirical radius. rho_max <= 0 requests the default
/// upper end 10 sqrt(lam_max(sigma0)).
struct RhoSearch {
  double rho_min = 1e-6;
  double rho_max = 0.0;
  double tolerance = 1e-4;
};

namespace detail {

inline double resolve_rho_max(const RhoSearch& search, const SymMatrix& sigma0) {
  if (search.rho_max > 0.0) return search.rho_max;
  return 10.0 * std::sqrt(eig_sym(sigma0).eigenvalues.back());
}

// Coarse log-spaced scan, then golden-section refinement of the bracket
// around the best scan point. Works on the log axis; the tolerance is the
// final bracket width there, i.e. a relative tolerance on rho. Returns the
// best probed point, so the result is never worse than any scan value.
template <typename F>
double minimize_log_axis(F&& f, double lo, double hi, double tolerance) {
  constexpr std::size_t kScan = 25;
  const double a0 = std::log(lo);
  const double b0 = std::log(hi);

  double best_t = a0;
  double best_f = std::numeric_limits<double>::infinity();
  std::size_t best_k = 0;
  for (std::size_t k = 0; k < kScan; ++k) {
    const double t = a0 + (b0 - a0) * static_cast<double>(k) / static_cast<double>(kScan - 1);
    const double v = f(std::exp(t));
    if (!std::isfinite(v)) throw SolverError("rho search: objective is not finite");
    if (v < best_f) {
      best_f = v;
      best_t = t;
      best_k = k;
    }
  }

  const double cell = (b0 - a0) / static_cast<double>(kScan - 1);
  double a = best_k == 0 ? a0 : best_t - cell;
  double b = best_k == kScan - 1 ? b0 : best_t + cell;

  constexpr double kInvPhi = 0.6180339887498949;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(std::exp(c));
  double fd = f(std::exp(d));
  const auto note = [&](double t, double v) {
    if (!std::isfinite(v)) throw SolverError("rho search: objective is not finite");
    if (v < best_f) {
      best_f = v;
      best_t = t;
    }
  };
  note(c, fc);
  note(d, fd);
  while (b - a > tolerance) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(std::exp(c));
      note(c, fc);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(std::exp(d));
      note(d, fd);
    }
  }
  return std::exp(best_t);
}

}  // namespace detail

/// Empirically optimal radius for sample size n: minimizes the averaged
/// Stein loss over `trials` frozen draws. Deterministic in (sigma0, n,
/// trials, stream key, search), for any thread count.
inline double empirical_opt_rho(const SymMatrix& sigma0, std::size_t n, std::size_t trials,
                                const RngStream& stream, const RhoSearch& search,
                                int threads = 1) {
  if (!(search.rho_min > 0.0)) {
    throw std::invalid_argument("empirical_opt_rho: rho_min must be positive");
  }
  const double rho_max = detail::resolve_rho_max(search, sigma0);
  if (!(rho_max > search.rho_min)) {
    throw std::invalid_argument("empirical_opt_rho: rho_max must exceed rho_min");
  }
  if (!(search.tolerance > 0.0)) {
    throw std::invalid_argument("empirical_opt_rho: tolerance must be positive");
  }
  const EmpiricalRhoObjective objective(sigma0, n, trials, stream, threads);
  return detail::minimize_log_axis([&objective](double rho) { return objective(rho); },
                                   search.rho_min, rho_max, search.tolerance);
}

/// Ordinary least squares on (log x, log y) with 95% confidence bands.
struct Regression {
  double slope = 0.0;
  double intercept = 0.0;
  std::pair<double, double> slope_ci95{0.0, 0.0};
  std::pair<double, double> intercept_ci95{0.0, 0.0};
  double r_squared = 0.0;
};

namespace detail {

// Regularized incomplete beta I_x(a, b) by the Lentz continued fraction.
inline double inc_beta_cf(double a, double b, double x) {
  const int max_it = 300;
  const double eps = 3e-16;
  const double fpmin = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_it; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

inline double inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                             a * std::log(x) + b * std::log(1.0 - x));
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * inc_beta_cf(a, b, x) / a;
  return 1.0 - bt * inc_beta_cf(b, a, 1.0 - x) / b;
}

inline double student_t_cdf(double t, double nu) {
  const double ib = inc_beta(0.5 * nu, 0.5, nu / (nu + t * t));
  return t >= 0.0 ? 1.0 - 0.5 * ib : 0.5 * ib;
}

// Upper-tail quantile by bisection; fine for the confidence-band use here.
inline double student_t_quantile(double p, double nu) {
  if (!(p > 0.0) || !(p < 1.0)) {
    throw std::invalid_argument("student_t_quantile: p must lie in (0, 1)");
  }
  if (p == 0.5) return 0.0;
  const bool upper = p > 0.5;
  const double target = upper ? p : 1.0 - p;
  double lo = 0.0;
  double hi = 1.0;
  while (student_t_cdf(hi, nu) < target) hi *= 2.0;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (student_t_cdf(mid, nu) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-12 * std::max(1.0, hi)) break;
  }
  const double q = 0.5 * (lo + hi);
  return upper ? q : -q;
}

}  // namespace detail

inline Regression ols_loglog(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t k = xs.size();
  if (ys.size() != k) throw std::invalid_argument("ols_loglog: xs and ys lengths differ");
  if (k < 3) throw std::invalid_argument("ols_loglog: need at least 3 points");
  std::vector<double> lx(k), ly(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) {
      throw std::invalid_argument("ols_loglog: all coordinates must be positive");
    }
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(k);
  my /= static_cast<double>(k);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (sxx <= 0.0) throw std::invalid_argument("ols_loglog: xs must not be all equal");

  Regression out;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;

  double sse = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double r = ly[i] - (out.intercept + out.slope * lx[i]);
    sse += r * r;
  }
  const double dof = static_cast<double>(k - 2);
  const double s2 = sse / dof;
  const double se_slope = std::sqrt(s2 / sxx);
  const double se_intercept = std::sqrt(s2 * (1.0 / static_cast<double>(k) + mx * mx / sxx));
  const double tq = detail::student_t_quantile(0.975, dof);
  out.slope_ci95 = {out.slope - tq * se_slope, out.slope + tq * se_slope};
  out.intercept_ci95 = {out.intercept - tq * se_intercept, out.intercept + tq * se_intercept};

  if (syy > 0.0) {
    out.r_squared = std::clamp(1.0 - sse / syy, 0.0, 1.0);
  } else {
    out.r_squared = sse <= 1e-28 ? 1.0 : 0.0;
  }
  return out;
}

struct ExperimentConfig {
  SymMatrix sigma0{1};
  std::vector<std::size_t> n_grid;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  RhoSearch search{};
};

struct ExperimentRow {
  std::size_t n = 0;
  double rho_hat = 0.0;
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;
  Regression regression;
};

///// One decay-rate experiment: for every n in the grid, the empirically
/// optimal radius at `trials` repetitions, then an OLS fit of log rho_hat
/// against log n. Trial randomness is keyed by (seed, n, trial), so rows do
/// not depend on grid order, scheduling, or thread count.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, int threads = 1) {
  const std::size_t d = cfg.sigma0.dim();
  if (cfg.n_grid.size() < 3) {
    throw std::invalid_argument("run_experiment: need at least 3 grid points");
  }
  for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
    if (cfg.n_grid[i] <= d) {
      throw std::invalid_argument("run_experiment: every n must exceed the dimension");
    }
    if (i > 0 && cfg.n_grid[i] <= cfg.n_grid[i - 1]) {
      throw std::invalid_argument("run_experiment: n grid must be strictly increasing");
    }
  }
  if (cfg.trials == 0) throw std::invalid_argument("run_experiment: trials must be >= 1");

  const RngStream root(cfg.seed);
  ExperimentResult out;
  out.rows.resize(cfg.n_grid.size());
  const int outer = cfg.n_grid.size() > 1 ? threads : 1;
  const int inner = cfg.n_grid.size() > 1 ? 1 : threads;
  detail::parallel_for(cfg.n_grid.size(), outer, [&](std::size_t idx) {
    const std::size_t n = cfg.n_grid[idx];
    const RngStream stream = root.substream(n);
    out.rows[idx] = {n, empirical_opt_rho(cfg.sigma0, n, cfg.trials, stream, cfg.search, inner)};
  });

  std::vector<double> xs(out.rows.size()), ys(out.rows.size());
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    xs[i] = static_cast<double>(out.rows[i].n);
    ys[i] = out.rows[i].rho_hat;
  }
  out.regression = ols_loglog(xs, ys);
  return out;
}

/// Random symmetric matrix with independent N(0,1) entries on and above the
/// diagonal.
inline SymMatrix random_symmetric(std::size_t dim, RngStream& rng) {
  SymMatrix s(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i; j < dim; ++j) s.set(i, j, rng.normal());
  }
  return s;
}

/// Random SPD matrix with a random eigenbasis and log-uniform eigenvalues in
/// [lam_min, lam_max].
inline SymMatrix random_spd(std::size_t dim, RngStream& rng, double lam_min, double lam_max) {
  if (!(lam_min > 0.0) || !(lam_max >= lam_min)) {
    throw std::invalid_argument("random_spd: need 0 < lam_min <= lam_max");
  }
  const SpectralDecomp basis = eig_sym(random_symmetric(dim, rng));
  std::vector<double> lam(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    lam[i] = std::exp(rng.uniform(std::log(lam_min), std::log(lam_max)));
  }
  return spectral_rebuild(basis.eigenvectors, lam);
}

}  // namespace wdro
