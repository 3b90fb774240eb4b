#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "wdro/asymptotics.hpp"
#include "wdro/estimator.hpp"
#include "wdro/io.hpp"
#include "wdro/matrix.hpp"
#include "wdro/rng.hpp"
#include "wdro/simulate.hpp"
#include "wdro/stein.hpp"

namespace wdro {

/// One named diagnostic. Every check is normalized so that pass == (slack >= 0):
/// slack is the smallest margin left against the check's tolerance.
struct CheckResult {
  std::string name;
  bool pass = false;
  double slack = 0.0;
  std::string detail;
};

namespace detail {

inline CheckResult make_result(std::string name, double slack, std::string detail) {
  CheckResult r;
  r.name = std::move(name);
  r.pass = slack >= 0.0 && std::isfinite(slack);
  r.slack = slack;
  r.detail = std::move(detail);
  return r;
}

inline Matrix random_square(std::size_t d, RngStream& rng) {
  Matrix m(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) m(i, j) = rng.normal();
  }
  return m;
}

// tr(A^T A) tr(B^T B) >= tr(A^T B)^2, with equality only on proportional pairs.
inline CheckResult check_trace_inequality(std::size_t dim, RngStream rng) {
  double min_margin = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < 60; ++rep) {
    const Matrix a = random_square(dim, rng);
    const Matrix b = random_square(dim, rng);
    double aa = 0.0, bb = 0.0, ab = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      for (std::size_t j = 0; j < dim; ++j) {
        aa += a(i, j) * a(i, j);
        bb += b(i, j) * b(i, j);
        ab += a(i, j) * b(i, j);
      }
    }
    min_margin = std::min(min_margin, (aa * bb - ab * ab) / (aa * bb));
  }
  return make_result("trace-inequality", min_margin + 1e-12,
                     "min relative margin " + fmt6(min_margin) + " over 60 pairs");
}

inline CheckResult check_logdet_inverse(std::size_t dim, RngStream rng) {
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const SymMatrix a = random_spd(dim, rng, 0.1, 10.0);
    worst = std::max(worst, std::abs(logdet_spd(a) + logdet_spd(spd_inverse(a))));
  }
  return make_result("logdet-inverse", 1e-9 - worst,
                     "max |logdet A + logdet inv(A)| = " + fmt6(worst));
}

inline std::vector<double> random_spectrum(std::size_t dim, RngStream& rng) {
  std::vector<double> lam(dim);
  for (double& v : lam) v = std::exp(rng.uniform(std::log(0.1), std::log(10.0)));
  std::sort(lam.begin(), lam.end());
  return lam;
}

inline CheckResult check_gamma_residual(std::size_t dim, RngStream rng) {
  double min_ratio = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < 40; ++rep) {
    const std::vector<double> lam = random_spectrum(dim, rng);
    const double rho = std::exp(rng.uniform(std::log(1e-4), std::log(2.0)));
    const GammaSolution sol = solve_gamma(lam, rho);
    double scale = static_cast<double>(dim);
    for (double l : lam) scale += l * sol.gamma;
    const double tol = 1e-10 * std::max(1.0, scale);
    min_ratio = std::min(min_ratio, 1.0 - std::abs(sol.residual) / tol);
  }
  return make_result("gamma-residual", min_ratio,
                     "min (1 - |residual|/tol) = " + fmt6(min_ratio) + " over 40 instances");
}

inline CheckResult check_radius_envelope(std::size_t dim, RngStream rng) {
  double min_margin = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < 40; ++rep) {
    const std::vector<double> lam = random_spectrum(dim, rng);
    const double rho = std::exp(rng.uniform(std::log(1e-4), std::log(2.0)));
    const GammaSolution sol = solve_gamma(lam, rho);
    double inv_sum = 0.0;
    for (double l : lam) inv_sum += 1.0 / l;
    const double root_l = std::sqrt(inv_sum);
    min_margin = std::min(min_margin, (root_l + 1e-12 - rho * sol.gamma) / root_l);
    if (rho <= 1.0) {
      const double mh = m_hat(lam);
      const double lo = rho / root_l, hi = (rho + mh * rho * rho) / root_l;
      const double inv_gamma = 1.0 / sol.gamma;
      min_margin = std::min({min_margin, (inv_gamma - lo + 1e-12) / hi, (hi - inv_gamma + 1e-12) / hi});
    }
  }
  return make_result("radius-envelope", min_margin,
                     "min normalized envelope margin " + fmt6(min_margin));
}

inline CheckResult check_taylor_sandwich(std::size_t dim, RngStream rng) {
  double min_slack = std::numeric_limits<double>::infinity();
  bool all_ok = true;
  for (int rep = 0; rep < 10; ++rep) {
    const SymMatrix sigma = random_spd(dim, rng, 0.5, 2.0);
    const SymMatrix sigma_hat = sample_cov(gaussian_sample(sigma, 5 * dim + 5, rng));
    for (double rho : {1e-3, 1e-2, 1e-1}) {
      const TaylorDiagnostics diag = taylor_diagnostics(sigma_hat, rho);
      all_ok = all_ok && diag.sandwich_ok.first && diag.sandwich_ok.second;
      min_slack = std::min({min_slack, diag.derivative_slack, diag.inverse_slack});
    }
  }
  if (!all_ok && min_slack >= 0.0) min_slack = -1.0;
  return make_result("taylor-sandwich", min_slack,
                     "min eigenvalue slack of bound-minus-gap = " + fmt6(min_slack));
}

inline CheckResult check_logdet_monotone(std::size_t dim, RngStream rng) {
  const std::vector<double> grid = {0.01, 0.05, 0.1, 0.3, 0.5, 1.0, 1.5, 2.0};
  double min_drop = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < 10; ++rep) {
    const SymMatrix sigma_hat = random_spd(dim, rng, 0.2, 5.0);
    double prev = std::numeric_limits<double>::quiet_NaN();
    for (double rho : grid) {
      const double ld = logdet_spd(estimate_precision(sigma_hat, rho).x);
      if (!std::isnan(prev)) min_drop = std::min(min_drop, prev - ld);
      prev = ld;
    }
  }
  return make_result("logdet-monotone", min_drop + 1e-10,
                     "min decrease of logdet X*(rho) across the grid = " + fmt6(min_drop));
}

inline CheckResult check_inner_monotone(std::size_t dim, RngStream rng) {
  const std::vector<double> grid = {0.01, 0.05, 0.1, 0.3, 0.5, 1.0, 1.5, 2.0};
  double min_drop = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < 10; ++rep) {
    const SymMatrix sigma_hat = random_spd(dim, rng, 0.2, 5.0);
    const SymMatrix sigma0 = random_spd(dim, rng, 0.2, 5.0);
    double prev = std::numeric_limits<double>::quiet_NaN();
    for (double rho : grid) {
      const double inner = frob_inner(estimate_precision(sigma_hat, rho).x, sigma0);
      if (!std::isnan(prev)) min_drop = std::min(min_drop, prev - inner);
      prev = inner;
    }
  }
  return make_result("inner-monotone", min_drop + 1e-10,
                     "min decrease of <X*(rho), S> across the grid = " + fmt6(min_drop));
}

inline CheckResult check_stein_identity(std::size_t dim, RngStream rng) {
  double min_margin = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < 15; ++rep) {
    const SymMatrix sigma0 = random_spd(dim, rng, 0.3, 3.0);
    const double at_min = std::abs(stein_loss(spd_inverse(sigma0), sigma0));
    min_margin = std::min(min_margin, 1e-11 - at_min);
    const SymMatrix x = random_spd(dim, rng, 0.3, 3.0);
    min_margin = std::min(min_margin, stein_loss(x, sigma0) + 1e-12);
  }
  return make_result("stein-identity", min_margin,
                     "min of {1e-11 - |loss at minimizer|, loss nonnegativity margin} = " +
                         fmt6(min_margin));
}

inline CheckResult check_df_linearity(std::size_t dim, RngStream rng) {
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const SymMatrix sigma = random_spd(dim, rng, 0.3, 3.0);
    const SymMatrix a = random_symmetric(dim, rng);
    const SymMatrix b = random_symmetric(dim, rng);
    const double alpha = 0.7, beta = -1.3;
    const SymMatrix lhs = df_apply(sigma, alpha * a + beta * b);
    const SymMatrix rhs = alpha * df_apply(sigma, a) + beta * df_apply(sigma, b);
    const double scale = frob_norm(df_apply(sigma, a)) + frob_norm(df_apply(sigma, b)) + 1.0;
    worst = std::max(worst, frob_norm(lhs - rhs) / scale);
  }
  return make_result("df-linearity", 1e-10 - worst,
                     "max normalized linearity defect " + fmt6(worst));
}

inline CheckResult check_df_finite_difference(std::size_t dim, RngStream rng) {
  double worst = 0.0;
  for (int rep = 0; rep < 12; ++rep) {
    const SymMatrix sigma = random_spd(dim, rng, 0.5, 2.0);
    SymMatrix a = random_symmetric(dim, rng);
    a = (1.0 / std::max(frob_norm(a), 1e-300)) * a;
    const double h = 1e-6 * std::max(frob_norm(sigma), 1.0);
    const SymMatrix fd = (1.0 / (2.0 * h)) * (a_hat(sigma + h * a) - a_hat(sigma - h * a));
    const SymMatrix lin = df_apply(sigma, a);
    worst = std::max(worst, frob_norm(fd - lin) / (frob_norm(lin) + 1.0));
  }
  return make_result("df-finite-difference", 1e-4 - worst,
                     "max normalized FD mismatch " + fmt6(worst) + " (tol 1e-4)");
}

// tr(S^-1) tr(S^-1 Z S^-2 Z) >= tr(Z S^-2)^2 for symmetric Z, SPD S.
inline CheckResult check_matrix_inequality(std::size_t dim, RngStream rng) {
  double min_margin = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < 60; ++rep) {
    const SymMatrix s = random_spd(dim, rng, 0.2, 5.0);
    const SymMatrix z = random_symmetric(dim, rng);
    const SymMatrix si = spd_inverse(s);
    const SymMatrix si2 = symmetrize(si.to_matrix() * si.to_matrix());
    const Matrix zsi2 = z.to_matrix() * si2.to_matrix();
    double t1 = si.trace();
    double t2 = 0.0;
    const Matrix inner = si.to_matrix() * z.to_matrix() * si2.to_matrix() * z.to_matrix();
    for (std::size_t i = 0; i < dim; ++i) t2 += inner(i, i);
    double t3 = 0.0;
    for (std::size_t i = 0; i < dim; ++i) t3 += zsi2(i, i);
    const double lhs = t1 * t2;
    min_margin = std::min(min_margin, (lhs - t3 * t3) / std::max(lhs, 1e-300));
  }
  return make_result("matrix-inequality", min_margin + 1e-10,
                     "min relative margin " + fmt6(min_margin) + " over 60 draws");
}

/// Scalar kernel behind the positivity argument; nonnegative, zero only at a == b.
inline double g_kernel(double a, double b) {
  return -a - b + (b * b * b) / (a * a) + (a * a * a) / (b * b);
}

inline CheckResult check_g_nonnegative(RngStream rng) {
  double min_margin = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < 200; ++rep) {
    const double a = std::exp(rng.uniform(std::log(1e-2), std::log(1e2)));
    const double b = std::exp(rng.uniform(std::log(1e-2), std::log(1e2)));
    min_margin = std::min(min_margin, g_kernel(a, b) / (a + b));
    min_margin = std::min(min_margin, g_kernel(a, a) / (2.0 * a));
  }
  return make_result("g-nonnegative", min_margin + 1e-12,
                     "min g(a,b)/(a+b) = " + fmt6(min_margin) + " over 200 draws");
}

inline CheckResult check_zcov_empirical(std::size_t dim, RngStream rng) {
  const SymMatrix sigma0 = random_spd(dim, rng, 0.5, 2.0);
  const ZGaussianSampler sampler(sigma0);
  const std::size_t draws = 20000;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i; j < dim; ++j) pairs.emplace_back(i, j);
  }
  const std::size_t m = pairs.size();
  std::vector<double> sums(m * m, 0.0);
  for (std::size_t s = 0; s < draws; ++s) {
    const SymMatrix z = sampler.draw(rng);
    for (std::size_t p = 0; p < m; ++p) {
      const double zp = z(pairs[p].first, pairs[p].second);
      for (std::size_t q = p; q < m; ++q) {
        sums[p * m + q] += zp * z(pairs[q].first, pairs[q].second);
      }
    }
  }
  double min_margin = std::numeric_limits<double>::infinity();
  double worst_err = 0.0;
  for (std::size_t p = 0; p < m; ++p) {
    for (std::size_t q = p; q < m; ++q) {
      const double emp = sums[p * m + q] / static_cast<double>(draws);
      const double exact = z_cov(sigma0, pairs[p].first, pairs[p].second, pairs[q].first,
                                 pairs[q].second);
      const double vp = z_cov(sigma0, pairs[p].first, pairs[p].second, pairs[p].first,
                              pairs[p].second);
      const double vq = z_cov(sigma0, pairs[q].first, pairs[q].second, pairs[q].first,
                              pairs[q].second);
      // Var(Z_p Z_q) = vp vq + exact^2 for jointly Gaussian coordinates.
      const double se = std::sqrt((vp * vq + exact * exact) / static_cast<double>(draws));
      const double band = 6.0 * se + 1e-3;
      const double err = std::abs(emp - exact);
      worst_err = std::max(worst_err, err / band);
      min_margin = std::min(min_margin, band - err);
    }
  }
  return make_result("zcov-empirical", min_margin,
                     "max |emp - exact| at " + fmt6(worst_err) +
                         " of the 6-sigma band over " + std::to_string(m * (m + 1) / 2) +
                         " moment pairs");
}

inline CheckResult check_positivity_pointwise(std::size_t dim, RngStream rng) {
  const SymMatrix sigma0 = random_spd(dim, rng, 0.5, 2.0);
  const ZGaussianSampler sampler(sigma0);
  const SymMatrix si = spd_inverse(sigma0);
  const double tr_si = si.trace();
  double min_value = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < 300; ++rep) {
    const SymMatrix z = sampler.draw(rng);
    min_value = std::min(min_value, inner_z_za(sigma0, z));
  }
  return make_result("positivity-pointwise", min_value + 1e-8 * (1.0 + tr_si * tr_si),
                     "min sampled <Z, Z_A> = " + fmt6(min_value) + " over 300 draws");
}

inline CheckResult check_rho_star_mc(std::size_t dim, RngStream rng) {
  const SymMatrix sigma0 = random_spd(dim, rng, 0.5, 2.0);
  const RhoStarReport closed = rho_star(sigma0);
  const RhoStarReport mc = rho_star_mc(sigma0, 200000, rng.next_u64());
  const double band = 3.0 * mc.mc_std_error.value();
  const double err = std::abs(closed.rho_star - mc.rho_star);
  return make_result("rho-star-mc", band - err,
                     "closed " + fmt6(closed.rho_star) + " vs MC " + fmt6(mc.rho_star) +
                         " (3 SE band " + fmt6(band) + ")");
}

inline CheckResult check_w2_axioms(std::size_t dim, RngStream rng) {
  double min_margin = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < 20; ++rep) {
    const SymMatrix a = random_spd(dim, rng, 0.2, 5.0);
    const SymMatrix b = random_spd(dim, rng, 0.2, 5.0);
    const SymMatrix c = random_spd(dim, rng, 0.2, 5.0);
    const double ab = w2_gaussian(a, b), ba = w2_gaussian(b, a);
    const double ac = w2_gaussian(a, c), bc = w2_gaussian(b, c);
    const double scale = ab + ac + bc + 1.0;
    min_margin = std::min(min_margin, (1e-9 * scale - std::abs(ab - ba)) / scale);
    min_margin = std::min(min_margin, (ab + bc - ac + 1e-9 * scale) / scale);
  }
  return make_result("w2-axioms", min_margin,
                     "min normalized symmetry/triangle margin " + fmt6(min_margin));
}

inline CheckResult check_objective_finite(std::size_t dim, RngStream rng) {
  const SymMatrix sigma0 = random_spd(dim, rng, 0.5, 2.0);
  const EmpiricalRhoObjective obj(sigma0, 3 * dim + 5, 4, rng.substream(1));
  const double rho_max = detail::resolve_rho_max(RhoSearch{}, sigma0);
  bool all_finite = true;
  double max_abs = 0.0;
  for (int k = 0; k < 30; ++k) {
    const double rho =
        std::exp(std::log(1e-6) + (std::log(rho_max) - std::log(1e-6)) * k / 29.0);
    const double v = obj(rho);
    all_finite = all_finite && std::isfinite(v);
    max_abs = std::max(max_abs, std::abs(v));
  }
  return make_result("objective-finite", all_finite ? 1.0 : -1.0,
                     "30-point audit grid, max |objective| = " + fmt6(max_abs));
}

}  // namespace detail

/// Runs every module's invariant suite at the given dimension. Each check is
/// seeded from its own substream of `seed`, so results depend only on
/// (dim, seed).
inline std::vector<CheckResult> run_checks(std::size_t dim, std::uint64_t seed) {
  if (dim < 1 || dim > 10) throw std::invalid_argument("run_checks: dim must be in [1, 10]");
  const RngStream root(seed);
  std::vector<CheckResult> out;
  out.push_back(detail::check_trace_inequality(dim, root.substream(101)));
  out.push_back(detail::check_logdet_inverse(dim, root.substream(102)));
  out.push_back(detail::check_gamma_residual(dim, root.substream(103)));
  out.push_back(detail::check_radius_envelope(dim, root.substream(104)));
  out.push_back(detail::check_taylor_sandwich(dim, root.substream(105)));
  out.push_back(detail::check_logdet_monotone(dim, root.substream(106)));
  out.push_back(detail::check_inner_monotone(dim, root.substream(107)));
  out.push_back(detail::check_stein_identity(dim, root.substream(108)));
  out.push_back(detail::check_df_linearity(dim, root.substream(109)));
  out.push_back(detail::check_df_finite_difference(dim, root.substream(110)));
  out.push_back(detail::check_matrix_inequality(dim, root.substream(111)));
  out.push_back(detail::check_g_nonnegative(root.substream(112)));
  out.push_back(detail::check_zcov_empirical(dim, root.substream(113)));
  out.push_back(detail::check_positivity_pointwise(dim, root.substream(114)));
  out.push_back(detail::check_rho_star_mc(dim, root.substream(115)));
  out.push_back(detail::check_w2_axioms(dim, root.substream(116)));
  out.push_back(detail::check_objective_finite(dim, root.substream(117)));
  return out;
}

}  // namespace wdro
