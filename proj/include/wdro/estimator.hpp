#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "wdro/error.hpp"
#include "wdro/matrix.hpp"

namespace wdro {

/// Root of the radius-to-multiplier equation, with convergence evidence.
struct GammaSolution {
  double gamma = 0.0;
  double residual = 0.0;
  int iterations = 0;
  std::pair<double, double> bracket{0.0, 0.0};
};

/// Shrunk precision matrix together with the spectral data it was built from.
/// weights[i] pairs with the i-th (ascending) eigenvalue of the input
/// covariance; gamma is empty at radius zero, where x is the plain inverse.
struct PrecisionEstimate {
  SymMatrix x;
  double rho = 0.0;
  std::optional<GammaSolution> gamma;
  std::vector<double> weights;
};

namespace detail {

inline void require_positive_spectrum(const std::vector<double>& lambdas, const char* where) {
  if (lambdas.empty()) {
    throw std::invalid_argument(std::string(where) + ": empty eigenvalue list");
  }
  for (double lam : lambdas) {
    if (!(lam > 0.0) || !std::isfinite(lam)) {
      throw std::invalid_argument(std::string(where) + ": eigenvalues must be positive and finite");
    }
  }
}

// Scalar pieces of the multiplier equation
//   F(gamma) = (rho^2 - S1/2) gamma - d + (1/2) sum_i sqrt(lam_i^2 g^2 + 4 lam_i g),
// evaluated in the cancellation-free form
//   F(gamma) = rho^2 gamma - d + sum_i 2 u_i / (sqrt(u_i^2 + 4 u_i) + u_i),
// u_i = lam_i gamma. Both forms are identical; the second stays accurate when
// u_i is large.
struct GammaEquation {
  const std::vector<double>& lambdas;
  double rho2;

  double value(double g) const {
    double s = rho2 * g - static_cast<double>(lambdas.size());
    for (double lam : lambdas) {
      const double u = lam * g;
      s += 2.0 * u / (std::sqrt(u * (u + 4.0)) + u);
    }
    return s;
  }

  double derivative(double g) const {
    double s = rho2;
    for (double lam : lambdas) {
      const double u = lam * g;
      const double r = std::sqrt(u * (u + 4.0));
      s += 2.0 * lam / (r * (u + 2.0 + r));
    }
    return s;
  }
};

}  // namespace detail

/// Largest-denominator-scale bound 8 / (lam_min * min(d, sqrt(d / lam_max)))
/// used by the Taylor remainder envelopes.
inline double m_hat(const std::vector<double>& lambdas) {
  detail::require_positive_spectrum(lambdas, "m_hat");
  const double d = static_cast<double>(lambdas.size());
  double lam_min = lambdas.front();
  double lam_max = lambdas.front();
  for (double lam : lambdas) {
    lam_min = std::min(lam_min, lam);
    lam_max = std::max(lam_max, lam);
  }
  return 8.0 / (lam_min * std::min(d, std::sqrt(d) / std::sqrt(lam_max)));
}

/// Solves F(gamma) = 0 for the positive multiplier at radius rho > 0.
///
/// F is strictly increasing with F(0) = -d < 0, so the root is unique. The
/// initial bracket comes from the analytic envelope sqrt(L)/(rho (1 + M rho))
/// <= gamma* <= sqrt(L)/rho (L = sum 1/lam_i, M = m_hat) when rho <= 1 and is
/// grown geometrically otherwise; bisection then hands over to Newton steps
/// that are rejected whenever they leave the bracket.
inline GammaSolution solve_gamma(const std::vector<double>& lambdas, double rho) {
  detail::require_positive_spectrum(lambdas, "solve_gamma");
  if (!(rho > 0.0) || !std::isfinite(rho)) {
    throw std::invalid_argument("solve_gamma: rho must be positive and finite");
  }

  double inv_sum = 0.0;
  for (double lam : lambdas) inv_sum += 1.0 / lam;
  const double sqrt_l = std::sqrt(inv_sum);

  const detail::GammaEquation f{lambdas, rho * rho};
  int iterations = 0;
  const int max_iter = 200;

  // Analytic envelope of the root; exact for rho <= 1, a starting guess
  // otherwise. Geometric expansion restores the sign change if needed.
  double hi = sqrt_l / rho;
  for (int k = 0; f.value(hi) < 0.0; ++k) {
    if (k >= max_iter) throw SolverError("solve_gamma: failed to bracket the root from above");
    hi *= 2.0;
    ++iterations;
  }
  double lo = std::min(sqrt_l / (rho + m_hat(lambdas) * rho * rho), hi);
  for (int k = 0; f.value(lo) > 0.0; ++k) {
    if (k >= max_iter) throw SolverError("solve_gamma: failed to bracket the root from below");
    lo *= 0.5;
    ++iterations;
  }

  GammaSolution out;
  out.bracket = {lo, hi};

  double x = 0.5 * (lo + hi);
  for (int k = 0; k < max_iter; ++k) {
    ++iterations;
    const double fx = f.value(x);
    if (fx == 0.0) break;
    if (fx > 0.0) {
      hi = x;
    } else {
      lo = x;
    }
    const double step = fx / f.derivative(x);
    double next = x - step;
    if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(x)) {
      x = next;
      break;
    }
    x = next;
  }

  out.gamma = x;
  out.residual = f.value(x);
  out.iterations = iterations;
  return out;
}

/// Spectral weights x_i = 4 lam_i g^2 / (sqrt(lam_i^2 g^2 + 4 lam_i g) + lam_i g)^2
/// of the shrunk precision matrix; equal to the textbook expression
/// g [1 - (sqrt(lam^2 g^2 + 4 lam g) - lam g) / 2] but immune to cancellation
/// for large g, where x_i tends to 1/lam_i.
inline std::vector<double> precision_weights(const std::vector<double>& lambdas, double gamma) {
  detail::require_positive_spectrum(lambdas, "precision_weights");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("precision_weights: gamma must be positive and finite");
  }
  std::vector<double> w(lambdas.size());
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    const double u = lambdas[i] * gamma;
    const double den = std::sqrt(u * (u + 4.0)) + u;
    w[i] = 4.0 * u * gamma / (den * den);
  }
  return w;
}

/// Robust precision estimate at radius rho >= 0. The estimate shares the
/// eigenvectors of the input covariance; rho == 0 returns the plain inverse.
inline PrecisionEstimate estimate_precision(const SymMatrix& sigma_hat, double rho) {
  if (!(rho >= 0.0) || !std::isfinite(rho)) {
    throw std::invalid_argument("estimate_precision: rho must be nonnegative and finite");
  }
  const SpectralDecomp s = eig_sym(sigma_hat);
  detail::require_spd_spectrum(s.eigenvalues, frob_norm(sigma_hat), "estimate_precision");

  PrecisionEstimate out{SymMatrix(sigma_hat.dim()), rho, std::nullopt, {}};
  if (rho == 0.0) {
    out.weights.resize(s.eigenvalues.size());
    for (std::size_t i = 0; i < out.weights.size(); ++i) out.weights[i] = 1.0 / s.eigenvalues[i];
  } else {
    out.gamma = solve_gamma(s.eigenvalues, rho);
    out.weights = precision_weights(s.eigenvalues, out.gamma->gamma);
  }
  out.x = spectral_rebuild(s.eigenvectors, out.weights);
  return out;
}

/// First-order coefficient -2 tr(S^-1)^{-1/2} S^-2 of the estimate's
/// expansion in the radius.
inline SymMatrix a_hat(const SymMatrix& sigma_hat) {
  const SpectralDecomp s = eig_sym(sigma_hat);
  detail::require_spd_spectrum(s.eigenvalues, frob_norm(sigma_hat), "a_hat");
  double t = 0.0;
  for (double lam : s.eigenvalues) t += 1.0 / lam;
  std::vector<double> vals(s.eigenvalues.size());
  for (std::size_t i = 0; i < vals.size(); ++i) {
    vals[i] = -2.0 / (std::sqrt(t) * s.eigenvalues[i] * s.eigenvalues[i]);
  }
  return spectral_rebuild(s.eigenvectors, vals);
}

/// Measured agreement between the estimate's radius expansion and its
/// analytic first-order envelopes, all expressed in the eigenbasis of the
/// input covariance.
///
/// derivative_gap is the central-difference radius derivative minus a_hat;
/// inverse_gap is X(rho)^-1 - S + S a_hat S rho. sandwich_ok reports whether
/// each gap sits inside its envelope; the slack fields give the smallest
/// margin (negative means a violation beyond roundoff tolerance).
struct TaylorDiagnostics {
  double m_hat = 0.0;
  SymMatrix derivative_gap;
  SymMatrix inverse_gap;
  std::pair<bool, bool> sandwich_ok{false, false};
  double derivative_slack = 0.0;
  double inverse_slack = 0.0;
};

inline TaylorDiagnostics taylor_diagnostics(const SymMatrix& sigma_hat, double rho) {
  if (!(rho > 0.0) || !(rho <= 1.0)) {
    throw std::invalid_argument("taylor_diagnostics: rho must lie in (0, 1]");
  }
  const SpectralDecomp s = eig_sym(sigma_hat);
  detail::require_spd_spectrum(s.eigenvalues, frob_norm(sigma_hat), "taylor_diagnostics");
  const std::vector<double>& lam = s.eigenvalues;
  const std::size_t d = lam.size();

  double big_l = 0.0;
  for (double l : lam) big_l += 1.0 / l;
  const double sqrt_l = std::sqrt(big_l);
  const double m = m_hat(lam);

  const double h = std::min(1e-6, rho / 10.0);
  const auto weights_at = [&lam](double r) {
    return precision_weights(lam, solve_gamma(lam, r).gamma);
  };
  const std::vector<double> xm = weights_at(rho - h);
  const std::vector<double> x0 = weights_at(rho);
  const std::vector<double> xp = weights_at(rho + h);

  TaylorDiagnostics out{m, SymMatrix(d), SymMatrix(d), {true, true}, 0.0, 0.0};
  std::vector<double> gap1(d), gap2(d);
  double slack1 = std::numeric_limits<double>::infinity();
  double slack2 = std::numeric_limits<double>::infinity();
  bool ok1 = true;
  bool ok2 = true;

  for (std::size_t i = 0; i < d; ++i) {
    const double inv_l2 = 1.0 / (lam[i] * lam[i]);

    gap1[i] = (xp[i] - xm[i]) / (2.0 * h) + 2.0 * inv_l2 / sqrt_l;
    const double lo1 = -(4.0 * m + 2.0 * m * m) * inv_l2 / sqrt_l * rho;
    const double hi1 = (2.0 * m * m * m + 8.0 * m) * inv_l2 / sqrt_l * rho;
    const double tol1 = 1e-9 * std::max({1.0, std::abs(lo1), std::abs(hi1)});
    slack1 = std::min({slack1, gap1[i] - lo1, hi1 - gap1[i]});
    ok1 = ok1 && gap1[i] >= lo1 - tol1 && gap1[i] <= hi1 + tol1;

    gap2[i] = 1.0 / x0[i] - lam[i] - 2.0 * rho / sqrt_l;
    const double lo2 = -2.0 * (1.0 + m) * (1.0 + m) / (big_l * lam[i]) * rho * rho;
    const double hi2 = 2.0 * m / sqrt_l * rho * rho;
    const double tol2 = 1e-9 * std::max({1.0, std::abs(lo2), std::abs(hi2)});
    slack2 = std::min({slack2, gap2[i] - lo2, hi2 - gap2[i]});
    ok2 = ok2 && gap2[i] >= lo2 - tol2 && gap2[i] <= hi2 + tol2;
  }

  out.derivative_gap = spectral_rebuild(s.eigenvectors, gap1);
  out.inverse_gap = spectral_rebuild(s.eigenvectors, gap2);
  out.sandwich_ok = {ok1, ok2};
  out.derivative_slack = slack1;
  out.inverse_slack = slack2;
  return out;
}

}  // namespace wdro
