#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wdro/error.hpp"
#include "wdro/estimator.hpp"
#include "wdro/matrix.hpp"
#include "wdro/rng.hpp"

namespace wdro {

/// Covariance of the limiting Gaussian matrix Z of sqrt(n) (S_n - sigma0):
///   cov(Z[i1,j1], Z[i2,j2]) = sigma0[i1,i2] sigma0[j1,j2]
///                           + sigma0[i1,j2] sigma0[j1,i2].
inline double z_cov(const SymMatrix& sigma0, std::size_t i1, std::size_t j1, std::size_t i2,
                    std::size_t j2) {
  const std::size_t d = sigma0.dim();
  if (i1 >= d || j1 >= d || i2 >= d || j2 >= d) {
    throw std::invalid_argument("z_cov: index out of range");
  }
  return sigma0(i1, i2) * sigma0(j1, j2) + sigma0(i1, j2) * sigma0(j1, i2);
}

/// Second-moment lookup for the limiting matrix Z of a fixed sigma0.
struct ZMoments {
  SymMatrix sigma0;

  double operator()(std::size_t i1, std::size_t j1, std::size_t i2, std::size_t j2) const {
    return z_cov(sigma0, i1, j1, i2, j2);
  }
};

/// Population counterpart of a_hat: -2 tr(sigma0^-1)^{-1/2} sigma0^-2.
inline SymMatrix a_zero(const SymMatrix& sigma0) { return a_hat(sigma0); }

/// Derivative of S |-> -2 tr(S^-1)^{-1/2} S^-2 applied to a symmetric
/// direction a:
///   Df(S)[a] = -tr(S^-1 a S^-1) tr(S^-1)^{-3/2} S^-2
///            + 2 tr(S^-1)^{-1/2} (S^-1 a S^-2 + S^-2 a S^-1).
inline SymMatrix df_apply(const SymMatrix& sigma, const SymMatrix& a) {
  require_same_dim(sigma, a, "df_apply");
  const SymMatrix si = spd_inverse(sigma);
  const Matrix si_m = si.to_matrix();
  const SymMatrix si2 = symmetrize(si_m * si_m);
  const double t = si.trace();
  const double trace_term = frob_inner(a, si2);

  const Matrix cross = si_m * a.to_matrix() * si2.to_matrix();
  SymMatrix out = (4.0 / std::sqrt(t)) * symmetrize(cross);
  return out + (-trace_term / (t * std::sqrt(t))) * si2;
}

/// Pushforward of one limiting draw z through the delta-method derivative.
inline SymMatrix z_a_realization(const SymMatrix& sigma0, const SymMatrix& z) {
  return df_apply(sigma0, z);
}

/// E <Z, Z_A> assembled from z_cov by the quadruple index sums
///   4 E tr(S^-1 Z S^-2 Z) / sqrt(t) - E tr(Z S^-2)^2 / t^{3/2},
/// t = tr(sigma0^-1). O(d^4) terms; d stays small here.
inline double expected_inner_z_za(const SymMatrix& sigma0) {
  const std::size_t d = sigma0.dim();
  const SymMatrix si = spd_inverse(sigma0);
  const Matrix si_m = si.to_matrix();
  const SymMatrix si2 = symmetrize(si_m * si_m);
  const double t = si.trace();

  double quad = 0.0;
  double trace_sq = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t k = 0; k < d; ++k) {
        for (std::size_t l = 0; l < d; ++l) {
          quad += si(i, j) * si2(k, l) * z_cov(sigma0, j, k, l, i);
          trace_sq += si2(j, i) * si2(l, k) * z_cov(sigma0, i, j, k, l);
        }
      }
    }
  }
  return 4.0 * quad / std::sqrt(t) - trace_sq / (t * std::sqrt(t));
}

/// Draws from the limiting Gaussian law of sqrt(n) (S_n - sigma0): the
/// d(d+1)/2 distinct entries are jointly Gaussian with covariance z_cov. The
/// factorization is done once at construction.
class ZGaussianSampler {
 public:
  explicit ZGaussianSampler(const SymMatrix& sigma0)
      : dim_(sigma0.dim()), factor_(1, 1) {
    for (std::size_t i = 0; i < dim_; ++i) {
      for (std::size_t j = i; j < dim_; ++j) pairs_.emplace_back(i, j);
    }
    const std::size_t m = pairs_.size();
    SymMatrix cov(m);
    for (std::size_t p = 0; p < m; ++p) {
      for (std::size_t q = p; q < m; ++q) {
        cov.set(p, q, z_cov(sigma0, pairs_[p].first, pairs_[p].second, pairs_[q].first,
                            pairs_[q].second));
      }
    }
    factor_ = cholesky_spd(cov);
  }

  SymMatrix draw(RngStream& rng) const {
    const std::size_t m = pairs_.size();
    std::vector<double> g(m);
    for (std::size_t k = 0; k < m; ++k) g[k] = rng.normal();
    SymMatrix z(dim_);
    for (std::size_t p = 0; p < m; ++p) {
      double v = 0.0;
      for (std::size_t k = 0; k <= p; ++k) v += factor_(p, k) * g[k];
      z.set(pairs_[p].first, pairs_[p].second, v);
    }
    return z;
  }

 private:
  std::size_t dim_;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  Matrix factor_;
};

/// Second-moment surrogate for the limiting law: Z = x x^T - sigma0 with
/// x ~ N(0, sigma0). Shares all second moments with the Gaussian limit, so
/// expectations of quadratics in Z agree between the two samplers.
class ZOuterSurrogateSampler {
 public:
  explicit ZOuterSurrogateSampler(const SymMatrix& sigma0)
      : sigma0_(sigma0), factor_(cholesky_spd(sigma0)) {}

  SymMatrix draw(RngStream& rng) const {
    const std::size_t d = sigma0_.dim();
    std::vector<double> g(d), x(d);
    for (std::size_t k = 0; k < d; ++k) g[k] = rng.normal();
    for (std::size_t i = 0; i < d; ++i) {
      double v = 0.0;
      for (std::size_t k = 0; k <= i; ++k) v += factor_(i, k) * g[k];
      x[i] = v;
    }
    SymMatrix z(d);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i; j < d; ++j) z.set(i, j, x[i] * x[j] - sigma0_(i, j));
    }
    return z;
  }

 private:
  SymMatrix sigma0_;
  Matrix factor_;
};

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

/// The inner product <Z, Z_A> of one realization, in trace form:
///   4 tr(S^-1 Z S^-2 Z) / sqrt(t) - tr(Z S^-2)^2 / t^{3/2}.
/// Nonnegative for every symmetric Z by the trace Cauchy-Schwarz inequality.
inline double inner_z_za(const SymMatrix& sigma0, const SymMatrix& z) {
  require_same_dim(sigma0, z, "inner_z_za");
  const SymMatrix si = spd_inverse(sigma0);
  const Matrix si_m = si.to_matrix();
  const SymMatrix si2 = symmetrize(si_m * si_m);
  const double t = si.trace();
  const Matrix zm = z.to_matrix();
  const Matrix m1 = si.to_matrix() * zm;
  const Matrix m2 = si2.to_matrix() * zm;
  double quad = 0.0;
  for (std::size_t i = 0; i < z.dim(); ++i) {
    for (std::size_t k = 0; k < z.dim(); ++k) quad += m1(i, k) * m2(k, i);
  }
  const double tr = frob_inner(z, si2);
  return 4.0 * quad / std::sqrt(t) - tr * tr / (t * std::sqrt(t));
}

/// Monte Carlo estimate of E <Z, Z_A> under the exact limiting Gaussian law.
/// Deterministic for a fixed (sigma0, samples, seed).
inline McEstimate expected_inner_mc(const SymMatrix& sigma0, std::size_t samples,
                                    std::uint64_t seed) {
  if (samples < 100) {
    throw std::invalid_argument("expected_inner_mc: need at least 100 samples");
  }
  const ZGaussianSampler sampler(sigma0);
  const SymMatrix si = spd_inverse(sigma0);
  const Matrix si_m = si.to_matrix();
  const SymMatrix si2 = symmetrize(si_m * si_m);
  const Matrix si2_m = si2.to_matrix();
  const double t = si.trace();
  const double sqrt_t = std::sqrt(t);
  const std::size_t d = sigma0.dim();

  RngStream rng = RngStream(seed).substream(0x5a6d70);
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    const SymMatrix z = sampler.draw(rng);
    const Matrix zm = z.to_matrix();
    const Matrix p1 = si_m * zm;
    const Matrix p2 = si2_m * zm;
    double quad = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t c = 0; c < d; ++c) quad += p1(i, c) * p2(c, i);
    }
    const double tr = frob_inner(z, si2);
    const double val = 4.0 * quad / sqrt_t - tr * tr / (t * sqrt_t);

    const double delta = val - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta * (val - mean);
  }
  const double var = m2 / static_cast<double>(samples - 1);
  return {mean, std::sqrt(var / static_cast<double>(samples)), samples};
}

enum class RhoStarMethod { kClosedForm, kMonteCarlo };

inline std::string to_string(RhoStarMethod m) {
  return m == RhoStarMethod::kClosedForm ? "closed-form" : "monte-carlo";
}

/// Scaling constant of the optimal radius, rho_star = numerator/denominator
/// with numerator = E <Z, Z_A> and denominator = <sigma0 A0 sigma0, A0>;
/// the denominator equals 4 tr(sigma0^-2) / tr(sigma0^-1).
struct RhoStarReport {
  double rho_star = 0.0;
  double numerator = 0.0;
  double denominator = 0.0;
  RhoStarMethod method = RhoStarMethod::kClosedForm;
  std::optional<double> mc_std_error;
};

inline RhoStarReport rho_star(const SymMatrix& sigma0) {
  const SymMatrix a0 = a_zero(sigma0);
  const Matrix s_m = sigma0.to_matrix();
  const SymMatrix sas = symmetrize(s_m * a0.to_matrix() * s_m);
  RhoStarReport out;
  out.numerator = expected_inner_z_za(sigma0);
  out.denominator = frob_inner(sas, a0);
  out.rho_star = out.numerator / out.denominator;
  out.method = RhoStarMethod::kClosedForm;
  return out;
}

/// Monte Carlo variant of rho_star; the numerator is replaced by its sample
/// estimate and mc_std_error carries the induced standard error.
inline RhoStarReport rho_star_mc(const SymMatrix& sigma0, std::size_t samples,
                                 std::uint64_t seed) {
  const McEstimate mc = expected_inner_mc(sigma0, samples, seed);
  RhoStarReport out = rho_star(sigma0);
  out.numerator = mc.estimate;
  out.rho_star = mc.estimate / out.denominator;
  out.method = RhoStarMethod::kMonteCarlo;
  out.mc_std_error = mc.std_error / out.denominator;
  return out;
}

/// First-order radius rule rho_star(sigma) / n.
inline double rho_rule(const SymMatrix& sigma, std::size_t n) {
  if (n == 0) throw std::invalid_argument("rho_rule: n must be >= 1");
  return rho_star(sigma).rho_star / static_cast<double>(n);
}

/// Quadratic Wasserstein distance between N(0, a) and N(0, b):
///   sqrt(tr a + tr b - 2 tr (a^{1/2} b a^{1/2})^{1/2}).
inline double w2_gaussian(const SymMatrix& a, const SymMatrix& b) {
  require_same_dim(a, b, "w2_gaussian");
  const Matrix ra = sqrt_spd(a).to_matrix();
  const SymMatrix inner = symmetrize(ra * b.to_matrix() * ra);
  const double val = a.trace() + b.trace() - 2.0 * sqrt_spd(inner).trace();
  return std::sqrt(std::max(val, 0.0));
}

}  // namespace wdro
