#pragma once

#include <cmath>

#include "wdro/matrix.hpp"

namespace wdro {

/// Stein loss of a candidate precision matrix x against a covariance sigma0:
///   L(x, sigma0) = -log det(x sigma0) + <x, sigma0> - d.
/// Zero exactly at x = sigma0^-1 and positive elsewhere.
inline double stein_loss(const SymMatrix& x, const SymMatrix& sigma0) {
  require_same_dim(x, sigma0, "stein_loss");
  const double d = static_cast<double>(x.dim());
  return -logdet_spd(x) - logdet_spd(sigma0) + frob_inner(x, sigma0) - d;
}

/// Gradient of the Stein loss in x: -x^-1 + sigma0.
inline SymMatrix stein_gradient(const SymMatrix& x, const SymMatrix& sigma0) {
  require_same_dim(x, sigma0, "stein_gradient");
  return sigma0 - spd_inverse(x);
}

}  // namespace wdro
