#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "wdro/estimator.hpp"
#include "wdro/matrix.hpp"
#include "wdro/rng.hpp"
#include "wdro/simulate.hpp"

#include "test_support.hpp"

using namespace wdro;

namespace {

double inv_sum(const std::vector<double>& lambdas) {
  double s = 0.0;
  for (double lam : lambdas) s += 1.0 / lam;
  return s;
}

}  // namespace

TEST_CASE("solve_gamma reproduces hand-solved roots", "[estimator]") {
  CHECK_THAT(solve_gamma({1.0}, 0.5).gamma, Catch::Matchers::WithinAbs(4.0 / 3.0, 1e-9));
  CHECK_THAT(solve_gamma({1.0}, 1.0).gamma, Catch::Matchers::WithinAbs(0.5, 1e-9));
  CHECK_THAT(solve_gamma({4.0}, 1.0).gamma, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-9));
}

TEST_CASE("solve_gamma validates inputs", "[estimator]") {
  CHECK_THROWS_AS(solve_gamma({1.0}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(solve_gamma({1.0}, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(solve_gamma({0.0}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(solve_gamma({-1.0, 2.0}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(solve_gamma({}, 0.5), std::invalid_argument);
}

TEST_CASE("solve_gamma residual and envelope properties", "[estimator]") {
  RngStream rng(31);
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t d = 1 + rng.next_u64() % 10;
    std::vector<double> lam(d);
    for (auto& l : lam) l = std::exp(rng.uniform(std::log(0.1), std::log(10.0)));
    const double rho = std::exp(rng.uniform(std::log(1e-4), std::log(2.0)));

    const GammaSolution sol = solve_gamma(lam, rho);
    REQUIRE(sol.gamma > 0.0);
    CHECK(sol.bracket.first <= sol.gamma);
    CHECK(sol.gamma <= sol.bracket.second);

    double lam_gamma = 0.0;
    for (double l : lam) lam_gamma += l * sol.gamma;
    CHECK(std::abs(sol.residual) <= 1e-10 * std::max(1.0, static_cast<double>(d) + lam_gamma));

    const double sqrt_l = std::sqrt(inv_sum(lam));
    CHECK(rho * sol.gamma <= sqrt_l + 1e-12);

    if (rho <= 1.0) {
      const double m = m_hat(lam);
      CHECK(rho / sqrt_l <= 1.0 / sol.gamma + 1e-12);
      CHECK(1.0 / sol.gamma <= (rho + m * rho * rho) / sqrt_l + 1e-12);
    }
  }
}

TEST_CASE("precision_weights matches hand substitutions", "[estimator]") {
  CHECK_THAT(precision_weights({1.0}, 4.0 / 3.0)[0], Catch::Matchers::WithinAbs(4.0 / 9.0, 1e-12));
  CHECK_THAT(precision_weights({1.0}, 0.5)[0], Catch::Matchers::WithinAbs(0.25, 1e-12));
  CHECK_THROWS_AS(precision_weights({1.0}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(precision_weights({0.0}, 1.0), std::invalid_argument);
}

TEST_CASE("precision_weights tends to the plain inverse for large gamma", "[estimator]") {
  const std::vector<double> lam{0.2, 1.0, 7.5};
  const std::vector<double> w = precision_weights(lam, 1e9);
  for (std::size_t i = 0; i < lam.size(); ++i) {
    CHECK_THAT(w[i], Catch::Matchers::WithinRel(1.0 / lam[i], 1e-4));
  }
}

TEST_CASE("precision_weights stay positive and below gamma", "[estimator]") {
  RngStream rng(32);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t d = 1 + rng.next_u64() % 10;
    std::vector<double> lam(d);
    for (auto& l : lam) l = std::exp(rng.uniform(std::log(0.1), std::log(10.0)));
    const double gamma = std::exp(rng.uniform(std::log(1e-3), std::log(1e6)));
    for (double x : precision_weights(lam, gamma)) {
      CHECK(x > 0.0);
      CHECK(x <= gamma * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("estimate_precision composes the scalar pieces", "[estimator]") {
  const PrecisionEstimate est = estimate_precision(SymMatrix(1, {1.0}), 0.5);
  CHECK_THAT(est.x(0, 0), Catch::Matchers::WithinAbs(4.0 / 9.0, 1e-9));
  REQUIRE(est.gamma.has_value());
  CHECK_THAT(est.gamma->gamma, Catch::Matchers::WithinAbs(4.0 / 3.0, 1e-9));
  REQUIRE(est.weights.size() == 1);
}

TEST_CASE("estimate_precision at radius zero is the plain inverse", "[estimator]") {
  RngStream rng(33);
  const SymMatrix sigma = random_spd(4, rng, 0.2, 5.0);
  const PrecisionEstimate est = estimate_precision(sigma, 0.0);
  CHECK_FALSE(est.gamma.has_value());
  CHECK(test::frob_dist(est.x, spd_inverse(sigma)) <= 1e-10 * frob_norm(est.x));
}

TEST_CASE("estimate_precision keeps diagonal inputs diagonal", "[estimator]") {
  const PrecisionEstimate est = estimate_precision(SymMatrix::diag({2.0, 5.0}), 0.3);
  CHECK(est.x(0, 1) == 0.0);
  CHECK(est.x(0, 0) > est.x(1, 1));
}

TEST_CASE("estimate_precision invariants on random inputs", "[estimator]") {
  RngStream rng(34);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t d = 1 + rng.next_u64() % 6;
    const SymMatrix sigma = random_spd(d, rng, 0.1, 10.0);
    const double rho = std::exp(rng.uniform(std::log(1e-3), std::log(2.0)));
    const PrecisionEstimate est = estimate_precision(sigma, rho);

    const SpectralDecomp s = eig_sym(est.x);
    CHECK(s.eigenvalues.front() > 0.0);

    const Matrix xm = est.x.to_matrix();
    const Matrix sm = sigma.to_matrix();
    Matrix comm(d, d);
    const Matrix xs = xm * sm;
    const Matrix sx = sm * xm;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) comm(i, j) = xs(i, j) - sx(i, j);
    }
    CHECK(frob_norm(comm) <= 1e-8 * frob_norm(est.x) * frob_norm(sigma));

    REQUIRE(est.gamma.has_value());
    const double gamma = est.gamma->gamma;
    for (double w : est.weights) CHECK(w <= gamma * (1.0 + 1e-12));
    CHECK(gamma <= static_cast<double>(d) / (rho * rho) * (1.0 + 1e-12));
  }
}

TEST_CASE("estimate_precision is basis invariant", "[estimator]") {
  RngStream rng(35);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t d = 2 + rng.next_u64() % 4;
    const SymMatrix sigma = random_spd(d, rng, 0.2, 5.0);
    const Matrix q = eig_sym(random_symmetric(d, rng)).eigenvectors;

    const SymMatrix rotated = symmetrize(q * sigma.to_matrix() * transpose(q));
    const SymMatrix lhs = estimate_precision(rotated, 0.4).x;
    const SymMatrix rhs =
        symmetrize(q * estimate_precision(sigma, 0.4).x.to_matrix() * transpose(q));
    CHECK(test::frob_dist(lhs, rhs) <= 1e-8 * std::max(1.0, frob_norm(rhs)));
  }
}

TEST_CASE("estimate_precision is continuous at radius zero", "[estimator]") {
  RngStream rng(36);
  const SymMatrix sigma = random_spd(3, rng, 0.3, 4.0);
  const SymMatrix inv = spd_inverse(sigma);
  const SymMatrix near = estimate_precision(sigma, 1e-6).x;
  CHECK(test::frob_dist(near, inv) <= 1e-3 * frob_norm(inv));
}

TEST_CASE("estimate_precision rejects bad inputs", "[estimator]") {
  CHECK_THROWS_AS(estimate_precision(SymMatrix(2, {1.0, 2.0, 2.0, 1.0}), 0.5), NotSpdError);
  CHECK_THROWS_AS(estimate_precision(SymMatrix::identity(2), -0.5), std::invalid_argument);
}

TEST_CASE("shrinkage is monotone in the radius", "[estimator]") {
  RngStream rng(37);
  const SymMatrix sigma_hat = random_spd(4, rng, 0.2, 5.0);
  const SymMatrix sigma0 = random_spd(4, rng, 0.2, 5.0);
  double prev_logdet = logdet_spd(estimate_precision(sigma_hat, 0.0).x) + 1e-10;
  double prev_inner = frob_inner(estimate_precision(sigma_hat, 0.0).x, sigma0) + 1e-10;
  for (double rho : {0.01, 0.05, 0.1, 0.3, 0.6, 1.0, 1.5, 2.0}) {
    const SymMatrix x = estimate_precision(sigma_hat, rho).x;
    const double ld = logdet_spd(x);
    const double inner = frob_inner(x, sigma0);
    CHECK(ld <= prev_logdet + 1e-10);
    CHECK(inner <= prev_inner + 1e-10);
    prev_logdet = ld;
    prev_inner = inner;
  }
}

TEST_CASE("a_hat evaluates the first-order coefficient", "[estimator]") {
  CHECK_THAT(a_hat(SymMatrix(1, {1.0}))(0, 0), Catch::Matchers::WithinAbs(-2.0, 1e-12));

  const SymMatrix at_identity = a_hat(SymMatrix::identity(3));
  CHECK_THAT(at_identity(0, 0), Catch::Matchers::WithinAbs(-2.0 / std::sqrt(3.0), 1e-12));
  CHECK_THAT(at_identity(0, 1), Catch::Matchers::WithinAbs(0.0, 1e-12));

  const SymMatrix diag_case = a_hat(SymMatrix::diag({2.0, 4.0}));
  CHECK_THAT(diag_case(0, 0), Catch::Matchers::WithinAbs(-0.57735026918962573, 1e-10));
  CHECK_THAT(diag_case(1, 1), Catch::Matchers::WithinAbs(-0.14433756729740643, 1e-10));

  RngStream rng(38);
  const SymMatrix a = a_hat(random_spd(4, rng, 0.2, 5.0));
  CHECK(eig_sym(a).eigenvalues.back() < 0.0);

  CHECK_THROWS_AS(a_hat(SymMatrix(2, {1.0, 2.0, 2.0, 1.0})), NotSpdError);
}

TEST_CASE("m_hat evaluates the envelope constant", "[estimator]") {
  CHECK(m_hat({1.0}) == 8.0);
  CHECK(m_hat({1.0, 1.0, 1.0, 1.0}) == 4.0);
  CHECK(m_hat({0.5, 2.0}) == 16.0);
  CHECK_THROWS_AS(m_hat({1.0, 0.0}), std::invalid_argument);
}

TEST_CASE("taylor_diagnostics gaps shrink at the expansion base point", "[estimator]") {
  const TaylorDiagnostics diag = taylor_diagnostics(SymMatrix(1, {1.0}), 1e-8);
  CHECK(frob_norm(diag.derivative_gap) <= 1e-5);
  CHECK(frob_norm(diag.inverse_gap) <= 1e-12);
}

TEST_CASE("taylor_diagnostics sandwich holds on the scalar case", "[estimator]") {
  const TaylorDiagnostics diag = taylor_diagnostics(SymMatrix(1, {1.0}), 0.1);
  CHECK(diag.m_hat == 8.0);
  CHECK(diag.sandwich_ok.first);
  CHECK(diag.sandwich_ok.second);
  CHECK(diag.derivative_slack >= 0.0);
  CHECK(diag.inverse_slack >= 0.0);
}

TEST_CASE("taylor_diagnostics sandwich holds on random 3x3 inputs", "[estimator]") {
  RngStream rng(39);
  for (int rep = 0; rep < 5; ++rep) {
    const SymMatrix sigma = random_spd(3, rng, 0.3, 3.0);
    for (double rho : {1e-3, 1e-2, 1e-1}) {
      const TaylorDiagnostics diag = taylor_diagnostics(sigma, rho);
      CHECK(diag.sandwich_ok.first);
      CHECK(diag.sandwich_ok.second);
    }
  }
}

TEST_CASE("taylor_diagnostics rejects radii outside (0, 1]", "[estimator]") {
  CHECK_THROWS_AS(taylor_diagnostics(SymMatrix::identity(2), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(taylor_diagnostics(SymMatrix::identity(2), 1.5), std::invalid_argument);
}
