#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wdro/error.hpp"

namespace wdro {

/// Dense row-major matrix. General rectangular storage; used for sample data
/// and for intermediate products that are not symmetric.
class Matrix {
 public:
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(rows * cols, fill) {
    if (rows == 0 || cols == 0) {
      throw std::invalid_argument("Matrix: dimensions must be positive");
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

  const std::vector<double>& data() const { return a_; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> a_;
};

inline Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("Matrix product: inner dimensions differ");
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) {
        c(i, j) += aik * b(k, j);
      }
    }
  }
  return c;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  }
  return t;
}

inline double frob_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

/// Symmetric matrix with full row-major storage. Exact element symmetry is an
/// invariant: every constructor symmetrizes, every mutation writes both
/// triangles.
class SymMatrix {
 public:
  explicit SymMatrix(std::size_t dim) : dim_(dim), a_(dim * dim, 0.0) {
    if (dim == 0) throw std::invalid_argument("SymMatrix: dim must be >= 1");
  }

  /// Row-major entries; the (i,j)/(j,i) pair is averaged.
  SymMatrix(std::size_t dim, std::initializer_list<double> rowmajor) : SymMatrix(dim) {
    if (rowmajor.size() != dim * dim) {
      throw std::invalid_argument("SymMatrix: initializer size must be dim*dim");
    }
    std::copy(rowmajor.begin(), rowmajor.end(), a_.begin());
    symmetrize_storage();
  }

  /// Builds (m + m^T)/2 from a square matrix.
  explicit SymMatrix(const Matrix& m) : SymMatrix(m.rows()) {
    if (m.rows() != m.cols()) {
      throw std::invalid_argument("SymMatrix: source matrix must be square");
    }
    for (std::size_t i = 0; i < dim_; ++i) {
      for (std::size_t j = 0; j < dim_; ++j) a_[i * dim_ + j] = m(i, j);
    }
    symmetrize_storage();
  }

  static SymMatrix identity(std::size_t dim) {
    SymMatrix s(dim);
    for (std::size_t i = 0; i < dim; ++i) s.a_[i * dim + i] = 1.0;
    return s;
  }

  static SymMatrix diag(const std::vector<double>& d) {
    SymMatrix s(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) s.a_[i * d.size() + i] = d[i];
    return s;
  }

  std::size_t dim() const { return dim_; }

  double operator()(std::size_t i, std::size_t j) const { return a_[i * dim_ + j]; }

  /// Writes both (i,j) and (j,i).
  void set(std::size_t i, std::size_t j, double v) {
    a_[i * dim_ + j] = v;
    a_[j * dim_ + i] = v;
  }

  Matrix to_matrix() const {
    Matrix m(dim_, dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
      for (std::size_t j = 0; j < dim_; ++j) m(i, j) = a_[i * dim_ + j];
    }
    return m;
  }

  double trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) t += a_[i * dim_ + i];
    return t;
  }

  const std::vector<double>& data() const { return a_; }

 private:
  void symmetrize_storage() {
    for (std::size_t i = 0; i < dim_; ++i) {
      for (std::size_t j = i + 1; j < dim_; ++j) {
        const double v = 0.5 * (a_[i * dim_ + j] + a_[j * dim_ + i]);
        a_[i * dim_ + j] = v;
        a_[j * dim_ + i] = v;
      }
    }
  }

  std::size_t dim_;
  std::vector<double> a_;
};

inline void require_same_dim(const SymMatrix& a, const SymMatrix& b, const char* where) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument(std::string(where) + ": dimension mismatch");
  }
}

inline SymMatrix operator+(const SymMatrix& a, const SymMatrix& b) {
  require_same_dim(a, b, "SymMatrix sum");
  SymMatrix c(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i) {
    for (std::size_t j = i; j < a.dim(); ++j) c.set(i, j, a(i, j) + b(i, j));
  }
  return c;
}

inline SymMatrix operator-(const SymMatrix& a, const SymMatrix& b) {
  require_same_dim(a, b, "SymMatrix difference");
  SymMatrix c(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i) {
    for (std::size_t j = i; j < a.dim(); ++j) c.set(i, j, a(i, j) - b(i, j));
  }
  return c;
}

inline SymMatrix operator*(double s, const SymMatrix& a) {
  SymMatrix c(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i) {
    for (std::size_t j = i; j < a.dim(); ++j) c.set(i, j, s * a(i, j));
  }
  return c;
}

inline double frob_norm(const SymMatrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

/// Frobenius inner product <a, b> = tr(a b) for symmetric arguments.
inline double frob_inner(const SymMatrix& a, const SymMatrix& b) {
  require_same_dim(a, b, "frob_inner");
  double s = 0.0;
  const auto& x = a.data();
  const auto& y = b.data();
  for (std::size_t k = 0; k < x.size(); ++k) s += x[k] * y[k];
  return s;
}

/// Symmetrizes a square product whose asymmetry is pure roundoff.
inline SymMatrix symmetrize(const Matrix& m) { return SymMatrix(m); }

/// Eigendecomposition of a symmetric matrix.
/// eigenvalues are ascending; eigenvectors holds the matching unit vectors as
/// columns, so a == V diag(eigenvalues) V^T.
struct SpectralDecomp {
  std::vector<double> eigenvalues;
  Matrix eigenvectors;
};

namespace detail {

inline double offdiag_norm(const Matrix& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (i != j) s += m(i, j) * m(i, j);
    }
  }
  return std::sqrt(s);
}

}  // namespace detail

/// Cyclic Jacobi eigendecomposition. Deterministic: a fixed sweep order and a
/// fixed sign convention (largest-magnitude component of each eigenvector is
/// positive) make the output a pure function of the input.
inline SpectralDecomp eig_sym(const SymMatrix& a) {
  const std::size_t d = a.dim();
  Matrix m = a.to_matrix();
  Matrix v = Matrix::identity(d);
  const double scale = frob_norm(a);

  if (d > 1 && scale > 0.0) {
    const double thresh = 1e-14 * scale;
    const int max_sweeps = 100;
    bool converged = false;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
      if (detail::offdiag_norm(m) <= thresh) {
        converged = true;
        break;
      }
      for (std::size_t p = 0; p + 1 < d; ++p) {
        for (std::size_t q = p + 1; q < d; ++q) {
          const double apq = m(p, q);
          if (apq == 0.0) continue;
          const double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
          // t is the smaller-angle root of t^2 + 2 t theta - 1 = 0.
          double t;
          if (std::abs(theta) > 1e100) {
            t = 0.5 / theta;
          } else {
            t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
            if (theta < 0.0) t = -t;
          }
          const double c = 1.0 / std::sqrt(t * t + 1.0);
          const double s = t * c;
          const double tau = s / (1.0 + c);

          m(p, p) -= t * apq;
          m(q, q) += t * apq;
          m(p, q) = 0.0;
          m(q, p) = 0.0;
          for (std::size_t r = 0; r < d; ++r) {
            if (r == p || r == q) continue;
            const double arp = m(r, p);
            const double arq = m(r, q);
            m(r, p) = arp - s * (arq + tau * arp);
            m(p, r) = m(r, p);
            m(r, q) = arq + s * (arp - tau * arq);
            m(q, r) = m(r, q);
          }
          for (std::size_t r = 0; r < d; ++r) {
            const double vrp = v(r, p);
            const double vrq = v(r, q);
            v(r, p) = vrp - s * (vrq + tau * vrp);
            v(r, q) = vrq + s * (vrp - tau * vrq);
          }
        }
      }
    }
    if (!converged && detail::offdiag_norm(m) > thresh) {
      throw SolverError("eig_sym: Jacobi sweeps did not converge");
    }
  }

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&m](std::size_t i, std::size_t j) { return m(i, i) < m(j, j); });

  SpectralDecomp out{std::vector<double>(d), Matrix(d, d)};
  for (std::size_t k = 0; k < d; ++k) {
    const std::size_t src = order[k];
    out.eigenvalues[k] = m(src, src);
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t r = 0; r < d; ++r) {
      const double mag = std::abs(v(r, src));
      if (mag > best) {
        best = mag;
        arg = r;
      }
    }
    const double flip = v(arg, src) < 0.0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < d; ++r) out.eigenvectors(r, k) = flip * v(r, src);
  }
  return out;
}

/// V diag(vals) V^T for the eigenvector matrix of a SpectralDecomp.
inline SymMatrix spectral_rebuild(const Matrix& v, const std::vector<double>& vals) {
  const std::size_t d = v.rows();
  if (v.cols() != d || vals.size() != d) {
    throw std::invalid_argument("spectral_rebuild: dimension mismatch");
  }
  SymMatrix out(d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += vals[k] * v(i, k) * v(j, k);
      out.set(i, j, s);
    }
  }
  return out;
}

namespace detail {

// Positive-definiteness threshold used by the spectral routes: the smallest
// eigenvalue must clear 1e-12 * max(1, ||a||_F).
inline double spd_floor(double scale) { return 1e-12 * std::max(1.0, scale); }

inline void require_spd_spectrum(const std::vector<double>& eigs, double scale, const char* where) {
  if (eigs.front() <= spd_floor(scale)) {
    throw NotSpdError(std::string(where) + ": matrix is not positive definite");
  }
}

}  // namespace detail

/// Lower-triangular Cholesky factor L with L L^T = a.
inline Matrix cholesky_spd(const SymMatrix& a) {
  const std::size_t d = a.dim();
  Matrix l(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (s <= 0.0) {
          throw NotSpdError("cholesky_spd: non-positive pivot, matrix is not positive definite");
        }
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return l;
}

/// Inverse of an SPD matrix via its eigendecomposition.
inline SymMatrix spd_inverse(const SymMatrix& a) {
  const SpectralDecomp s = eig_sym(a);
  detail::require_spd_spectrum(s.eigenvalues, frob_norm(a), "spd_inverse");
  std::vector<double> inv(s.eigenvalues.size());
  for (std::size_t i = 0; i < inv.size(); ++i) inv[i] = 1.0 / s.eigenvalues[i];
  return spectral_rebuild(s.eigenvectors, inv);
}

/// Principal square root of a positive semidefinite matrix. Eigenvalues in
/// [-floor, 0) are treated as roundoff and clamped to zero.
inline SymMatrix sqrt_spd(const SymMatrix& a) {
  const SpectralDecomp s = eig_sym(a);
  const double floor = detail::spd_floor(frob_norm(a));
  std::vector<double> rt(s.eigenvalues.size());
  for (std::size_t i = 0; i < rt.size(); ++i) {
    const double lam = s.eigenvalues[i];
    if (lam < -floor) {
      throw NotSpdError("sqrt_spd: matrix is not positive semidefinite");
    }
    rt[i] = lam > 0.0 ? std::sqrt(lam) : 0.0;
  }
  return spectral_rebuild(s.eigenvectors, rt);
}

/// log det of an SPD matrix, computed as the sum of log eigenvalues.
inline double logdet_spd(const SymMatrix& a) {
  const SpectralDecomp s = eig_sym(a);
  detail::require_spd_spectrum(s.eigenvalues, frob_norm(a), "logdet_spd");
  double ld = 0.0;
  for (double lam : s.eigenvalues) ld += std::log(lam);
  return ld;
}

}  // namespace wdro
