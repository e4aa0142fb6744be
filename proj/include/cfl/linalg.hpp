// Small dense 64-bit linear algebra: vectors, row-major matrices, modified
// Gram-Schmidt QR, Cholesky SPD solve. Sizes here are tiny (d <= 128,
// d1 <= 4096); no blocking, no BLAS. Every op validates dimensions.
#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfl/rng.hpp"

namespace cfl {

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Vec64 = std::vector<double>;

inline void require(bool cond, const std::string& what) {
  if (!cond) throw DimensionError(what);
}

class Mat64 {
 public:
  Mat64() = default;
  Mat64(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return a_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return a_[r * cols_ + c]; }
  double* row(std::size_t r) { return a_.data() + r * cols_; }
  const double* row(std::size_t r) const { return a_.data() + r * cols_; }
  std::vector<double>& data() { return a_; }
  const std::vector<double>& data() const { return a_; }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> a_;
};

inline double dot(const Vec64& a, const Vec64& b) {
  require(a.size() == b.size(), "dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec64& a) { return std::sqrt(dot(a, a)); }

inline void axpy(double alpha, const Vec64& x, Vec64& y) {
  require(x.size() == y.size(), "axpy: size mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

// y = A x
inline Vec64 matvec(const Mat64& A, const Vec64& x) {
  require(A.cols() == x.size(), "matvec: size mismatch");
  Vec64 y(A.rows());
  for (std::size_t r = 0; r < A.rows(); ++r) y[r] = dot(A.row(r), x.data(), A.cols());
  return y;
}

// y = A^T x
inline Vec64 matvec_t(const Mat64& A, const Vec64& x) {
  require(A.rows() == x.size(), "matvec_t: size mismatch");
  Vec64 y(A.cols(), 0.0);
  for (std::size_t r = 0; r < A.rows(); ++r) {
    const double xr = x[r];
    const double* ar = A.row(r);
    for (std::size_t c = 0; c < A.cols(); ++c) y[c] += ar[c] * xr;
  }
  return y;
}

inline Mat64 gaussian_matrix(SeededRng& rng, std::size_t rows, std::size_t cols,
                             double sigma) {
  Mat64 A(rows, cols);
  for (auto& v : A.data()) v = sigma * rng.gaussian();
  return A;
}

inline Vec64 gaussian_vector(SeededRng& rng, std::size_t n, double sigma) {
  require(n >= 1, "gaussian_vector: n must be >= 1");
  require(sigma >= 0.0, "gaussian_vector: sigma must be >= 0");
  Vec64 v(n);
  for (auto& x : v) x = sigma * rng.gaussian();
  return v;
}

// Modified Gram-Schmidt with one re-orthogonalization pass; returns Q with
// Q^T Q = I to 1e-10 and span(Q) = span(A). Throws on rank deficiency.
inline Mat64 qr_orthonormalize(const Mat64& A) {
  const std::size_t n = A.rows(), k = A.cols();
  require(n >= k && k >= 1, "qr_orthonormalize: need rows >= cols >= 1");
  // Work column-wise; columns stored contiguously for the inner loops.
  std::vector<Vec64> q(k, Vec64(n));
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t r = 0; r < n; ++r) q[j][r] = A(r, j);
  for (std::size_t j = 0; j < k; ++j) {
    const double incoming = norm2(q[j]);
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t i = 0; i < j; ++i) axpy(-dot(q[i], q[j]), q[i], q[j]);
    const double nj = norm2(q[j]);
    if (!(nj > 1e-12 * (incoming > 0 ? incoming : 1.0)))
      throw NumericError("qr_orthonormalize: rank-deficient input");
    for (auto& v : q[j]) v /= nj;
  }
  Mat64 Q(n, k);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t r = 0; r < n; ++r) Q(r, j) = q[j][r];
  return Q;
}

// Cholesky solve for symmetric positive definite A.
inline Vec64 solve_spd(const Mat64& A, const Vec64& b) {
  const std::size_t n = A.rows();
  require(A.cols() == n && b.size() == n, "solve_spd: size mismatch");
  Mat64 L(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = A(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      if (i == j) {
        if (!(s > 0.0)) throw NumericError("solve_spd: matrix not positive definite");
        L(i, i) = std::sqrt(s);
      } else {
        L(i, j) = s / L(j, j);
      }
    }
  }
  Vec64 y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= L(i, k) * y[k];
    y[i] = s / L(i, i);
  }
  Vec64 x(n);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= L(k, ii) * x[k];
    x[ii] = s / L(ii, ii);
  }
  return x;
}

}  // namespace cfl
