#include <catch2/catch_amalgamated.hpp>

#include "cfl/linalg.hpp"

using namespace cfl;

namespace {
double max_gram_residual(const Mat64& Q) {
  double worst = 0.0;
  for (std::size_t i = 0; i < Q.cols(); ++i)
    for (std::size_t j = 0; j < Q.cols(); ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < Q.rows(); ++r) s += Q(r, i) * Q(r, j);
      worst = std::max(worst, std::fabs(s - (i == j ? 1.0 : 0.0)));
    }
  return worst;
}
}  // namespace

TEST_CASE("dot/matvec validate dimensions", "[linalg]") {
  REQUIRE_THROWS_AS(dot(Vec64{1.0}, Vec64{1.0, 2.0}), DimensionError);
  Mat64 A(2, 3);
  REQUIRE_THROWS_AS(matvec(A, Vec64{1.0, 2.0}), DimensionError);
  REQUIRE_THROWS_AS(matvec_t(A, Vec64{1.0, 2.0, 3.0}), DimensionError);
}

TEST_CASE("qr_orthonormalize: identity input", "[linalg]") {
  Mat64 I3(3, 3);
  for (int i = 0; i < 3; ++i) I3(i, i) = 1.0;
  const Mat64 Q = qr_orthonormalize(I3);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c)
      REQUIRE(std::fabs(std::fabs(Q(r, c)) - (r == c ? 1.0 : 0.0)) < 1e-14);
}

TEST_CASE("qr_orthonormalize: single column", "[linalg]") {
  Mat64 A(2, 1);
  A(0, 0) = 2.0;
  const Mat64 Q = qr_orthonormalize(A);
  REQUIRE(std::fabs(std::fabs(Q(0, 0)) - 1.0) < 1e-15);
  REQUIRE(Q(1, 0) == 0.0);
}

TEST_CASE("qr_orthonormalize: random 64x8 residual", "[linalg]") {
  SeededRng rng(5, Stream::init);
  const Mat64 Q = qr_orthonormalize(gaussian_matrix(rng, 64, 8, 1.0));
  REQUIRE(max_gram_residual(Q) <= 1e-10);
}

TEST_CASE("qr_orthonormalize: rank-deficient input throws", "[linalg]") {
  Mat64 A(4, 2);
  for (int r = 0; r < 4; ++r) {
    A(r, 0) = r + 1.0;
    A(r, 1) = 2.0 * (r + 1.0);  // second column is a multiple of the first
  }
  REQUIRE_THROWS_AS(qr_orthonormalize(A), NumericError);
}

TEST_CASE("solve_spd: identity and diagonal", "[linalg]") {
  Mat64 I2(2, 2);
  I2(0, 0) = I2(1, 1) = 1.0;
  const Vec64 b{3.0, -7.0};
  REQUIRE(solve_spd(I2, b) == b);

  Mat64 D(2, 2);
  D(0, 0) = 2.0;
  D(1, 1) = 4.0;
  const Vec64 x = solve_spd(D, Vec64{2.0, 8.0});
  REQUIRE(std::fabs(x[0] - 1.0) < 1e-15);
  REQUIRE(std::fabs(x[1] - 2.0) < 1e-15);
}

TEST_CASE("solve_spd: random SPD 20x20 residual", "[linalg]") {
  SeededRng rng(11, Stream::init);
  const std::size_t n = 20;
  const Mat64 B = gaussian_matrix(rng, n, n, 1.0);
  Mat64 A(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) A(i, j) += B(i, k) * B(j, k);
      if (i == j) A(i, j) += 0.1;
    }
  const Vec64 b = gaussian_vector(rng, n, 1.0);
  const Vec64 x = solve_spd(A, b);
  Vec64 r = matvec(A, x);
  axpy(-1.0, b, r);
  REQUIRE(norm2(r) <= 1e-8 * norm2(b));
}

TEST_CASE("solve_spd: non-SPD matrix throws", "[linalg]") {
  Mat64 A(2, 2);
  A(0, 0) = 1.0;
  A(1, 1) = -1.0;
  REQUIRE_THROWS_AS(solve_spd(A, Vec64{1.0, 1.0}), NumericError);
}
