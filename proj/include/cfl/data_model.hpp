// Sparse-coding data distribution and the complementary-mask augmentation.
//
// Inputs are x = M z + xi with M column-orthonormal (d1 x d), z ternary
// symmetric sparse, xi spherical Gaussian. The augmentation splits x into
// two views on complementary coordinate sets: x+ = 2Dx, x++ = 2(I-D)x.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cfl/linalg.hpp"
#include "cfl/rng.hpp"

namespace cfl {

struct Dictionary {
  Mat64 M;  // d1 x d, columns orthonormal
  std::size_t d = 0;
  std::size_t d1 = 0;
  double infinity_bound = 0.0;  // max_j ||M_j||_inf
  int rejection_retries = 0;    // QR draws discarded before acceptance

  // <x, M_j> for all j, i.e. M^T x.
  Vec64 project(const Vec64& x) const { return matvec_t(M, x); }
};

struct LatentConfig {
  double p_active = 0.0;  // Pr(|z_j| = 1); split evenly between +1 and -1

  static LatentConfig from_cz(double cz, std::size_t d) {
    LatentConfig c;
    c.p_active = cz * std::log(std::log(static_cast<double>(d))) / static_cast<double>(d);
    return c;
  }
  void validate() const {
    require(p_active >= 0.0 && p_active <= 1.0, "p_active must be in [0,1]");
  }
};

struct NoiseConfig {
  double sigma_xi_sq = 0.0;

  static NoiseConfig defaults(std::size_t d) {
    NoiseConfig c;
    c.sigma_xi_sq = std::sqrt(std::log(static_cast<double>(d))) / static_cast<double>(d);
    return c;
  }
};

struct Sample {
  Vec64 z;   // {-1, 0, +1}^d
  Vec64 xi;  // R^{d1}
  Vec64 x;   // M z + xi
};

struct AugmentedPair {
  std::vector<std::uint8_t> mask;  // diagonal of D
  Vec64 x_plus;                    // 2 D x
  Vec64 x_plusplus;                // 2 (I - D) x
};

inline Dictionary build_dictionary(std::size_t d, std::size_t d1, double c_inf,
                                   SeededRng& rng, int retry_budget = 100) {
  require(d >= 1 && d <= d1, "build_dictionary: need 1 <= d <= d1");
  const double bound =
      c_inf * std::sqrt(std::log(static_cast<double>(d1)) / static_cast<double>(d1));
  for (int attempt = 0; attempt <= retry_budget; ++attempt) {
    Mat64 Q = qr_orthonormalize(gaussian_matrix(rng, d1, d, 1.0));
    double worst = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double colmax = 0.0;
      for (std::size_t r = 0; r < d1; ++r) colmax = std::max(colmax, std::fabs(Q(r, j)));
      worst = std::max(worst, colmax);
    }
    if (worst <= bound || d1 == 1) {
      Dictionary dict;
      dict.M = std::move(Q);
      dict.d = d;
      dict.d1 = d1;
      dict.infinity_bound = worst;
      dict.rejection_retries = attempt;
      return dict;
    }
  }
  throw NumericError(
      "build_dictionary: retry budget exhausted; c_inf too tight for this d1");
}

inline Vec64 sample_latent(const LatentConfig& cfg, std::size_t d, SeededRng& rng) {
  cfg.validate();
  Vec64 z(d, 0.0);
  for (auto& zj : z)
    if (rng.bernoulli(cfg.p_active)) zj = rng.bernoulli(0.5) ? 1.0 : -1.0;
  return z;
}

inline Sample sample_input(const Dictionary& dict, const LatentConfig& lat,
                           const NoiseConfig& noise, SeededRng& rng) {
  Sample s;
  s.z = sample_latent(lat, dict.d, rng);
  s.xi = Vec64(dict.d1);
  const double sigma = std::sqrt(noise.sigma_xi_sq);
  for (auto& v : s.xi) v = sigma * rng.gaussian();
  s.x = s.xi;
  for (std::size_t j = 0; j < dict.d; ++j) {
    if (s.z[j] == 0.0) continue;
    for (std::size_t r = 0; r < dict.d1; ++r) s.x[r] += s.z[j] * dict.M(r, j);
  }
  return s;
}

// Applies a given mask; exposed so tests can force D.
inline AugmentedPair apply_mask(const Vec64& x, std::vector<std::uint8_t> mask) {
  require(mask.size() == x.size(), "apply_mask: mask/input size mismatch");
  AugmentedPair p;
  p.x_plus = Vec64(x.size());
  p.x_plusplus = Vec64(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    p.x_plus[i] = mask[i] ? 2.0 * x[i] : 0.0;
    p.x_plusplus[i] = mask[i] ? 0.0 : 2.0 * x[i];
  }
  p.mask = std::move(mask);
  return p;
}

inline AugmentedPair random_mask(const Vec64& x, SeededRng& rng) {
  std::vector<std::uint8_t> mask(x.size());
  for (auto& b : mask) b = rng.bernoulli(0.5) ? 1 : 0;
  return apply_mask(x, std::move(mask));
}

inline std::vector<Sample> sample_negatives(const Dictionary& dict,
                                            const LatentConfig& lat,
                                            const NoiseConfig& noise,
                                            std::size_t count, SeededRng& rng) {
  require(count >= 1, "sample_negatives: count must be >= 1");
  std::vector<Sample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample_input(dict, lat, noise, rng));
  return out;
}

}  // namespace cfl
