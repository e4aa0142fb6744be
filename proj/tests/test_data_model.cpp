#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "cfl/data_model.hpp"

using namespace cfl;

namespace {
Dictionary desk_dict(std::uint64_t seed = 3) {
  SeededRng rng(seed, Stream::init);
  return build_dictionary(32, 256, 4.0, rng);
}
double max_gram_residual(const Mat64& M) {
  double worst = 0.0;
  for (std::size_t i = 0; i < M.cols(); ++i)
    for (std::size_t j = 0; j < M.cols(); ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < M.rows(); ++r) s += M(r, i) * M(r, j);
      worst = std::max(worst, std::fabs(s - (i == j ? 1.0 : 0.0)));
    }
  return worst;
}
}  // namespace

TEST_CASE("build_dictionary: 1x1 and orthonormality", "[data]") {
  SeededRng rng(1, Stream::init);
  const Dictionary one = build_dictionary(1, 1, 4.0, rng);
  REQUIRE(std::fabs(std::fabs(one.M(0, 0)) - 1.0) < 1e-14);

  SeededRng rng2(2, Stream::init);
  const Dictionary dict = build_dictionary(8, 64, 4.0, rng2);
  REQUIRE(max_gram_residual(dict.M) <= 1e-10);
}

TEST_CASE("build_dictionary: infinity bound acceptance rate over seeds", "[data]") {
  const double bound = 4.0 * std::sqrt(std::log(256.0) / 256.0);
  int first_try = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SeededRng rng(seed, Stream::init);
    const Dictionary dict = build_dictionary(8, 256, 4.0, rng);
    REQUIRE(dict.infinity_bound <= bound);
    first_try += (dict.rejection_retries == 0);
  }
  REQUIRE(first_try >= 90);
}

TEST_CASE("build_dictionary: impossible bound exhausts retries", "[data]") {
  SeededRng rng(0, Stream::init);
  REQUIRE_THROWS_AS(build_dictionary(8, 64, 0.01, rng, 5), NumericError);
}

TEST_CASE("sample_latent: degenerate activation probabilities", "[data]") {
  SeededRng rng(4, Stream::data);
  LatentConfig off;
  off.p_active = 0.0;
  REQUIRE(sample_latent(off, 16, rng) == Vec64(16, 0.0));
  LatentConfig on;
  on.p_active = 1.0;
  for (double zj : sample_latent(on, 16, rng)) REQUIRE(std::fabs(zj) == 1.0);
}

TEST_CASE("sample_latent: activation frequency within 3-sigma binomial band", "[data]") {
  const std::size_t d = 32, n = 100000;
  const LatentConfig cfg = LatentConfig::from_cz(2.0, d);
  SeededRng rng(5, Stream::data);
  std::size_t active = 0, plus = 0;
  for (std::size_t s = 0; s < n; ++s)
    for (double zj : sample_latent(cfg, d, rng)) {
      active += (zj != 0.0);
      plus += (zj > 0.0);
    }
  const double trials = static_cast<double>(n * d);
  const double p = cfg.p_active;
  const double sigma = std::sqrt(p * (1 - p) / trials);
  REQUIRE(std::fabs(active / trials - p) <= 3.0 * sigma);
  // sign symmetry: +1 and -1 equally likely among active coordinates
  const double half = static_cast<double>(plus) / static_cast<double>(active);
  REQUIRE(std::fabs(half - 0.5) <= 3.0 / (2.0 * std::sqrt(static_cast<double>(active))));
}

TEST_CASE("sample_input: degenerate and forced-latent cases", "[data]") {
  const Dictionary dict = desk_dict();
  SeededRng rng(6, Stream::data);
  LatentConfig lat;
  lat.p_active = 0.0;
  NoiseConfig noise;
  noise.sigma_xi_sq = 0.0;
  const Sample s = sample_input(dict, lat, noise, rng);
  REQUIRE(s.x == Vec64(256, 0.0));

  // z = e_j with no noise reproduces column j; orthonormality gives <x, M_j> = 1
  for (std::size_t j : {std::size_t{0}, std::size_t{7}}) {
    Vec64 x(dict.d1);
    for (std::size_t r = 0; r < dict.d1; ++r) x[r] = dict.M(r, j);
    const Vec64 proj = dict.project(x);
    REQUIRE(std::fabs(proj[j] - 1.0) <= 1e-12);
  }
}

TEST_CASE("sample_input: reconstruction identity x = Mz + xi", "[data]") {
  const Dictionary dict = desk_dict();
  const LatentConfig lat = LatentConfig::from_cz(2.0, 32);
  const NoiseConfig noise = NoiseConfig::defaults(32);
  SeededRng rng(7, Stream::data);
  for (int rep = 0; rep < 50; ++rep) {
    const Sample s = sample_input(dict, lat, noise, rng);
    Vec64 recon = s.xi;
    for (std::size_t j = 0; j < dict.d; ++j)
      for (std::size_t r = 0; r < dict.d1; ++r) recon[r] += s.z[j] * dict.M(r, j);
    for (std::size_t r = 0; r < dict.d1; ++r)
      REQUIRE(std::fabs(recon[r] - s.x[r]) <= 1e-12);
  }
}

TEST_CASE("sample_input: noise energy matches d1 sigma^2 within 2%", "[data]") {
  const Dictionary dict = desk_dict();
  const LatentConfig lat = LatentConfig::from_cz(2.0, 32);
  const NoiseConfig noise = NoiseConfig::defaults(32);
  SeededRng rng(8, Stream::data);
  double acc = 0.0;
  const std::size_t n = 10000;
  for (std::size_t s = 0; s < n; ++s) {
    const Sample smp = sample_input(dict, lat, noise, rng);
    acc += dot(smp.xi, smp.xi);
  }
  const double expected = 256.0 * noise.sigma_xi_sq;  // ~10.66
  REQUIRE(std::fabs(acc / n - expected) <= 0.02 * expected);
}

TEST_CASE("random_mask: exact identities", "[data]") {
  SeededRng rng(9, Stream::masks);
  const Vec64 zero(8, 0.0);
  const AugmentedPair pz = random_mask(zero, rng);
  REQUIRE(pz.x_plus == zero);
  REQUIRE(pz.x_plusplus == zero);

  Vec64 x{1.0, -2.0, 0.5, 3.0};
  const AugmentedPair forced = apply_mask(x, {1, 1, 1, 1});
  REQUIRE(forced.x_plus == Vec64{2.0, -4.0, 1.0, 6.0});
  REQUIRE(forced.x_plusplus == Vec64(4, 0.0));

  for (int rep = 0; rep < 200; ++rep) {
    const AugmentedPair p = random_mask(x, rng);
    for (std::size_t i = 0; i < x.size(); ++i)
      REQUIRE(p.x_plus[i] + p.x_plusplus[i] == 2.0 * x[i]);
    REQUIRE(dot(p.x_plus, p.x_plusplus) == 0.0);
  }
}

TEST_CASE("random_mask: Monte-Carlo mean of x_plus recovers x", "[data]") {
  SeededRng rng(10, Stream::masks);
  SeededRng data_rng(10, Stream::data);
  const Vec64 x = gaussian_vector(data_rng, 32, 1.0);
  Vec64 mean(x.size(), 0.0);
  const std::size_t n = 10000;
  for (std::size_t s = 0; s < n; ++s) axpy(1.0 / n, random_mask(x, rng).x_plus, mean);
  // per coordinate: x_plus_i is 2x_i or 0 w.p. 1/2, sd = |x_i|
  for (std::size_t i = 0; i < x.size(); ++i)
    REQUIRE(std::fabs(mean[i] - x[i]) <= 3.0 * std::fabs(x[i]) / std::sqrt(double(n)));
}

TEST_CASE("mask enumeration: exact mean and decoupling statistic at d1 = 10", "[data]") {
  const std::size_t d1 = 10;
  SeededRng rng(11, Stream::data);
  const Vec64 xi = gaussian_vector(rng, d1, 1.0);
  const Vec64 v = gaussian_vector(rng, d1, 1.0);

  Vec64 mean(d1, 0.0);
  double decouple = 0.0;
  const std::size_t total = std::size_t{1} << d1;
  for (std::size_t bits = 0; bits < total; ++bits) {
    std::vector<std::uint8_t> mask(d1);
    for (std::size_t i = 0; i < d1; ++i) mask[i] = (bits >> i) & 1;
    const AugmentedPair p = apply_mask(xi, mask);
    axpy(1.0 / double(total), p.x_plus, mean);
    decouple += dot(v, p.x_plus) * dot(v, p.x_plusplus) / double(total);
  }
  for (std::size_t i = 0; i < d1; ++i) REQUIRE(std::fabs(mean[i] - xi[i]) <= 1e-12);

  // E[<v,2Dxi><v,2(I-D)xi>] = <v,xi>^2 - sum_l v_l^2 xi_l^2 exactly
  double expected = dot(v, xi) * dot(v, xi);
  for (std::size_t i = 0; i < d1; ++i) expected -= v[i] * v[i] * xi[i] * xi[i];
  REQUIRE(std::fabs(decouple - expected) <= 1e-12);

  // Monte-Carlo over masks agrees with the enumeration within 3 standard errors
  SeededRng mrng(12, Stream::masks);
  const std::size_t n = 20000;
  double mc = 0.0, mc2 = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const AugmentedPair p = random_mask(xi, mrng);
    const double term = dot(v, p.x_plus) * dot(v, p.x_plusplus);
    mc += term / n;
    mc2 += term * term / n;
  }
  const double se = std::sqrt((mc2 - mc * mc) / n);
  REQUIRE(std::fabs(mc - expected) <= 3.0 * se);
}

TEST_CASE("sample_negatives: count, stream advance, pairwise noise coherence", "[data]") {
  const Dictionary dict = desk_dict();
  const LatentConfig lat = LatentConfig::from_cz(2.0, 32);
  const NoiseConfig noise = NoiseConfig::defaults(32);
  SeededRng rng(13, Stream::negatives);
  REQUIRE(sample_negatives(dict, lat, noise, 1, rng).size() == 1);

  const auto a = sample_negatives(dict, lat, noise, 2, rng);
  const auto b = sample_negatives(dict, lat, noise, 2, rng);
  REQUIRE(a[0].x != b[0].x);  // the stream advanced

  const auto negs = sample_negatives(dict, lat, noise, 64, rng);
  for (std::size_t i = 0; i < negs.size(); ++i)
    for (std::size_t j = i + 1; j < negs.size(); ++j) {
      const double c =
          dot(negs[i].xi, negs[j].xi) / (norm2(negs[i].xi) * norm2(negs[j].xi));
      REQUIRE(std::fabs(c) <= 5.0 / std::sqrt(256.0));
    }
}

TEST_CASE("noise projection on an atom concentrates near zero", "[data]") {
  // <xi, M_j> ~ N(0, sigma_xi^2): the tail beyond 0.5 is 2 Phi(-0.5/0.241),
  // about 0.038 at the desk noise level, far below the unit signal magnitude.
  const Dictionary dict = desk_dict();
  const NoiseConfig noise = NoiseConfig::defaults(32);
  SeededRng rng(14, Stream::data);
  const double sigma = std::sqrt(noise.sigma_xi_sq);
  const double analytic = std::erfc(0.5 / (sigma * std::sqrt(2.0)));
  Vec64 col(dict.d1);
  for (std::size_t r = 0; r < dict.d1; ++r) col[r] = dict.M(r, 0);
  std::size_t exceed = 0;
  const std::size_t n = 20000;
  for (std::size_t s = 0; s < n; ++s) {
    const Vec64 xi = gaussian_vector(rng, dict.d1, sigma);
    exceed += (std::fabs(dot(xi, col)) > 0.5);
  }
  const double rate = double(exceed) / double(n);
  REQUIRE(rate <= 0.05);
  REQUIRE(std::fabs(rate - analytic) <= 3.0 * std::sqrt(analytic * (1 - analytic) / n) + 1e-9);
}
