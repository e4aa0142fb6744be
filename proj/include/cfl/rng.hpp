// Counter-based deterministic PRNG with independent substreams.
//
// Output for a given (seed, stream, counter) triple is a fixed integer mixing
// function, so any substream can be replayed without generating the others.
// Gaussian convention (fixed for cross-language reproducibility):
//   u1 = uniform64(c), u2 = uniform64(c+1), both in (0,1]
//   r = sqrt(-2 ln u1), g0 = r cos(2 pi u2), g1 = r sin(2 pi u2)
// Draws are consumed g0-first; the sine draw is cached.
#pragma once

#include <cmath>
#include <cstdint>

namespace cfl {

// Well-known stream ids. Anything else is fine too; equal ids collide.
enum class Stream : std::uint64_t {
  data = 1,
  init = 2,
  masks = 3,
  negatives = 4,
  probes = 5,
};

namespace detail {
// splitmix64 finalizer (Vigna); full-avalanche 64 -> 64 mix.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

class SeededRng {
 public:
  SeededRng(std::uint64_t seed, std::uint64_t stream)
      : key_(detail::mix64(detail::mix64(seed) ^ detail::mix64(~stream))) {}
  SeededRng(std::uint64_t seed, Stream stream)
      : SeededRng(seed, static_cast<std::uint64_t>(stream)) {}

  std::uint64_t next_u64() { return detail::mix64(key_ ^ detail::mix64(counter_++)); }

  // Uniform on (0, 1]: top 53 bits, never exactly 0 (safe inside log()).
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return uniform() <= p; }

  double gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  // Position for replay diagnostics.
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace cfl
