// One-hidden-layer encoder with odd soft-threshold ("symmetrized ReLU")
// neurons: h_i(x) = sign(u) max(|u| - b_i, 0), u = <w_i, x>.
//
// Activation boundary convention: a neuron counts as active when |u| >= b_i
// (subgradient 1 at the kink). Biases are never trained by gradient; the
// trainer moves them on a manual schedule.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "cfl/linalg.hpp"
#include "cfl/rng.hpp"

namespace cfl {

struct InitConfig {
  double sigma0_sq = 0.0;

  static InitConfig defaults(std::size_t d, std::size_t d1) {
    InitConfig c;
    c.sigma0_sq = 1.0 / (static_cast<double>(d1) * static_cast<double>(d) *
                         static_cast<double>(d));
    return c;
  }
};

struct NetworkParams {
  Mat64 W;   // m x d1, rows are neuron weights
  Vec64 b;   // m, all >= 0
  Mat64 W0;  // init snapshot; written once, never mutated
  std::size_t m = 0;
  std::size_t d1 = 0;
};

struct ForwardResult {
  Vec64 rep;                         // f(x)
  Vec64 pre;                         // u_i = <w_i, x>
  std::vector<std::uint8_t> active;  // 1{|u_i| >= b_i}
};

inline NetworkParams init_params(std::size_t m, std::size_t d1, const InitConfig& cfg,
                                 SeededRng& rng) {
  require(m >= 1 && d1 >= 1, "init_params: need m >= 1, d1 >= 1");
  require(cfg.sigma0_sq >= 0.0, "init_params: sigma0_sq must be >= 0");
  NetworkParams p;
  p.m = m;
  p.d1 = d1;
  p.W = gaussian_matrix(rng, m, d1, std::sqrt(cfg.sigma0_sq));
  p.b = Vec64(m, 0.0);
  p.W0 = p.W;
  return p;
}

inline double soft_threshold(double u, double b) {
  const double mag = std::fabs(u) - b;
  return mag > 0.0 ? (u > 0.0 ? mag : -mag) : 0.0;
}

inline ForwardResult forward(const NetworkParams& p, const Vec64& x) {
  require(x.size() == p.d1, "forward: input dimension mismatch");
  ForwardResult r;
  r.pre = matvec(p.W, x);
  r.rep = Vec64(p.m);
  r.active.resize(p.m);
  for (std::size_t i = 0; i < p.m; ++i) {
    r.active[i] = std::fabs(r.pre[i]) >= p.b[i] ? 1 : 0;
    r.rep[i] = soft_threshold(r.pre[i], p.b[i]);
  }
  return r;
}

// Representation only, written into out (no allocation) for hot loops.
inline void forward_rep(const NetworkParams& p, const Vec64& x, Vec64& out) {
  require(x.size() == p.d1, "forward_rep: input dimension mismatch");
  out.resize(p.m);
  for (std::size_t i = 0; i < p.m; ++i)
    out[i] = soft_threshold(dot(p.W.row(i), x.data(), p.d1), p.b[i]);
}

// d h_i / d w_i = 1{|u_i| >= b_i} x. The bias has no gradient by design.
inline Vec64 weight_jacobian_row(const NetworkParams& p, const Vec64& x, std::size_t i) {
  require(i < p.m, "weight_jacobian_row: neuron index out of range");
  const ForwardResult r = forward(p, x);
  return r.active[i] ? x : Vec64(p.d1, 0.0);
}

// Checkpoint layout: magic, u64 m, u64 d1, then f64 row-major W, b, W0.
// Little-endian on-disk; loading on a big-endian host is refused.
inline constexpr char kCheckpointMagic[8] = {'C', 'F', 'L', 'N', 'E', 'T', '0', '1'};

inline bool host_is_little_endian() {
  const std::uint16_t probe = 1;
  std::uint8_t first;
  std::memcpy(&first, &probe, 1);
  return first == 1;
}

inline void save_checkpoint(const NetworkParams& p, const std::string& path) {
  if (!host_is_little_endian()) throw NumericError("checkpoint: big-endian host unsupported");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw NumericError("checkpoint: cannot open " + path + " for writing");
  f.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::uint64_t m = p.m, d1 = p.d1;
  f.write(reinterpret_cast<const char*>(&m), 8);
  f.write(reinterpret_cast<const char*>(&d1), 8);
  auto write_block = [&f](const std::vector<double>& v) {
    f.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
  };
  write_block(p.W.data());
  write_block(p.b);
  write_block(p.W0.data());
  if (!f) throw NumericError("checkpoint: write failed for " + path);
}

inline NetworkParams load_checkpoint(const std::string& path) {
  if (!host_is_little_endian()) throw NumericError("checkpoint: big-endian host unsupported");
  std::ifstream f(path, std::ios::binary);
  if (!f) throw NumericError("checkpoint: cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw NumericError("checkpoint: bad magic in " + path);
  std::uint64_t m = 0, d1 = 0;
  f.read(reinterpret_cast<char*>(&m), 8);
  f.read(reinterpret_cast<char*>(&d1), 8);
  if (!f || m == 0 || d1 == 0) throw NumericError("checkpoint: bad header in " + path);
  NetworkParams p;
  p.m = m;
  p.d1 = d1;
  p.W = Mat64(m, d1);
  p.b = Vec64(m);
  p.W0 = Mat64(m, d1);
  auto read_block = [&f](std::vector<double>& v) {
    f.read(reinterpret_cast<char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
  };
  read_block(p.W.data());
  read_block(p.b);
  read_block(p.W0.data());
  if (!f) throw NumericError("checkpoint: truncated file " + path);
  return p;
}

}  // namespace cfl
