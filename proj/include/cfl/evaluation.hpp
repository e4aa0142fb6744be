// Diagnostics and downstream probes on frozen encoders.
//
// Dense energy is computed as ||w||^2 - ||M^T w||^2; the orthocomplement
// basis is never materialized.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "cfl/data_model.hpp"
#include "cfl/network.hpp"

namespace cfl {

struct NeuronAlignment {
  double sparse_energy = 0.0;  // ||M^T w_i||^2
  double dense_energy = 0.0;   // ||w_i||^2 - sparse_energy
  std::size_t top_atom = 0;    // argmax_j |<w_i, M_j>|
  double top_value = 0.0;      // |<w_i, M_top>|
  double second_value = 0.0;
  double singleton_score = 0.0;  // top^2 / sparse_energy
};

struct AlignmentStats {
  std::vector<NeuronAlignment> neurons;
  std::vector<std::size_t> winner_count;  // per atom: singleton neurons topping it
  std::vector<double> max_coord;          // per atom: max_i |<w_i, M_j>|
  double singleton_threshold = 0.5;

  double mean_sparse_fraction() const {
    double s = 0.0;
    for (const auto& n : neurons) s += n.sparse_energy / (n.sparse_energy + n.dense_energy);
    return s / static_cast<double>(neurons.size());
  }
  double atom_coverage() const {
    std::size_t covered = 0;
    for (std::size_t c : winner_count) covered += (c >= 1);
    return static_cast<double>(covered) / static_cast<double>(winner_count.size());
  }
};

inline AlignmentStats alignment_stats(const NetworkParams& p, const Dictionary& dict,
                                      double singleton_threshold = 0.5) {
  require(p.d1 == dict.d1, "alignment_stats: dimension mismatch");
  AlignmentStats out;
  out.singleton_threshold = singleton_threshold;
  out.neurons.resize(p.m);
  out.winner_count.assign(dict.d, 0);
  out.max_coord.assign(dict.d, 0.0);
  for (std::size_t i = 0; i < p.m; ++i) {
    Vec64 wi(p.W.row(i), p.W.row(i) + p.d1);
    const Vec64 proj = dict.project(wi);
    NeuronAlignment& n = out.neurons[i];
    for (std::size_t j = 0; j < dict.d; ++j) {
      const double a = std::fabs(proj[j]);
      n.sparse_energy += proj[j] * proj[j];
      out.max_coord[j] = std::max(out.max_coord[j], a);
      if (a > n.top_value) {
        n.second_value = n.top_value;
        n.top_value = a;
        n.top_atom = j;
      } else if (a > n.second_value) {
        n.second_value = a;
      }
    }
    n.dense_energy = dot(wi, wi) - n.sparse_energy;
    n.singleton_score =
        n.sparse_energy > 0.0 ? n.top_value * n.top_value / n.sparse_energy : 0.0;
    if (n.singleton_score >= singleton_threshold) out.winner_count[n.top_atom] += 1;
  }
  return out;
}

// Init-time neuron sets predicting which neurons win an atom: an index is in
// the plain set when its projection on that atom clears the c2 log d / d
// threshold, and in the starred set when it clears c1 on that atom while
// staying under c2 on every other atom (c1 = 2 + 2(1-gamma)c0, c2 = c1 -
// gamma c0, so starred implies plain).
struct LuckySets {
  std::vector<std::vector<std::size_t>> atom_set;          // threshold c2
  std::vector<std::vector<std::size_t>> atom_star_set;     // two-sided, c1/c2
  double c0 = 0.01, gamma = 0.005, c1 = 0.0, c2 = 0.0;
};

inline LuckySets lucky_sets(const NetworkParams& p, const Dictionary& dict,
                            double gamma = 0.005, double c0 = 0.01) {
  LuckySets ls;
  ls.c0 = c0;
  ls.gamma = gamma;
  ls.c1 = 2.0 + 2.0 * (1.0 - gamma) * c0;
  ls.c2 = ls.c1 - gamma * c0;
  ls.atom_set.resize(dict.d);
  ls.atom_star_set.resize(dict.d);
  const double logd_over_d = std::log(static_cast<double>(dict.d)) / static_cast<double>(dict.d);
  for (std::size_t i = 0; i < p.m; ++i) {
    Vec64 wi0(p.W0.row(i), p.W0.row(i) + p.d1);
    const Vec64 proj = dict.project(wi0);
    double sparse = 0.0;
    for (double v : proj) sparse += v * v;
    const double thr1 = ls.c1 * logd_over_d * sparse;
    const double thr2 = ls.c2 * logd_over_d * sparse;
    for (std::size_t j = 0; j < dict.d; ++j) {
      const double pj2 = proj[j] * proj[j];
      if (pj2 >= thr2) ls.atom_set[j].push_back(i);
      if (pj2 >= thr1) {
        bool others_small = true;
        for (std::size_t j2 = 0; j2 < dict.d && others_small; ++j2)
          if (j2 != j && proj[j2] * proj[j2] > thr2) others_small = false;
        if (others_small) ls.atom_star_set[j].push_back(i);
      }
    }
  }
  return ls;
}

struct RepNoiseCosine {
  double mean_cosine = 0.0;
  std::size_t zero_rep_count = 0;  // samples where either rep vanished
};

// Mean cos(f(x), f(xi)) with the same xi fed alone; zero reps score 0.
inline RepNoiseCosine rep_noise_cosine(const NetworkParams& p, const Dictionary& dict,
                                       const LatentConfig& lat, const NoiseConfig& noise,
                                       std::size_t n_samples, SeededRng& rng) {
  require(n_samples >= 1, "rep_noise_cosine: n_samples must be >= 1");
  RepNoiseCosine out;
  Vec64 fx, fxi;
  double acc = 0.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const Sample smp = sample_input(dict, lat, noise, rng);
    forward_rep(p, smp.x, fx);
    forward_rep(p, smp.xi, fxi);
    const double den = norm2(fx) * norm2(fxi);
    if (den > 0.0)
      acc += dot(fx, fxi) / den;
    else
      out.zero_rep_count += 1;
  }
  out.mean_cosine = acc / static_cast<double>(n_samples);
  return out;
}

inline double activation_sparsity(const NetworkParams& p, const Dictionary& dict,
                                  const LatentConfig& lat, const NoiseConfig& noise,
                                  std::size_t n_samples, SeededRng& rng) {
  require(n_samples >= 1, "activation_sparsity: n_samples must be >= 1");
  double acc = 0.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const Sample smp = sample_input(dict, lat, noise, rng);
    const ForwardResult r = forward(p, smp.x);
    std::size_t nact = 0;
    for (auto a : r.active) nact += a;
    acc += static_cast<double>(nact) / static_cast<double>(p.m);
  }
  return acc / static_cast<double>(n_samples);
}

// Probes run on arbitrary encoders so the ground-truth-latent "oracle"
// control shares the code path with trained networks.
using Encoder = std::function<Vec64(const Sample&)>;

inline Encoder network_encoder(const NetworkParams& p) {
  return [&p](const Sample& s) {
    Vec64 r;
    forward_rep(p, s.x, r);
    return r;
  };
}

inline Encoder oracle_encoder() {
  return [](const Sample& s) { return s.z; };
}

enum class ProbeTask { regression, classification };

struct ProbeResult {
  ProbeTask task = ProbeTask::regression;
  std::size_t n_train = 0, n_test = 0;
  double ridge_mu = 0.0;
  std::size_t logistic_steps = 0;
  double score = 0.0;          // test MSE or test accuracy
  double label_second_moment = 0.0;  // E[y^2] on the test draw (regression)
  bool converged = true;
  Vec64 wstar;
};

inline Vec64 wstar_sample(std::size_t d, SeededRng& rng) {
  Vec64 w(d);
  for (auto& v : w) v = rng.bernoulli(0.5) ? 1.0 : -1.0;
  return w;
}

inline ProbeResult probe_regression(const Encoder& enc, const Dictionary& dict,
                                    const LatentConfig& lat, const NoiseConfig& noise,
                                    const Vec64& wstar, std::size_t n_train,
                                    std::size_t n_test, double ridge_mu, SeededRng& rng) {
  require(ridge_mu > 0.0, "probe_regression: ridge_mu must be > 0");
  require(wstar.size() == dict.d, "probe_regression: wstar dimension mismatch");
  std::vector<Vec64> ftr(n_train), fte(n_test);
  Vec64 ytr(n_train), yte(n_test);
  for (std::size_t s = 0; s < n_train; ++s) {
    const Sample smp = sample_input(dict, lat, noise, rng);
    ftr[s] = enc(smp);
    ytr[s] = dot(wstar, smp.z);
  }
  for (std::size_t s = 0; s < n_test; ++s) {
    const Sample smp = sample_input(dict, lat, noise, rng);
    fte[s] = enc(smp);
    yte[s] = dot(wstar, smp.z);
  }
  const std::size_t k = ftr[0].size();
  Mat64 A(k, k);
  Vec64 rhs(k, 0.0);
  for (std::size_t s = 0; s < n_train; ++s) {
    for (std::size_t i = 0; i < k; ++i) {
      rhs[i] += ftr[s][i] * ytr[s];
      for (std::size_t j = 0; j <= i; ++j) A(i, j) += ftr[s][i] * ftr[s][j];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n_train);
  for (std::size_t i = 0; i < k; ++i) {
    rhs[i] *= inv_n;
    for (std::size_t j = 0; j <= i; ++j) {
      A(i, j) *= inv_n;
      A(j, i) = A(i, j);
    }
    A(i, i) += ridge_mu;
  }
  Vec64 v;
  try {
    v = solve_spd(A, rhs);
  } catch (const NumericError&) {
    throw NumericError("probe_regression: normal equations ill-conditioned; increase ridge_mu");
  }
  double mse = 0.0, ey2 = 0.0;
  for (std::size_t s = 0; s < n_test; ++s) {
    const double err = dot(v, fte[s]) - yte[s];
    mse += err * err;
    ey2 += yte[s] * yte[s];
  }
  ProbeResult res;
  res.task = ProbeTask::regression;
  res.n_train = n_train;
  res.n_test = n_test;
  res.ridge_mu = ridge_mu;
  res.score = mse / static_cast<double>(n_test);
  res.label_second_moment = ey2 / static_cast<double>(n_test);
  res.wstar = wstar;
  return res;
}

inline ProbeResult probe_classification(const Encoder& enc, const Dictionary& dict,
                                        const LatentConfig& lat, const NoiseConfig& noise,
                                        const Vec64& wstar, std::size_t n_train,
                                        std::size_t n_test, std::size_t logistic_steps,
                                        double logistic_lr, SeededRng& rng) {
  require(wstar.size() == dict.d, "probe_classification: wstar dimension mismatch");
  // Labels y = sign(<wstar, z>); ties (exact zero) resampled.
  auto draw = [&](std::vector<Vec64>& feats, Vec64& labels, std::size_t n) {
    feats.resize(n);
    labels.resize(n);
    for (std::size_t s = 0; s < n; ++s) {
      double y = 0.0;
      Sample smp;
      do {
        smp = sample_input(dict, lat, noise, rng);
        y = dot(wstar, smp.z);
      } while (y == 0.0);
      feats[s] = enc(smp);
      labels[s] = y > 0.0 ? 1.0 : -1.0;
    }
  };
  std::vector<Vec64> ftr, fte;
  Vec64 ytr, yte;
  draw(ftr, ytr, n_train);
  draw(fte, yte, n_test);
  const std::size_t k = ftr[0].size();
  Vec64 v(k, 0.0), grad(k);
  double prev_loss = std::numeric_limits<double>::infinity();
  bool converged = false;
  for (std::size_t step = 0; step < logistic_steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double nll = 0.0;
    for (std::size_t s = 0; s < n_train; ++s) {
      const double margin = ytr[s] * dot(v, ftr[s]);
      const double sig = 1.0 / (1.0 + std::exp(margin));  // d(-log p)/d(margin)
      nll += std::log1p(std::exp(-margin));
      for (std::size_t i = 0; i < k; ++i) grad[i] -= sig * ytr[s] * ftr[s][i];
    }
    const double inv_n = 1.0 / static_cast<double>(n_train);
    for (std::size_t i = 0; i < k; ++i) v[i] -= logistic_lr * grad[i] * inv_n;
    nll *= inv_n;
    if (std::fabs(prev_loss - nll) < 1e-9) {
      converged = true;
      break;
    }
    prev_loss = nll;
  }
  std::size_t correct = 0;
  for (std::size_t s = 0; s < n_test; ++s) {
    const double pred = dot(v, fte[s]) >= 0.0 ? 1.0 : -1.0;
    correct += (pred == yte[s]);
  }
  ProbeResult res;
  res.task = ProbeTask::classification;
  res.n_train = n_train;
  res.n_test = n_test;
  res.logistic_steps = logistic_steps;
  res.score = static_cast<double>(correct) / static_cast<double>(n_test);
  res.converged = converged;
  res.wstar = wstar;
  return res;
}

// One logged step's diagnostics; probe fields filled only at probe steps.
struct MetricsRecord {
  std::size_t step = 0;
  double loss_estimate = 0.0;
  double sparse_fraction_mean = 0.0;
  double sparse_fraction_min = 0.0;
  double sparse_fraction_max = 0.0;
  double atom_coverage = 0.0;
  double mean_singleton_score = 0.0;
  double singleton_threshold = 0.5;
  double rep_noise_cos = 0.0;
  double act_sparsity = 0.0;
  double mean_bias = 0.0;
  double mean_weight_norm = 0.0;
  std::optional<std::size_t> t1;
  std::optional<double> probe_mse;
  std::optional<double> probe_ey2;
  std::optional<double> probe_acc;
};

// Top-2 principal components of a set of representations via power iteration
// with deflation; backs the 2-D embedding scatter dump.
struct PcaRow {
  std::size_t sample_id = 0;
  double label = 0.0;
  double pc1 = 0.0, pc2 = 0.0;
};

inline std::vector<PcaRow> pca2(const std::vector<Vec64>& reps, const Vec64& labels) {
  require(!reps.empty() && reps.size() == labels.size(), "pca2: inputs mismatch");
  const std::size_t n = reps.size(), k = reps[0].size();
  Vec64 mean(k, 0.0);
  for (const auto& r : reps) axpy(1.0, r, mean);
  for (auto& v : mean) v /= static_cast<double>(n);
  Mat64 C(k, k);
  for (const auto& r : reps)
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j)
        C(i, j) += (r[i] - mean[i]) * (r[j] - mean[j]) / static_cast<double>(n);
  auto power_iter = [&](const Vec64* deflate) {
    Vec64 v(k, 1.0 / std::sqrt(static_cast<double>(k)));
    for (int it = 0; it < 200; ++it) {
      Vec64 nv = matvec(C, v);
      if (deflate) axpy(-dot(*deflate, nv), *deflate, nv);
      const double nrm = norm2(nv);
      if (nrm == 0.0) return nv;
      for (auto& x : nv) x /= nrm;
      v = nv;
    }
    return v;
  };
  const Vec64 p1 = power_iter(nullptr);
  const Vec64 p2 = power_iter(&p1);
  std::vector<PcaRow> rows(n);
  for (std::size_t s = 0; s < n; ++s) {
    Vec64 c = reps[s];
    axpy(-1.0, mean, c);
    rows[s] = {s, labels[s], dot(p1, c), dot(p2, c)};
  }
  return rows;
}

}  // namespace cfl
