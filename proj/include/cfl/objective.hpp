// Stop-grad InfoNCE objective.
//
// Sim(x, x') = <f(x), f(x')> with the second representation excluded from
// differentiation. Loss per batch: -tau log softmax weight of the positive
// among {x++} u negatives at temperature tau. The analytic gradient only
// flows through the x+ branch:
//   g_i = [-(1 - l_p) h_i(x++) + sum_s l_s h_i(x_n_s)] 1{|<w_i,x+>| >= b_i} x+
// (sign fixed by differentiating the loss directly; verified against a
// finite-difference oracle in the tests).
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "cfl/data_model.hpp"
#include "cfl/network.hpp"

namespace cfl {

enum class Mode { with_aug, no_aug };

struct Batch {
  AugmentedPair pair;             // no-aug mode: x_plus == x_plusplus == x
  std::vector<Sample> negatives;  // non-empty
  Mode mode = Mode::with_aug;
};

struct LogitSet {
  double sim_pos = 0.0;
  std::vector<double> sim_neg;
  double ell_p = 0.0;
  std::vector<double> ell_s;
  double tau = 1.0;
};

inline double similarity(const Vec64& rep_a, const Vec64& rep_b) {
  return dot(rep_a, rep_b);  // rep_b is the gradient-blocked slot by contract
}

// Stable softmax over {positive} u negatives; candidate_sims[0] is positive.
inline LogitSet compute_logits(const std::vector<double>& candidate_sims, double tau) {
  require(tau > 0.0, "compute_logits: tau must be > 0");
  require(!candidate_sims.empty(), "compute_logits: empty candidate set");
  for (double s : candidate_sims)
    if (!std::isfinite(s)) throw NumericError("compute_logits: non-finite similarity");
  LogitSet ls;
  ls.tau = tau;
  ls.sim_pos = candidate_sims[0];
  ls.sim_neg.assign(candidate_sims.begin() + 1, candidate_sims.end());
  const double mx = *std::max_element(candidate_sims.begin(), candidate_sims.end());
  double denom = 0.0;
  std::vector<double> e(candidate_sims.size());
  for (std::size_t k = 0; k < candidate_sims.size(); ++k) {
    e[k] = std::exp((candidate_sims[k] - mx) / tau);
    denom += e[k];
  }
  ls.ell_p = e[0] / denom;
  ls.ell_s.resize(e.size() - 1);
  for (std::size_t k = 1; k < e.size(); ++k) ls.ell_s[k - 1] = e[k] / denom;
  return ls;
}

namespace detail {
// Similarities of f(x+) against the stop-grad slot computed from ref.
// ref == params everywhere except the frozen-copy gradient test.
inline std::vector<double> candidate_sims(const NetworkParams& params,
                                          const NetworkParams& ref, const Batch& batch) {
  require(!batch.negatives.empty(), "batch: negatives must be non-empty");
  Vec64 rep_p, rep_other;
  forward_rep(params, batch.pair.x_plus, rep_p);
  std::vector<double> sims;
  sims.reserve(1 + batch.negatives.size());
  forward_rep(ref, batch.pair.x_plusplus, rep_other);
  sims.push_back(similarity(rep_p, rep_other));
  for (const Sample& n : batch.negatives) {
    forward_rep(ref, n.x, rep_other);
    sims.push_back(similarity(rep_p, rep_other));
  }
  return sims;
}
}  // namespace detail

// Loss with the stop-grad slot evaluated at ref; loss(p, batch) is the
// ref = p case. Equals -sim_pos + tau logsumexp(sims), which is >= 0 since
// the positive is itself a member of the candidate set.
inline double loss_with_reference(const NetworkParams& params, const NetworkParams& ref,
                                  const Batch& batch, double tau) {
  const LogitSet ls = compute_logits(detail::candidate_sims(params, ref, batch), tau);
  return -tau * std::log(ls.ell_p);
}

inline double loss(const NetworkParams& params, const Batch& batch, double tau) {
  return loss_with_reference(params, params, batch, tau);
}

// Accumulates the per-batch gradient into G (m x d1), scaled by `scale`.
// Returns the batch loss (already computed en route).
inline double accumulate_grad_weights(const NetworkParams& params, const Batch& batch,
                                      double tau, double scale, Mat64& G) {
  require(G.rows() == params.m && G.cols() == params.d1,
          "accumulate_grad_weights: gradient shape mismatch");
  require(!batch.negatives.empty(), "batch: negatives must be non-empty");
  // One forward per candidate, reused for both the logits and the coefficients.
  const ForwardResult fp = forward(params, batch.pair.x_plus);
  const Vec64& rep_p = fp.rep;
  std::vector<Vec64> reps(1 + batch.negatives.size());
  forward_rep(params, batch.pair.x_plusplus, reps[0]);
  for (std::size_t s = 0; s < batch.negatives.size(); ++s)
    forward_rep(params, batch.negatives[s].x, reps[s + 1]);
  std::vector<double> sims(reps.size());
  for (std::size_t k = 0; k < reps.size(); ++k) sims[k] = similarity(rep_p, reps[k]);
  const LogitSet ls = compute_logits(sims, tau);

  // coef_i = -(1 - l_p) h_i(x++) + sum_s l_s h_i(x_n_s)
  Vec64 coef(params.m, 0.0);
  for (std::size_t i = 0; i < params.m; ++i) coef[i] = -(1.0 - ls.ell_p) * reps[0][i];
  for (std::size_t s = 0; s < batch.negatives.size(); ++s)
    for (std::size_t i = 0; i < params.m; ++i) coef[i] += ls.ell_s[s] * reps[s + 1][i];

  const Vec64& xp = batch.pair.x_plus;
  for (std::size_t i = 0; i < params.m; ++i) {
    if (!fp.active[i] || coef[i] == 0.0) continue;
    const double c = scale * coef[i];
    double* gi = G.row(i);
    for (std::size_t r = 0; r < params.d1; ++r) gi[r] += c * xp[r];
  }
  return -tau * std::log(ls.ell_p);
}

inline Mat64 grad_weights(const NetworkParams& params, const Batch& batch, double tau) {
  Mat64 G(params.m, params.d1);
  accumulate_grad_weights(params, batch, tau, 1.0, G);
  return G;
}

// Mean over batches plus weight decay: (1/K) sum_l grad + lambda W.
// Fixed sequential summation order keeps runs bit-reproducible.
inline Mat64 batch_gradient(const NetworkParams& params, const std::vector<Batch>& batches,
                            double tau, double lambda) {
  require(!batches.empty(), "batch_gradient: need at least one batch");
  Mat64 G(params.m, params.d1);
  const double scale = 1.0 / static_cast<double>(batches.size());
  for (const Batch& b : batches) accumulate_grad_weights(params, b, tau, scale, G);
  for (std::size_t i = 0; i < params.m; ++i) {
    double* gi = G.row(i);
    const double* wi = params.W.row(i);
    for (std::size_t r = 0; r < params.d1; ++r) gi[r] += lambda * wi[r];
  }
  return G;
}

}  // namespace cfl
