// Staged SGD: stage I grows the sparse subspace with zero biases; once every
// neuron's norm has grown by stage1_ratio the biases are reset proportional
// to sqrt(2 log d / d) ||w_i|| and thereafter rise multiplicatively, frozen
// individually once they pass the polylog(d)/sqrt(d) relative cap. In no-aug
// mode biases stay 0 for the whole run.
#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "cfl/data_model.hpp"
#include "cfl/evaluation.hpp"
#include "cfl/network.hpp"
#include "cfl/objective.hpp"

namespace cfl {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  std::size_t d = 32;
  std::size_t d1 = 256;
  std::size_t m = 64;
  double eta = 0.05;
  double lambda = 0.006;
  double tau = -1.0;         // < 0: resolve to (ln d)^2
  std::size_t n_negatives = 64;
  std::size_t k_batches = 8;
  std::size_t total_steps = 16000;
  Mode mode = Mode::with_aug;
  double stage1_ratio = 10.0;
  double bias_reset_coeff = 0.25;
  double bias_floor_rate = -1.0;  // < 0: resolve to eta / (8 d)
  double bias_cap_coeff = 0.15;
  std::size_t log_every = 100;
  std::uint64_t seed = 0;
  // Data/init knobs (functional-form defaults resolved from d, d1).
  double cz = 2.0;
  double p_active = -1.0;     // < 0: resolve to cz ln ln d / d
  double sigma_xi_sq = -1.0;  // < 0: resolve to sqrt(ln d) / d
  double sigma0_sq = -1.0;    // < 0: resolve to 1 / (d1 d^2)
  double c_inf = 4.0;
  double singleton_threshold = 0.5;
  std::size_t eval_samples = 200;

  TrainConfig resolved() const {
    TrainConfig c = *this;
    const double dd = static_cast<double>(c.d);
    if (c.tau < 0.0) c.tau = std::log(dd) * std::log(dd);
    if (c.bias_floor_rate < 0.0) c.bias_floor_rate = c.eta / (8.0 * dd);
    if (c.p_active < 0.0) c.p_active = c.cz * std::log(std::log(dd)) / dd;
    if (c.sigma_xi_sq < 0.0) c.sigma_xi_sq = std::sqrt(std::log(dd)) / dd;
    if (c.sigma0_sq < 0.0)
      c.sigma0_sq = 1.0 / (static_cast<double>(c.d1) * dd * dd);
    return c;
  }

  void validate() const {
    const TrainConfig c = resolved();
    const double dd = static_cast<double>(c.d);
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (c.d < 1 || c.d1 < c.d) fail("need 1 <= d <= d1");
    if (c.m < 1) fail("need m >= 1");
    if (!(c.eta >= 0.0)) fail("eta must be >= 0");
    if (!(c.tau > 0.0)) fail("tau must be > 0");
    if (c.n_negatives < 1) fail("n_negatives must be >= 1");
    if (c.k_batches < 1) fail("k_batches must be >= 1");
    if (c.mode == Mode::with_aug) {
      const double lo = std::pow(dd, -1.499), hi = std::pow(dd, -1.001);
      if (c.lambda < lo || c.lambda > hi)
        fail("with-aug lambda must lie in [d^-1.499, d^-1.001] = [" +
             std::to_string(lo) + ", " + std::to_string(hi) + "]");
    } else {
      if (c.lambda > 1.0 / dd) fail("no-aug lambda must be <= 1/d");
    }
    if (c.lambda < 0.0) fail("lambda must be >= 0");
    if (!(c.stage1_ratio >= 1.0)) fail("stage1_ratio must be >= 1");
    if (c.p_active < 0.0 || c.p_active > 1.0) fail("p_active must be in [0,1]");
    if (!(c.sigma_xi_sq > 0.0)) fail("sigma_xi_sq must be > 0");
    if (!(c.sigma0_sq > 0.0)) fail("sigma0_sq must be > 0");
    if (c.log_every < 1) fail("log_every must be >= 1");
  }
};

enum class Stage { one, two_three };

struct ScheduleState {
  std::size_t step = 0;
  Stage stage = Stage::one;
  std::optional<std::size_t> t1;
  Vec64 prev_norm;  // per-neuron ||w_i|| before the pending weight update
};

enum class RunOutcome { completed, diverged, aborted };

struct Trajectory {
  std::vector<MetricsRecord> records;
  RunOutcome outcome = RunOutcome::completed;
  std::optional<std::size_t> t1;
  std::string diagnostic;
};

inline bool detect_stage1_end(const NetworkParams& p, const TrainConfig& cfg) {
  for (std::size_t i = 0; i < p.m; ++i) {
    const double n0 = norm2(Vec64(p.W0.row(i), p.W0.row(i) + p.d1));
    const double nt = norm2(Vec64(p.W.row(i), p.W.row(i) + p.d1));
    if (nt < cfg.stage1_ratio * n0) return false;
  }
  return true;
}

class Trainer {
 public:
  explicit Trainer(const TrainConfig& config)
      : cfg_(config.resolved()),
        rng_data_(cfg_.seed, Stream::data),
        rng_masks_(cfg_.seed, Stream::masks),
        rng_negatives_(cfg_.seed, Stream::negatives),
        rng_probes_(cfg_.seed, Stream::probes) {
    cfg_.validate();
    SeededRng rng_dict(cfg_.seed, std::uint64_t{6});
    dict_ = build_dictionary(cfg_.d, cfg_.d1, cfg_.c_inf, rng_dict);
    SeededRng rng_init(cfg_.seed, Stream::init);
    InitConfig ic;
    ic.sigma0_sq = cfg_.sigma0_sq;
    params_ = init_params(cfg_.m, cfg_.d1, ic, rng_init);
    lat_.p_active = cfg_.p_active;
    noise_.sigma_xi_sq = cfg_.sigma_xi_sq;
    sched_.prev_norm = row_norms(params_);
  }

  // One SGD step: K fresh batches, weight update, bias schedule. Returns the
  // mean batch loss. Throws DivergenceError on non-finite or huge weights.
  double step() {
    std::vector<Batch> batches(cfg_.k_batches);
    for (auto& b : batches) {
      const Sample xp = sample_input(dict_, lat_, noise_, rng_data_);
      if (cfg_.mode == Mode::with_aug) {
        b.pair = random_mask(xp.x, rng_masks_);
      } else {
        b.pair.x_plus = xp.x;
        b.pair.x_plusplus = xp.x;
      }
      b.negatives = sample_negatives(dict_, lat_, noise_, cfg_.n_negatives, rng_negatives_);
      b.mode = cfg_.mode;
    }
    double mean_loss = 0.0;
    Mat64 G(cfg_.m, cfg_.d1);
    if (decay_only_hook) {
      for (std::size_t i = 0; i < cfg_.m; ++i)
        for (std::size_t r = 0; r < cfg_.d1; ++r) G(i, r) = cfg_.lambda * params_.W(i, r);
    } else {
      const double scale = 1.0 / static_cast<double>(cfg_.k_batches);
      for (const Batch& b : batches)
        mean_loss += scale * accumulate_grad_weights(params_, b, cfg_.tau, scale, G);
      for (std::size_t i = 0; i < cfg_.m; ++i)
        for (std::size_t r = 0; r < cfg_.d1; ++r) G(i, r) += cfg_.lambda * params_.W(i, r);
    }
    for (std::size_t i = 0; i < cfg_.m; ++i)
      for (std::size_t r = 0; r < cfg_.d1; ++r) {
        double& w = params_.W(i, r);
        w -= cfg_.eta * G(i, r);
        if (!std::isfinite(w) || std::fabs(w) > 1e6)
          throw DivergenceError("weights diverged at step " + std::to_string(sched_.step));
      }
    update_bias();
    sched_.step += 1;
    return mean_loss;
  }

  // Bias schedule, applied after each weight update. No-aug keeps b = 0.
  void update_bias() {
    const Vec64 new_norm = row_norms(params_);
    if (cfg_.mode == Mode::with_aug) {
      if (sched_.stage == Stage::one) {
        if (detect_stage1_end(params_, cfg_)) {
          sched_.stage = Stage::two_three;
          sched_.t1 = sched_.step;
          const double reset =
              cfg_.bias_reset_coeff *
              std::sqrt(2.0 * std::log(static_cast<double>(cfg_.d)) /
                        static_cast<double>(cfg_.d));
          for (std::size_t i = 0; i < cfg_.m; ++i) params_.b[i] = reset * new_norm[i];
        }
      } else {
        const double cap_coeff = cfg_.bias_cap_coeff *
                                 std::pow(std::log(static_cast<double>(cfg_.d)), 2) /
                                 std::sqrt(static_cast<double>(cfg_.d));
        for (std::size_t i = 0; i < cfg_.m; ++i) {
          const double growth =
              sched_.prev_norm[i] > 0.0 ? new_norm[i] / sched_.prev_norm[i] - 1.0 : 0.0;
          const double eta_b = std::max(cfg_.bias_floor_rate, growth);
          // Frozen once past the cap; never shrunk.
          if (params_.b[i] <= cap_coeff * new_norm[i]) params_.b[i] *= 1.0 + eta_b;
        }
      }
    }
    sched_.prev_norm = new_norm;
  }

  MetricsRecord metrics(double loss_estimate = 0.0) {
    MetricsRecord r;
    r.step = sched_.step;
    r.loss_estimate = loss_estimate;
    const AlignmentStats st = alignment_stats(params_, dict_, cfg_.singleton_threshold);
    r.sparse_fraction_mean = st.mean_sparse_fraction();
    double mn = 1.0, mx = 0.0, sing = 0.0, wn = 0.0;
    for (const auto& n : st.neurons) {
      const double f = n.sparse_energy / (n.sparse_energy + n.dense_energy);
      mn = std::min(mn, f);
      mx = std::max(mx, f);
      sing += n.singleton_score;
      wn += std::sqrt(n.sparse_energy + n.dense_energy);
    }
    r.sparse_fraction_min = mn;
    r.sparse_fraction_max = mx;
    r.mean_singleton_score = sing / static_cast<double>(cfg_.m);
    r.singleton_threshold = cfg_.singleton_threshold;
    r.atom_coverage = st.atom_coverage();
    r.rep_noise_cos =
        rep_noise_cosine(params_, dict_, lat_, noise_, cfg_.eval_samples, rng_probes_)
            .mean_cosine;
    r.act_sparsity =
        activation_sparsity(params_, dict_, lat_, noise_, cfg_.eval_samples, rng_probes_);
    double mb = 0.0;
    for (double b : params_.b) mb += b;
    r.mean_bias = mb / static_cast<double>(cfg_.m);
    r.mean_weight_norm = wn / static_cast<double>(cfg_.m);
    r.t1 = sched_.t1;
    return r;
  }

  const TrainConfig& config() const { return cfg_; }
  const Dictionary& dict() const { return dict_; }
  const NetworkParams& params() const { return params_; }
  NetworkParams& mutable_params() { return params_; }
  const ScheduleState& schedule() const { return sched_; }
  const LatentConfig& latent_config() const { return lat_; }
  const NoiseConfig& noise_config() const { return noise_; }
  SeededRng& probes_rng() { return rng_probes_; }

  bool decay_only_hook = false;  // test hook: gradient = lambda W only

 private:
  static Vec64 row_norms(const NetworkParams& p) {
    Vec64 n(p.m);
    for (std::size_t i = 0; i < p.m; ++i)
      n[i] = std::sqrt(dot(p.W.row(i), p.W.row(i), p.d1));
    return n;
  }

  TrainConfig cfg_;
  Dictionary dict_;
  NetworkParams params_;
  LatentConfig lat_;
  NoiseConfig noise_;
  ScheduleState sched_;
  SeededRng rng_data_, rng_masks_, rng_negatives_, rng_probes_;
};

// Full run: logs a record at step 0 (init), every log_every steps, and at
// the final step. Divergence preserves the partial trajectory.
inline Trajectory run_training(Trainer& tr) {
  Trajectory traj;
  traj.records.push_back(tr.metrics(0.0));
  const TrainConfig& cfg = tr.config();
  try {
    for (std::size_t t = 0; t < cfg.total_steps; ++t) {
      const double l = tr.step();
      if ((t + 1) % cfg.log_every == 0 || t + 1 == cfg.total_steps)
        traj.records.push_back(tr.metrics(l));
    }
    traj.outcome = RunOutcome::completed;
  } catch (const DivergenceError& e) {
    traj.outcome = RunOutcome::diverged;
    traj.diagnostic = e.what();
  }
  traj.t1 = tr.schedule().t1;
  return traj;
}

inline Trajectory train(const TrainConfig& config) {
  Trainer tr(config);
  return run_training(tr);
}

}  // namespace cfl
