// Run orchestration: single training runs with trajectory/checkpoint output,
// paired with-aug vs no-aug runs sharing seed and data streams, and report
// rendering. A run directory (config + manifest + trajectory) is enough to
// reproduce the run bit-identically.
#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "cfl/io.hpp"

namespace cfl {

namespace fs = std::filesystem;

struct ProbeSettings {
  std::vector<std::size_t> steps;  // empty: probe at final step only
  std::size_t n_train = 4096;
  std::size_t n_test = 2048;
  double ridge_mu = 1e-4;
  std::size_t logistic_steps = 500;
  double logistic_lr = 0.1;
};

struct ExperimentSpec {
  std::string name = "run";
  TrainConfig train;
  ProbeSettings probes;
  fs::path out_dir;
  std::vector<std::size_t> checkpoint_steps;  // final step always checkpointed
  bool dump_pca = false;
};

// Probe data comes from a stream keyed by the probe step so with-aug,
// no-aug and oracle probes at the same step see identical draws.
inline SeededRng probe_rng_at(std::uint64_t seed, std::size_t step) {
  return SeededRng(seed, 1000 + step);
}
inline Vec64 task_direction(std::uint64_t seed, std::size_t d) {
  SeededRng rng(seed, 999);
  return wstar_sample(d, rng);
}

struct ProbePair {
  ProbeResult regression;
  ProbeResult classification;
};

inline ProbePair run_probes(const Encoder& enc, const Dictionary& dict,
                            const LatentConfig& lat, const NoiseConfig& noise,
                            const ProbeSettings& ps, std::uint64_t seed,
                            std::size_t step) {
  const Vec64 wstar = task_direction(seed, dict.d);
  ProbePair out;
  {
    SeededRng rng = probe_rng_at(seed, step);
    out.regression = probe_regression(enc, dict, lat, noise, wstar, ps.n_train, ps.n_test,
                                      ps.ridge_mu, rng);
  }
  {
    SeededRng rng = probe_rng_at(seed, step);
    out.classification = probe_classification(enc, dict, lat, noise, wstar, ps.n_train,
                                              ps.n_test, ps.logistic_steps, ps.logistic_lr,
                                              rng);
  }
  return out;
}

struct RunResult {
  Trajectory trajectory;
  RunOutcome outcome = RunOutcome::completed;
  fs::path dir;
};

// Executes a run: trajectory JSONL, checkpoints (ckpt_{step}.bin), probes at
// the configured steps, manifest. Partial outputs survive divergence.
inline RunResult run_experiment(const ExperimentSpec& spec,
                                const std::vector<std::string>& overrides = {}) {
  const TrainConfig cfg = spec.train;
  cfg.validate();
  fs::create_directories(spec.out_dir);
  RunManifest manifest;
  manifest.config_hash = config_hash(cfg);
  manifest.seed = cfg.seed;
  manifest.started_at = timestamp_utc();
  manifest.overrides = overrides;
  {
    std::ofstream f(spec.out_dir / "config.txt");
    f << serialize_config(cfg);
  }

  std::vector<std::size_t> probe_steps = spec.probes.steps;
  if (probe_steps.empty()) probe_steps.push_back(cfg.total_steps);
  for (std::size_t s : probe_steps)
    if (s > cfg.total_steps)
      throw ConfigError("probe step " + std::to_string(s) + " exceeds total_steps");

  Trainer tr(cfg);
  RunResult res;
  res.dir = spec.out_dir;
  std::ofstream traj_out(spec.out_dir / "trajectory.jsonl");
  if (!traj_out) throw NumericError("cannot open trajectory file in " + spec.out_dir.string());

  auto probe_here = [&](std::size_t step, MetricsRecord& rec) {
    if (std::find(probe_steps.begin(), probe_steps.end(), step) == probe_steps.end()) return;
    const ProbePair pp =
        run_probes(network_encoder(tr.params()), tr.dict(), tr.latent_config(),
                   tr.noise_config(), spec.probes, cfg.seed, step);
    rec.probe_mse = pp.regression.score;
    rec.probe_ey2 = pp.regression.label_second_moment;
    rec.probe_acc = pp.classification.score;
    if (spec.dump_pca) {
      SeededRng rng = probe_rng_at(cfg.seed, step);
      const Vec64 wstar = task_direction(cfg.seed, tr.dict().d);
      std::vector<Vec64> reps;
      Vec64 labels;
      for (std::size_t s = 0; s < spec.probes.n_test; ++s) {
        const Sample smp =
            sample_input(tr.dict(), tr.latent_config(), tr.noise_config(), rng);
        Vec64 r;
        forward_rep(tr.params(), smp.x, r);
        reps.push_back(std::move(r));
        const double y = dot(wstar, smp.z);
        labels.push_back(y > 0 ? 1.0 : (y < 0 ? -1.0 : 0.0));
      }
      dump_pca_csv(pca2(reps, labels),
                   (spec.out_dir / ("pca_" + std::to_string(step) + ".csv")).string());
    }
  };
  auto emit = [&](MetricsRecord rec, std::size_t step) {
    probe_here(step, rec);
    res.trajectory.records.push_back(rec);
    traj_out << metrics_to_json(rec).dump() << "\n";
  };
  auto maybe_checkpoint = [&](std::size_t step) {
    const bool listed = std::find(spec.checkpoint_steps.begin(), spec.checkpoint_steps.end(),
                                  step) != spec.checkpoint_steps.end();
    if (listed || step == cfg.total_steps)
      save_checkpoint(tr.params(),
                      (spec.out_dir / ("ckpt_" + std::to_string(step) + ".bin")).string());
  };

  try {
    emit(tr.metrics(0.0), 0);
    maybe_checkpoint(0);
    for (std::size_t t = 0; t < cfg.total_steps; ++t) {
      const double l = tr.step();
      const std::size_t step = t + 1;
      if (step % cfg.log_every == 0 || step == cfg.total_steps) emit(tr.metrics(l), step);
      if (step != cfg.total_steps) maybe_checkpoint(step);
    }
    maybe_checkpoint(cfg.total_steps);
    res.outcome = RunOutcome::completed;
    manifest.outcome = "completed";
  } catch (const DivergenceError& e) {
    res.outcome = RunOutcome::diverged;
    res.trajectory.diagnostic = e.what();
    manifest.outcome = "diverged";
    json diag;
    diag["step"] = tr.schedule().step;
    diag["diverged"] = true;
    diag["detail"] = e.what();
    traj_out << diag.dump() << "\n";
  }
  res.trajectory.outcome = res.outcome;
  res.trajectory.t1 = tr.schedule().t1;
  dump_dictionary_csv(tr.dict(), (spec.out_dir / "dictionary.csv").string());
  manifest.ended_at = timestamp_utc();
  write_manifest(manifest, spec.out_dir);
  return res;
}

// Side-by-side summary row of a paired run.
struct PairedRow {
  std::size_t step = 0;
  double sparse_frac_aug = 0.0, sparse_frac_noaug = 0.0;
  double cos_aug = 0.0, cos_noaug = 0.0;
  std::optional<double> acc_aug, acc_noaug;
};

inline void write_paired_csv(const std::vector<PairedRow>& rows, const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw NumericError("cannot open " + path.string() + " for writing");
  f << "step,sparse_fraction_aug,sparse_fraction_noaug,cosine_aug,cosine_noaug,"
       "acc_aug,acc_noaug\n";
  for (const auto& r : rows) {
    f << r.step << "," << fmt_field(r.sparse_frac_aug) << ","
      << fmt_field(r.sparse_frac_noaug) << "," << fmt_field(r.cos_aug) << ","
      << fmt_field(r.cos_noaug) << ",";
    f << (r.acc_aug ? fmt_field(*r.acc_aug) : "") << ","
      << (r.acc_noaug ? fmt_field(*r.acc_noaug) : "") << "\n";
  }
}

struct PairedResult {
  RunResult aug;
  RunResult noaug;
  std::vector<PairedRow> rows;
  fs::path dir;
};

// Both legs share (seed, data/init/negatives streams); only the with-aug leg
// consumes the mask stream. Legs are output-isolated: one leg failing still
// leaves the other leg's files and manifest intact.
inline PairedResult run_paired(const TrainConfig& base, const ProbeSettings& probes,
                               const fs::path& out_dir) {
  PairedResult pr;
  pr.dir = out_dir;
  fs::create_directories(out_dir);
  auto leg = [&](Mode mode) {
    ExperimentSpec spec;
    spec.train = base;
    spec.train.mode = mode;
    spec.probes = probes;
    spec.name = mode_name(mode);
    spec.out_dir = out_dir / mode_name(mode);
    return spec;
  };
  pr.aug = run_experiment(leg(Mode::with_aug));
  try {
    pr.noaug = run_experiment(leg(Mode::no_aug));
  } catch (const std::exception&) {
    // No-aug leg aborted; keep the with-aug outputs and mark the leg.
    RunManifest m;
    m.config_hash = config_hash(base);
    m.seed = base.seed;
    m.started_at = m.ended_at = timestamp_utc();
    m.outcome = "aborted";
    fs::create_directories(out_dir / mode_name(Mode::no_aug));
    write_manifest(m, out_dir / mode_name(Mode::no_aug));
    pr.noaug.outcome = RunOutcome::aborted;
  }
  const auto& ra = pr.aug.trajectory.records;
  const auto& rn = pr.noaug.trajectory.records;
  std::map<std::size_t, const MetricsRecord*> by_step;
  for (const auto& r : rn) by_step[r.step] = &r;
  for (const auto& r : ra) {
    PairedRow row;
    row.step = r.step;
    row.sparse_frac_aug = r.sparse_fraction_mean;
    row.cos_aug = r.rep_noise_cos;
    row.acc_aug = r.probe_acc;
    const auto it = by_step.find(r.step);
    if (it != by_step.end()) {
      row.sparse_frac_noaug = it->second->sparse_fraction_mean;
      row.cos_noaug = it->second->rep_noise_cos;
      row.acc_noaug = it->second->probe_acc;
    }
    pr.rows.push_back(row);
  }
  write_paired_csv(pr.rows, out_dir / "paired_summary.csv");
  return pr;
}

// Markdown summary of a run (or paired-run) directory; returns the text.
inline std::string render_report(const fs::path& run_dir) {
  std::ostringstream out;
  const fs::path paired_csv = run_dir / "paired_summary.csv";
  const fs::path traj_path =
      fs::exists(run_dir / "trajectory.jsonl") ? run_dir / "trajectory.jsonl"
                                               : run_dir / "with-aug" / "trajectory.jsonl";
  if (!fs::exists(traj_path))
    throw NumericError("no trajectory found under " + run_dir.string());
  std::ifstream f(traj_path);
  std::vector<MetricsRecord> recs;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || j.contains("diverged")) continue;
    recs.push_back(metrics_from_json(j));
  }
  if (recs.empty()) throw NumericError("trajectory is empty in " + run_dir.string());
  out << "| step | loss | sparse frac | coverage | singleton | rep-noise cos | act "
         "sparsity | bias |\n";
  out << "|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : recs) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "| %zu | %.4f | %.4f | %.3f | %.3f | %.4f | %.4f | %.4f |\n", r.step,
                  r.loss_estimate, r.sparse_fraction_mean, r.atom_coverage,
                  r.mean_singleton_score, r.rep_noise_cos, r.act_sparsity, r.mean_bias);
    out << buf;
  }
  if (fs::exists(paired_csv)) {
    std::ifstream pf(paired_csv);
    std::string last, row;
    std::getline(pf, row);  // header
    while (std::getline(pf, row))
      if (!row.empty()) last = row;
    if (!last.empty()) {
      std::vector<std::string> cells;
      std::istringstream ss(last);
      std::string c;
      while (std::getline(ss, c, ',')) cells.push_back(c);
      while (cells.size() < 7) cells.push_back("");
      auto num = [&](std::size_t i) { return cells[i].empty() ? std::nan("") : std::stod(cells[i]); };
      struct Verdict {
        const char* name;
        bool pass;
        double value;
      };
      const std::vector<Verdict> verdicts = {
          {"with-aug sparse fraction >= 0.5", num(1) >= 0.5, num(1)},
          {"no-aug sparse fraction <= 0.25", num(2) <= 0.25, num(2)},
          {"no-aug rep-noise cosine >= 0.9", num(4) >= 0.9, num(4)},
          {"with-aug probe accuracy >= 0.9", num(5) >= 0.9, num(5)},
          {"no-aug probe accuracy <= 0.6", num(6) <= 0.6, num(6)},
      };
      out << "\n| paired verdict | value | status |\n|---|---|---|\n";
      for (const auto& v : verdicts) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "| %s | %.4f | %s |\n", v.name, v.value,
                      v.pass ? "pass" : "FAIL");
        out << buf;
      }
    }
  }
  return out.str();
}

}  // namespace cfl
