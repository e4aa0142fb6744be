// File formats: trajectory JSONL, dictionary/dataset dumps, PCA CSV,
// run manifests. All float text uses %.17g so equal runs produce equal bytes.
#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfl/config.hpp"
#include "cfl/evaluation.hpp"
#include "cfl/trainer.hpp"

namespace cfl {

using nlohmann::json;

inline json metrics_to_json(const MetricsRecord& r) {
  json j;
  j["step"] = r.step;
  j["loss"] = r.loss_estimate;
  j["sparse_fraction_mean"] = r.sparse_fraction_mean;
  j["sparse_fraction_min"] = r.sparse_fraction_min;
  j["sparse_fraction_max"] = r.sparse_fraction_max;
  j["atom_coverage"] = r.atom_coverage;
  j["mean_singleton_score"] = r.mean_singleton_score;
  j["singleton_threshold"] = r.singleton_threshold;
  j["rep_noise_cos"] = r.rep_noise_cos;
  j["act_sparsity"] = r.act_sparsity;
  j["mean_bias"] = r.mean_bias;
  j["mean_weight_norm"] = r.mean_weight_norm;
  if (r.t1) j["t1"] = *r.t1;
  if (r.probe_mse) j["probe_mse"] = *r.probe_mse;
  if (r.probe_ey2) j["probe_ey2"] = *r.probe_ey2;
  if (r.probe_acc) j["probe_acc"] = *r.probe_acc;
  return j;
}

inline MetricsRecord metrics_from_json(const json& j) {
  MetricsRecord r;
  r.step = j.at("step").get<std::size_t>();
  r.loss_estimate = j.at("loss").get<double>();
  r.sparse_fraction_mean = j.at("sparse_fraction_mean").get<double>();
  r.sparse_fraction_min = j.at("sparse_fraction_min").get<double>();
  r.sparse_fraction_max = j.at("sparse_fraction_max").get<double>();
  r.atom_coverage = j.at("atom_coverage").get<double>();
  r.mean_singleton_score = j.at("mean_singleton_score").get<double>();
  r.singleton_threshold = j.at("singleton_threshold").get<double>();
  r.rep_noise_cos = j.at("rep_noise_cos").get<double>();
  r.act_sparsity = j.at("act_sparsity").get<double>();
  r.mean_bias = j.at("mean_bias").get<double>();
  r.mean_weight_norm = j.at("mean_weight_norm").get<double>();
  if (j.contains("t1")) r.t1 = j.at("t1").get<std::size_t>();
  if (j.contains("probe_mse")) r.probe_mse = j.at("probe_mse").get<double>();
  if (j.contains("probe_ey2")) r.probe_ey2 = j.at("probe_ey2").get<double>();
  if (j.contains("probe_acc")) r.probe_acc = j.at("probe_acc").get<double>();
  return r;
}

inline json probe_to_json(const ProbeResult& r) {
  json j;
  j["task"] = r.task == ProbeTask::regression ? "regression" : "classification";
  j["n_train"] = r.n_train;
  j["n_test"] = r.n_test;
  j["score"] = r.score;
  if (r.task == ProbeTask::regression) {
    j["ridge_mu"] = r.ridge_mu;
    j["label_second_moment"] = r.label_second_moment;
  } else {
    j["logistic_steps"] = r.logistic_steps;
    j["converged"] = r.converged;
  }
  return j;
}

inline std::string fmt_field(double v) { return detail::fmt_f64(v); }

// Dictionary CSV: two header lines (d, then d1), then row-major values.
inline void dump_dictionary_csv(const Dictionary& dict, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw NumericError("cannot open " + path + " for writing");
  f << dict.d << "\n" << dict.d1 << "\n";
  for (std::size_t r = 0; r < dict.d1; ++r) {
    for (std::size_t c = 0; c < dict.d; ++c)
      f << (c ? "," : "") << fmt_field(dict.M(r, c));
    f << "\n";
  }
}

inline Dictionary load_dictionary_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw NumericError("cannot open dictionary file: " + path);
  std::string line;
  if (!std::getline(f, line)) throw NumericError("dictionary file truncated: " + path);
  const std::size_t d = std::stoull(line);
  if (!std::getline(f, line)) throw NumericError("dictionary file truncated: " + path);
  const std::size_t d1 = std::stoull(line);
  Dictionary dict;
  dict.d = d;
  dict.d1 = d1;
  dict.M = Mat64(d1, d);
  for (std::size_t r = 0; r < d1; ++r) {
    if (!std::getline(f, line)) throw NumericError("dictionary file truncated: " + path);
    std::istringstream row(line);
    std::string cell;
    for (std::size_t c = 0; c < d; ++c) {
      if (!std::getline(row, cell, ',')) throw NumericError("bad dictionary row in " + path);
      dict.M(r, c) = std::stod(cell);
    }
  }
  for (std::size_t c = 0; c < d; ++c) {
    double colmax = 0.0;
    for (std::size_t r = 0; r < d1; ++r) colmax = std::max(colmax, std::fabs(dict.M(r, c)));
    dict.infinity_bound = std::max(dict.infinity_bound, colmax);
  }
  return dict;
}

// One JSON record per line: {z, xi, x}.
inline void dump_dataset(const Dictionary& dict, const LatentConfig& lat,
                         const NoiseConfig& noise, std::size_t n, SeededRng& rng,
                         const std::string& path) {
  std::ofstream f(path);
  if (!f) throw NumericError("cannot open " + path + " for writing");
  for (std::size_t s = 0; s < n; ++s) {
    const Sample smp = sample_input(dict, lat, noise, rng);
    json j;
    std::vector<int> z(smp.z.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = static_cast<int>(smp.z[i]);
    j["z"] = z;
    j["xi"] = smp.xi;
    j["x"] = smp.x;
    f << j.dump() << "\n";
  }
}

inline void dump_pca_csv(const std::vector<PcaRow>& rows, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw NumericError("cannot open " + path + " for writing");
  f << "sample_id,label,pc1,pc2\n";
  for (const auto& r : rows)
    f << r.sample_id << "," << fmt_field(r.label) << "," << fmt_field(r.pc1) << ","
      << fmt_field(r.pc2) << "\n";
}

inline const char* kVersionString = "cfl-sim 1.0.0";

struct RunManifest {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string version = kVersionString;
  std::string started_at;
  std::string ended_at;
  std::string outcome = "completed";  // completed | diverged | aborted
  std::vector<std::string> overrides;
};

inline std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

// Written to a temp file then renamed, so a manifest on disk is never partial.
inline void write_manifest(const RunManifest& m, const std::filesystem::path& dir) {
  json j;
  j["config_hash"] = m.config_hash;
  j["seed"] = m.seed;
  j["version"] = m.version;
  j["started_at"] = m.started_at;
  j["ended_at"] = m.ended_at;
  j["outcome"] = m.outcome;
  j["overrides"] = m.overrides;
  const auto tmp = dir / "manifest.json.tmp";
  {
    std::ofstream f(tmp);
    if (!f) throw NumericError("cannot write manifest in " + dir.string());
    f << j.dump(2) << "\n";
  }
  std::filesystem::rename(tmp, dir / "manifest.json");
}

}  // namespace cfl
