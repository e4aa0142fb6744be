// Flat key = value config format with '#' comments. The key set mirrors
// TrainConfig; negative values on the derived knobs (tau, p_active, ...)
// mean "resolve from d at run time" and survive round-trips verbatim.
#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cfl/trainer.hpp"

namespace cfl {

inline std::string mode_name(Mode m) { return m == Mode::with_aug ? "with-aug" : "no-aug"; }

inline Mode mode_from_name(const std::string& s) {
  if (s == "with-aug") return Mode::with_aug;
  if (s == "no-aug") return Mode::no_aug;
  throw ConfigError("mode must be 'with-aug' or 'no-aug', got '" + s + "'");
}

namespace detail {
inline std::string fmt_f64(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
inline double parse_f64(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &pos);
  } catch (...) {
    throw ConfigError("bad numeric value for '" + key + "': " + v);
  }
  if (pos != v.size()) throw ConfigError("trailing junk in value for '" + key + "': " + v);
  return x;
}
inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long x = 0;
  try {
    x = std::stoull(v, &pos);
  } catch (...) {
    throw ConfigError("bad integer value for '" + key + "': " + v);
  }
  if (pos != v.size()) throw ConfigError("trailing junk in value for '" + key + "': " + v);
  return x;
}
inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  const auto b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}
}  // namespace detail

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "d",          "d1",           "m",
      "eta",        "lambda",       "tau",
      "n_negatives", "k_batches",   "total_steps",
      "mode",       "stage1_ratio", "bias_reset_coeff",
      "bias_floor_rate", "bias_cap_coeff", "log_every",
      "seed",       "cz",           "p_active",
      "sigma_xi_sq", "sigma0_sq",   "c_inf",
      "singleton_threshold", "eval_samples"};
  return keys;
}

inline void config_set(TrainConfig& c, const std::string& key, const std::string& val) {
  using namespace detail;
  if (key == "d") c.d = parse_u64(key, val);
  else if (key == "d1") c.d1 = parse_u64(key, val);
  else if (key == "m") c.m = parse_u64(key, val);
  else if (key == "eta") c.eta = parse_f64(key, val);
  else if (key == "lambda") c.lambda = parse_f64(key, val);
  else if (key == "tau") c.tau = parse_f64(key, val);
  else if (key == "n_negatives") c.n_negatives = parse_u64(key, val);
  else if (key == "k_batches") c.k_batches = parse_u64(key, val);
  else if (key == "total_steps") c.total_steps = parse_u64(key, val);
  else if (key == "mode") c.mode = mode_from_name(val);
  else if (key == "stage1_ratio") c.stage1_ratio = parse_f64(key, val);
  else if (key == "bias_reset_coeff") c.bias_reset_coeff = parse_f64(key, val);
  else if (key == "bias_floor_rate") c.bias_floor_rate = parse_f64(key, val);
  else if (key == "bias_cap_coeff") c.bias_cap_coeff = parse_f64(key, val);
  else if (key == "log_every") c.log_every = parse_u64(key, val);
  else if (key == "seed") c.seed = parse_u64(key, val);
  else if (key == "cz") c.cz = parse_f64(key, val);
  else if (key == "p_active") c.p_active = parse_f64(key, val);
  else if (key == "sigma_xi_sq") c.sigma_xi_sq = parse_f64(key, val);
  else if (key == "sigma0_sq") c.sigma0_sq = parse_f64(key, val);
  else if (key == "c_inf") c.c_inf = parse_f64(key, val);
  else if (key == "singleton_threshold") c.singleton_threshold = parse_f64(key, val);
  else if (key == "eval_samples") c.eval_samples = parse_u64(key, val);
  else {
    std::string valid;
    for (const auto& k : config_keys()) valid += (valid.empty() ? "" : ", ") + k;
    throw ConfigError("unknown config key '" + key + "'; valid keys: " + valid);
  }
}

inline std::string config_get(const TrainConfig& c, const std::string& key) {
  using namespace detail;
  if (key == "d") return std::to_string(c.d);
  if (key == "d1") return std::to_string(c.d1);
  if (key == "m") return std::to_string(c.m);
  if (key == "eta") return fmt_f64(c.eta);
  if (key == "lambda") return fmt_f64(c.lambda);
  if (key == "tau") return fmt_f64(c.tau);
  if (key == "n_negatives") return std::to_string(c.n_negatives);
  if (key == "k_batches") return std::to_string(c.k_batches);
  if (key == "total_steps") return std::to_string(c.total_steps);
  if (key == "mode") return mode_name(c.mode);
  if (key == "stage1_ratio") return fmt_f64(c.stage1_ratio);
  if (key == "bias_reset_coeff") return fmt_f64(c.bias_reset_coeff);
  if (key == "bias_floor_rate") return fmt_f64(c.bias_floor_rate);
  if (key == "bias_cap_coeff") return fmt_f64(c.bias_cap_coeff);
  if (key == "log_every") return std::to_string(c.log_every);
  if (key == "seed") return std::to_string(c.seed);
  if (key == "cz") return fmt_f64(c.cz);
  if (key == "p_active") return fmt_f64(c.p_active);
  if (key == "sigma_xi_sq") return fmt_f64(c.sigma_xi_sq);
  if (key == "sigma0_sq") return fmt_f64(c.sigma0_sq);
  if (key == "c_inf") return fmt_f64(c.c_inf);
  if (key == "singleton_threshold") return fmt_f64(c.singleton_threshold);
  if (key == "eval_samples") return std::to_string(c.eval_samples);
  throw ConfigError("unknown config key '" + key + "'");
}

inline std::string serialize_config(const TrainConfig& c) {
  std::ostringstream out;
  for (const auto& k : config_keys()) out << k << " = " << config_get(c, k) << "\n";
  return out.str();
}

inline TrainConfig parse_config_text(const std::string& text) {
  TrainConfig c;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    config_set(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return c;
}

inline TrainConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

// "key=value" override, as given on the command line.
inline void apply_override(TrainConfig& c, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) throw ConfigError("override must be key=value, got '" + kv + "'");
  config_set(c, detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
}

// FNV-1a over the serialized form; identifies a config in manifests.
inline std::uint64_t config_hash(const TrainConfig& c) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char ch : serialize_config(c)) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace cfl
