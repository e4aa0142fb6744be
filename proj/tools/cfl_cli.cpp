// Command-line front end: train / probe / paired / report.
// Exit codes: 0 success, 1 config or usage error, 2 divergence.
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cfl/experiment.hpp"

namespace {

cfl::fs::path default_out_root() {
  if (const char* env = std::getenv("CFL_OUT_ROOT")) return env;
  return "runs";
}

cfl::TrainConfig load_with_overrides(const std::string& config_path,
                                     const std::vector<std::string>& sets) {
  cfl::TrainConfig cfg = cfl::load_config(config_path);
  for (const auto& kv : sets) cfl::apply_override(cfg, kv);
  return cfg;
}

int cmd_train(const std::string& config_path, const std::string& mode,
              std::uint64_t seed, bool seed_given, const std::string& out,
              const std::vector<std::string>& sets) {
  cfl::ExperimentSpec spec;
  spec.train = load_with_overrides(config_path, sets);
  if (!mode.empty()) spec.train.mode = cfl::mode_from_name(mode);
  if (seed_given) spec.train.seed = seed;
  spec.out_dir = out.empty() ? default_out_root() / "train" : cfl::fs::path(out);
  const cfl::RunResult res = cfl::run_experiment(spec, sets);
  if (res.outcome == cfl::RunOutcome::diverged) {
    std::cerr << "run diverged: " << res.trajectory.diagnostic << "\n";
    return 2;
  }
  std::cout << "completed " << res.trajectory.records.size() << " records -> "
            << res.dir.string() << "\n";
  return 0;
}

int cmd_probe(const std::string& ckpt_path, const std::string& dict_path,
              const std::string& task, std::uint64_t seed) {
  const cfl::NetworkParams params = cfl::load_checkpoint(ckpt_path);
  const cfl::Dictionary dict = cfl::load_dictionary_csv(dict_path);
  if (params.d1 != dict.d1)
    throw cfl::ConfigError("checkpoint d1 = " + std::to_string(params.d1) +
                           " does not match dictionary d1 = " + std::to_string(dict.d1));
  const cfl::LatentConfig lat = cfl::LatentConfig::from_cz(2.0, dict.d);
  const cfl::NoiseConfig noise = cfl::NoiseConfig::defaults(dict.d);
  const cfl::Vec64 wstar = cfl::task_direction(seed, dict.d);
  cfl::SeededRng rng(seed, cfl::Stream::probes);
  cfl::ProbeResult res;
  if (task == "regression") {
    res = cfl::probe_regression(cfl::network_encoder(params), dict, lat, noise, wstar,
                                4096, 2048, 1e-4, rng);
  } else if (task == "classification") {
    res = cfl::probe_classification(cfl::network_encoder(params), dict, lat, noise, wstar,
                                    4096, 2048, 500, 0.1, rng);
  } else {
    throw cfl::ConfigError("task must be regression or classification");
  }
  std::cout << cfl::probe_to_json(res).dump(2) << "\n";
  return 0;
}

int cmd_paired(const std::string& config_path, std::uint64_t seed, bool seed_given,
               const std::string& out, const std::vector<std::string>& sets) {
  cfl::TrainConfig cfg = load_with_overrides(config_path, sets);
  if (seed_given) cfg.seed = seed;
  const cfl::fs::path dir = out.empty() ? default_out_root() / "paired" : cfl::fs::path(out);
  cfl::ProbeSettings probes;
  const cfl::PairedResult res = cfl::run_paired(cfg, probes, dir);
  std::cout << "paired summary -> " << (dir / "paired_summary.csv").string() << "\n";
  const bool diverged = res.aug.outcome == cfl::RunOutcome::diverged ||
                        res.noaug.outcome == cfl::RunOutcome::diverged;
  return diverged ? 2 : 0;
}

int cmd_report(const std::string& run_dir) {
  std::cout << cfl::render_report(run_dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive feature-learning simulator"};
  app.require_subcommand(1);

  std::string config_path, mode, out, ckpt_path, dict_path, task = "regression", run_dir;
  std::uint64_t seed = 0;
  std::vector<std::string> sets;

  auto* train = app.add_subcommand("train", "Run one training leg");
  train->add_option("--config", config_path, "Config file (key = value lines)")->required();
  train->add_option("--mode", mode, "with-aug or no-aug");
  auto* train_seed = train->add_option("--seed", seed, "Seed override");
  train->add_option("--out", out, "Output directory");
  train->add_option("--set", sets, "key=value overrides (repeatable)");

  auto* probe = app.add_subcommand("probe", "Probe a frozen checkpoint");
  probe->add_option("--ckpt", ckpt_path, "Checkpoint file")->required();
  probe->add_option("--dict", dict_path, "Dictionary CSV")->required();
  probe->add_option("--task", task, "regression or classification");
  probe->add_option("--seed", seed, "Probe seed");

  auto* paired = app.add_subcommand("paired", "Run with-aug and no-aug legs on one seed");
  paired->add_option("--config", config_path, "Config file")->required();
  auto* paired_seed = paired->add_option("--seed", seed, "Seed override");
  paired->add_option("--out", out, "Output directory");
  paired->add_option("--set", sets, "key=value overrides (repeatable)");

  auto* report = app.add_subcommand("report", "Render a run directory as markdown");
  report->add_option("--run", run_dir, "Run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed())
      return cmd_train(config_path, mode, seed, train_seed->count() > 0, out, sets);
    if (probe->parsed()) return cmd_probe(ckpt_path, dict_path, task, seed);
    if (paired->parsed())
      return cmd_paired(config_path, seed, paired_seed->count() > 0, out, sets);
    if (report->parsed()) return cmd_report(run_dir);
  } catch (const cfl::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
