#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "permlearn/decode.hpp"
#include "permlearn/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"permlearn: unsupervised permutation learning experiments"};
  app.require_subcommand(1);

  std::string out_dir_override;
  int threads = 0;
  app.add_option("--out-dir", out_dir_override, "Override the config's output directory");
  app.add_option("--threads", threads,
                 "Worker pool size (default: logical cores; PERMLEARN_THREADS overrides)");

  auto* run_cmd = app.add_subcommand("run", "Execute an experiment config");
  std::string config_path;
  run_cmd->add_option("config", config_path, "JSON experiment config")->required();

  auto* verify_cmd = app.add_subcommand("verify", "Run a verification suite");
  std::string what;
  verify_cmd->add_option("what", what, "closed_form | prop1 | prop2 | gradcheck")->required();

  auto* baseline_cmd = app.add_subcommand("baseline", "Print a baseline estimate");
  std::string baseline_kind;
  int b_n = 25, b_anchors = 1, b_trials = 10000;
  uint64_t b_seed = 0;
  baseline_cmd->add_option("kind", baseline_kind, "mask_only")->required();
  baseline_cmd->add_option("--n", b_n, "Number of elements");
  baseline_cmd->add_option("--anchors", b_anchors, "Anchor count");
  baseline_cmd->add_option("--trials", b_trials, "Monte Carlo trials");
  baseline_cmd->add_option("--seed", b_seed, "RNG seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      permlearn::ExperimentConfig cfg = permlearn::load_config(config_path);
      return permlearn::run_experiment(cfg, out_dir_override, threads, std::cout);
    }
    if (verify_cmd->parsed()) {
      return permlearn::run_verify(what, std::cout);
    }
    if (baseline_cmd->parsed()) {
      if (baseline_kind != "mask_only") {
        std::cerr << "unknown baseline kind: " << baseline_kind << "\n";
        return 2;
      }
      const auto est = permlearn::mask_only_baseline(b_n, b_anchors, b_trials, b_seed);
      std::printf("mask_only n=%d anchors=%d trials=%d: mean tau = %.6f +/- %.6f (stderr)\n",
                  b_n, b_anchors, b_trials, est.mean, est.std_error);
      return 0;
    }
  } catch (const permlearn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
