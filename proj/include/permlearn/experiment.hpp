#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "permlearn/tasks.hpp"
#include "permlearn/train.hpp"

namespace permlearn {

inline constexpr const char* kVersion = "0.1.0";

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TaskSpec {
  TaskKind kind = TaskKind::Sorting;
  int n = 10;           // sorting/tsp size
  double lo = 0.0;      // sorting value range
  double hi = 1.0;
  int grid = 3;         // jigsaw
  int tile = 4;
  int anchors = 0;
  uint64_t seed_base = 0;

  TaskInstance generate(uint64_t run_seed) const;
};

struct SweepSpec {
  std::vector<double> h0;      // empty = no sweep on that axis
  std::vector<double> b_max;
  bool active() const { return !h0.empty() || !b_max.empty(); }
};

struct ExperimentConfig {
  TaskSpec task;
  TrainConfig train;
  std::vector<TrainMode> modes;
  std::vector<uint64_t> seeds;
  SweepSpec sweep;
  std::string output_dir = "out";
};

// Parses the JSON config; throws ConfigError with a "<path>:<line>:" prefix
// for syntax errors and a JSON-pointer-style location for semantic ones.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json(const nlohmann::json& j, const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

struct RunOutcome {
  std::string mode;
  double h0 = 0.0;
  double b_max = 0.0;
  uint64_t seed = 0;
  bool failed = false;
  std::string failure;
  double tau = 0.0;
  double final_loss = 0.0;
  std::optional<double> tour_length;
  std::optional<double> gap;
  std::optional<double> delta_tau;
  std::string trace_file;
};

// Executes the full grid (mode x sweep cell x seed) on a bounded worker pool,
// writes one trace CSV per run, summary.csv with one row per cell
// (mean/std over seeds) and manifest.json. Returns 0 when no run failed,
// 1 otherwise. threads <= 0 means hardware concurrency; the PERMLEARN_THREADS
// environment variable overrides the argument.
int run_experiment(const ExperimentConfig& cfg, const std::string& out_dir_override,
                   int threads, std::ostream& log);

// Verification suites exposed by the CLI: "closed_form", "prop1", "prop2",
// "gradcheck". Prints one pass/fail line per check; returns 0 iff all pass.
int run_verify(const std::string& what, std::ostream& os);

// ---- verification building blocks (also driven by the acceptance suite) ----

struct ClosedFormReport {
  double max_abs_err = 0.0;
  int cells = 0;
  bool pass = false;  // every grid cell within 1e-6 of the 200-iteration Sinkhorn
};
ClosedFormReport run_closed_form();

struct Prop1Summary {
  Prop1Report incompatible;  // canonical spec: no beta may pass both conditions
  Prop1Report compatible;    // control spec: at least one beta passes both
  bool pass = false;
};
Prop1Summary run_prop1(int grid_points = 100);

struct Prop2Report {
  int problems = 0;
  int competitors = 0;
  double max_violation = 0.0;  // max over problems of F(P*) - min_k F(P_k)
  bool pass = false;           // P* never loses by more than 1e-9
};
Prop2Report run_prop2(int problems = 20, int competitors = 1000, uint64_t seed = 7);

struct GradCheckReport {
  std::string name;
  double max_rel_err = 0.0;
  int cases = 0;
};
// Central finite differences (step 1e-5) against tape gradients for every
// differentiable primitive and the composed loss-through-Sinkhorn paths.
std::vector<GradCheckReport> run_gradcheck(int cases_per_op = 50, uint64_t seed = 11);

}  // namespace permlearn
