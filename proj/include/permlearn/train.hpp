#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "permlearn/controller.hpp"
#include "permlearn/decode.hpp"
#include "permlearn/matrix.hpp"
#include "permlearn/sinkhorn.hpp"
#include "permlearn/tasks.hpp"

namespace permlearn {

enum class ScheduleKind { Linear, Exponential, Constant };

struct AnnealSchedule {
  ScheduleKind kind = ScheduleKind::Linear;
  double beta_start = 0.66;
  double beta_end = 2.0;
  int horizon_steps = 150;
};

// beta0(t): exact beta_start at t = 0, exact beta_end for t >= horizon,
// linear or geometric in between.
double anneal(const AnnealSchedule& schedule, int step);

std::string to_string(ScheduleKind k);
ScheduleKind schedule_kind_from_string(const std::string& s);

enum class TrainMode { Global, EntropyAdaptive, DegreeAdaptive };
std::string to_string(TrainMode m);
TrainMode train_mode_from_string(const std::string& s);

struct TrainConfig {
  double learning_rate = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 1.0;
  int epochs = 150;  // one optimization step per epoch in per-instance mode
  int samples_per_step = 5;
  AnnealSchedule schedule{};
  ControllerConfig controller{};
  SinkhornConfig sinkhorn{};
  int decode_every = 10;
  int band_k = 1;                 // jigsaw smoothness band
  double tsp_row_penalty = 1.0;   // weight of the heatmap row-sum penalty
  double init_sigma = 0.1;        // score init: zeros + N(0, sigma^2)
  uint64_t seed = 0;
};

// Scales all gradients by clip_norm/g when the global L2 norm g exceeds
// clip_norm; returns the post-clip norm.
double clip_gradients(Matrix& grads, double clip_norm);

struct AdamState {
  Matrix m;
  Matrix v;
  int t = 0;
};

void adam_step(Matrix& params, const Matrix& grads, AdamState& state, const TrainConfig& cfg);

struct TraceRow {
  int step = 0;
  double loss = 0.0;
  double beta0 = 0.0;
  double mean_row_entropy = 0.0;
  double min_beta = 0.0;
  double max_beta = 0.0;
  std::optional<double> decoded_tau;
};

struct TrainedResult {
  Matrix scores;
  Permutation decoded;
  MetricsRecord record;
  std::vector<TraceRow> trace;
  bool failed = false;
  std::string failure;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double max_post_clip_norm = 0.0;
  // Optimization-path time (field construction incl. controller, sampling,
  // loss, backward, clip, Adam); per-step diagnostics shared by every mode
  // (trace entropy, periodic decoding) are excluded.
  double train_seconds = 0.0;
  double mean_step_seconds = 0.0;
  double total_seconds = 0.0;
};

// Per-instance unsupervised training: learnable score matrix, multi-sample
// Gumbel-Sinkhorn, structural loss by task kind, Adam with global-norm
// clipping, beta0 annealing, and the temperature field chosen by mode.
// Identical (instance, cfg, mode) inputs produce bitwise-identical results.
TrainedResult train_instance(const TaskInstance& inst, const TrainConfig& cfg, TrainMode mode);

// Trace CSV: header + one row per step; decoded_tau is empty on rows where
// no decode happened.
void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace);

}  // namespace permlearn
