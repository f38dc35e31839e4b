#include "permlearn/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "permlearn/kernels.hpp"
#include "permlearn/rng.hpp"

namespace permlearn {

double anneal(const AnnealSchedule& s, int step) {
  if (step < 0) throw std::invalid_argument("anneal: step must be >= 0");
  if (s.kind == ScheduleKind::Constant) return s.beta_start;
  if (s.horizon_steps <= 0)
    throw std::invalid_argument("anneal: non-constant schedule needs horizon > 0");
  const double f = std::min(1.0, static_cast<double>(step) / s.horizon_steps);
  if (s.kind == ScheduleKind::Linear) return s.beta_start + (s.beta_end - s.beta_start) * f;
  return s.beta_start * std::pow(s.beta_end / s.beta_start, f);
}

std::string to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::Linear: return "linear";
    case ScheduleKind::Exponential: return "exponential";
    case ScheduleKind::Constant: return "constant";
  }
  return "?";
}

ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "linear") return ScheduleKind::Linear;
  if (s == "exponential" || s == "exp") return ScheduleKind::Exponential;
  if (s == "constant") return ScheduleKind::Constant;
  throw std::invalid_argument("unknown schedule kind: " + s);
}

std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::Global: return "global";
    case TrainMode::EntropyAdaptive: return "entropy_adaptive";
    case TrainMode::DegreeAdaptive: return "degree_adaptive";
  }
  return "?";
}

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "global") return TrainMode::Global;
  if (s == "entropy_adaptive") return TrainMode::EntropyAdaptive;
  if (s == "degree_adaptive") return TrainMode::DegreeAdaptive;
  throw std::invalid_argument("unknown train mode: " + s);
}

double clip_gradients(Matrix& grads, double clip_norm) {
  if (!(clip_norm > 0.0)) throw std::domain_error("clip_gradients: clip_norm must be positive");
  double sq = 0.0;
  for (double g : grads.data) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > clip_norm) {
    kernels::scale(grads.data.data(), clip_norm / norm, grads.data.data(), grads.size());
    return clip_norm;
  }
  return norm;
}

void adam_step(Matrix& params, const Matrix& grads, AdamState& state, const TrainConfig& cfg) {
  require_same_shape(params, grads, "adam_step");
  if (state.m.data.empty()) {
    state.m = Matrix(params.rows, params.cols);
    state.v = Matrix(params.rows, params.cols);
  }
  require_same_shape(params, state.m, "adam_step(state)");
  state.t += 1;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, state.t);
  const double bc2 = 1.0 - std::pow(b2, state.t);
  for (int i = 0; i < params.size(); ++i) {
    state.m.data[i] = b1 * state.m.data[i] + (1.0 - b1) * grads.data[i];
    state.v.data[i] = b2 * state.v.data[i] + (1.0 - b2) * grads.data[i] * grads.data[i];
    const double mhat = state.m.data[i] / bc1;
    const double vhat = state.v.data[i] / bc2;
    params.data[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
  }
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Var structural_loss(Tape& tape, Var p, const TaskInstance& inst, const TrainConfig& cfg,
                    const Matrix& distances) {
  switch (inst.kind) {
    case TaskKind::Sorting: {
      Var x_hat = tape.matmul(tape.transpose(p), tape.constant(inst.x));
      return monotonicity_loss(tape, x_hat);
    }
    case TaskKind::Jigsaw: {
      Var x_hat = tape.matmul(tape.transpose(p), tape.constant(inst.x));
      return jigsaw_smoothness_loss(tape, x_hat, inst.grid, inst.tile_h, inst.tile_w, cfg.band_k);
    }
    case TaskKind::Tsp:
      return tsp_heatmap_loss(tape, p, distances, cfg.tsp_row_penalty);
    case TaskKind::Block:
      break;
  }
  throw std::invalid_argument("train_instance: no structural loss for task kind " +
                              to_string(inst.kind));
}

double mean_row_entropy(const Matrix& q, double floor) {
  auto [row_h, col_h] = normalized_entropies(q, floor);
  double acc = 0.0;
  for (double h : row_h) acc += h;
  return acc / static_cast<double>(row_h.size());
}

}  // namespace

TrainedResult train_instance(const TaskInstance& inst, const TrainConfig& cfg, TrainMode mode) {
  validate(inst);
  if (inst.kind == TaskKind::Block)
    throw std::invalid_argument("train_instance: block instances are verification fixtures");
  if (mode == TrainMode::DegreeAdaptive && inst.kind != TaskKind::Tsp)
    throw std::invalid_argument("train_instance: degree_adaptive mode requires a tsp instance");
  if (cfg.epochs < 1 || cfg.samples_per_step < 1)
    throw std::invalid_argument("train_instance: epochs and samples_per_step must be >= 1");

  const int n = inst.n;
  const auto t_total = Clock::now();

  Matrix scores = rng::gaussian_matrix(n, n, cfg.init_sigma, rng::derive(cfg.seed, 0x171d));
  const bool masked = !inst.anchors.empty();
  const Matrix mask = masked ? anchor_mask(n, inst.anchors) : Matrix();
  const Matrix distances = inst.kind == TaskKind::Tsp ? pairwise_distances(inst.x) : Matrix();
  const uint64_t noise_seed = rng::derive(cfg.seed, 0xa5);

  auto effective_scores = [&](const Matrix& s) {
    if (!masked) return s;
    Matrix e(n, n);
    kernels::binary_op(kernels::Binary::Add, s.data.data(), mask.data.data(), e.data.data(),
                       e.size());
    return e;
  };

  TrainedResult result;
  AdamState adam;
  double train_seconds = 0.0;

  for (int step = 0; step < cfg.epochs; ++step) {
    const double beta0 = anneal(cfg.schedule, step);
    const Matrix s_eff = effective_scores(scores);

    // Diagnostics shared by every mode (trace entropy, periodic decode) are
    // computed outside the timed path; adaptive modes recompute the
    // deterministic assignment inside it, where it is part of the algorithm.
    SoftPermutation q_diag = deterministic_assignment(s_eff, beta0, cfg.sinkhorn.iterations);

    const auto t_step = Clock::now();
    BetaField field;
    switch (mode) {
      case TrainMode::Global:
        field = constant_field(n, beta0);
        break;
      case TrainMode::EntropyAdaptive: {
        SoftPermutation q = deterministic_assignment(s_eff, beta0, cfg.sinkhorn.iterations);
        if (step < cfg.controller.warmup_steps) {
          field = constant_field(n, beta0);
        } else {
          auto [row_h, col_h] = normalized_entropies(q.matrix, cfg.controller.entropy_floor);
          field = field_from_entropies(row_h, col_h, beta0, cfg.controller);
        }
        break;
      }
      case TrainMode::DegreeAdaptive: {
        SoftPermutation q = deterministic_assignment(s_eff, beta0, cfg.sinkhorn.iterations);
        if (step < cfg.controller.warmup_steps) {
          field = constant_field(n, beta0);
        } else {
          field = degree_violation_field(successor_heatmap(q.matrix), beta0, cfg.controller);
        }
        break;
      }
    }

    Tape tape;
    Var s_var = tape.leaf(scores, true);
    Var s_eff_var = masked ? tape.add(s_var, tape.constant(mask)) : s_var;
    Var loss_sum;
    SinkhornConfig sk = cfg.sinkhorn;
    sk.seed = noise_seed;
    for (int sample = 0; sample < cfg.samples_per_step; ++sample) {
      const uint64_t counter =
          static_cast<uint64_t>(step) * static_cast<uint64_t>(cfg.samples_per_step) + sample;
      Var p = gumbel_sinkhorn(tape, s_eff_var, field.entries, sk, nullptr, counter);
      Var sample_loss = structural_loss(tape, p, inst, cfg, distances);
      loss_sum = sample == 0 ? sample_loss : tape.add(loss_sum, sample_loss);
    }
    Var loss = tape.scale(loss_sum, 1.0 / cfg.samples_per_step);
    const double loss_value = tape.scalar_value(loss);

    if (!std::isfinite(loss_value)) {
      result.failed = true;
      char buf[128];
      std::snprintf(buf, sizeof(buf), "non-finite loss at step %d", step);
      result.failure = buf;
      break;
    }

    tape.backward(loss);
    Matrix grads = tape.grad(s_var);
    const double post_clip = clip_gradients(grads, cfg.clip_norm);
    result.max_post_clip_norm = std::max(result.max_post_clip_norm, post_clip);
    adam_step(scores, grads, adam, cfg);
    train_seconds += seconds_since(t_step);

    TraceRow row;
    row.step = step;
    row.loss = loss_value;
    row.beta0 = beta0;
    row.mean_row_entropy = mean_row_entropy(q_diag.matrix, cfg.controller.entropy_floor);
    row.min_beta = field.min_entry();
    row.max_beta = field.max_entry();
    if (cfg.decode_every > 0 && (step % cfg.decode_every == 0 || step + 1 == cfg.epochs)) {
      Permutation decoded = hungarian(q_diag.matrix);
      Permutation truth;
      truth.map = inst.truth;
      row.decoded_tau = inst.kind == TaskKind::Tsp ? tour_kendall_tau(decoded, truth)
                                                   : kendall_tau(decoded, truth);
    }
    result.trace.push_back(row);
    if (step == 0) result.initial_loss = loss_value;
    result.final_loss = loss_value;
  }

  result.scores = scores;
  if (!result.failed) {
    const double beta_final = anneal(cfg.schedule, cfg.epochs);
    SoftPermutation q =
        deterministic_assignment(effective_scores(scores), beta_final, cfg.sinkhorn.iterations);
    result.decoded = hungarian(q.matrix);
    result.record = metrics(result.decoded, inst);
  }
  result.train_seconds = train_seconds;
  result.mean_step_seconds =
      result.trace.empty() ? 0.0 : train_seconds / static_cast<double>(result.trace.size());
  result.total_seconds = seconds_since(t_total);
  return result;
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace) {
  os << "step,loss,beta0,mean_row_entropy,min_beta,max_beta,decoded_tau\n";
  char buf[256];
  for (const TraceRow& r : trace) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,", r.step, r.loss, r.beta0,
                  r.mean_row_entropy, r.min_beta, r.max_beta);
    os << buf;
    if (r.decoded_tau) {
      std::snprintf(buf, sizeof(buf), "%.17g", *r.decoded_tau);
      os << buf;
    }
    os << "\n";
  }
}

}  // namespace permlearn
