#include "permlearn/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "permlearn/kernels.hpp"
#include "permlearn/rng.hpp"
#include "permlearn/sinkhorn.hpp"

namespace permlearn {

using nlohmann::json;
namespace fs = std::filesystem;

TaskInstance TaskSpec::generate(uint64_t run_seed) const {
  const uint64_t s = rng::derive(seed_base, run_seed);
  switch (kind) {
    case TaskKind::Sorting: return generate_sorting(n, lo, hi, s);
    case TaskKind::Jigsaw: return generate_jigsaw(grid, tile, anchors, s);
    case TaskKind::Tsp: return generate_tsp(n, s);
    case TaskKind::Block: break;
  }
  throw ConfigError("task: block instances are verification fixtures, not training tasks");
}

// ---- config -----------------------------------------------------------------

namespace {

TrainConfig default_train_config(TaskKind kind) {
  TrainConfig t;
  switch (kind) {
    case TaskKind::Sorting:
      t.sinkhorn.iterations = 10;
      t.samples_per_step = 5;
      t.epochs = 300;
      t.schedule = {ScheduleKind::Linear, 0.66, 2.0, 150};
      t.controller = {0.7, 0.1, Combine::Avg, 1, 1e-8};
      break;
    case TaskKind::Jigsaw:
      t.sinkhorn.iterations = 10;
      t.samples_per_step = 5;
      t.epochs = 300;
      t.schedule = {ScheduleKind::Linear, 0.5, 2.0, 300};
      t.controller = {0.7, 0.2, Combine::Avg, 1, 1e-8};
      break;
    case TaskKind::Tsp:
      t.sinkhorn.iterations = 50;
      t.samples_per_step = 8;
      t.epochs = 300;
      t.schedule = {ScheduleKind::Linear, 1.0, 5.0, 200};
      t.controller = {0.65, 0.1, Combine::Avg, 30, 1e-8};
      break;
    case TaskKind::Block:
      break;
  }
  return t;
}

int line_of_byte(const std::string& text, size_t byte) {
  int line = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

Combine combine_from_string(const std::string& s) {
  if (s == "avg") return Combine::Avg;
  if (s == "prod") return Combine::Prod;
  throw ConfigError("controller.combine must be \"avg\" or \"prod\"");
}

std::string combine_to_string(Combine c) { return c == Combine::Avg ? "avg" : "prod"; }

void apply_train_overrides(TrainConfig& t, const json& j) {
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  t.epochs = j.value("epochs", t.epochs);
  t.samples_per_step = j.value("samples_per_step", t.samples_per_step);
  t.sinkhorn.iterations = j.value("sinkhorn_iterations", t.sinkhorn.iterations);
  t.clip_norm = j.value("clip_norm", t.clip_norm);
  t.decode_every = j.value("decode_every", t.decode_every);
  t.band_k = j.value("band_k", t.band_k);
  t.tsp_row_penalty = j.value("tsp_row_penalty", t.tsp_row_penalty);
  t.init_sigma = j.value("init_sigma", t.init_sigma);
  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    t.schedule.kind = schedule_kind_from_string(s.value("kind", to_string(t.schedule.kind)));
    t.schedule.beta_start = s.value("beta_start", t.schedule.beta_start);
    t.schedule.beta_end = s.value("beta_end", t.schedule.beta_end);
    t.schedule.horizon_steps = s.value("horizon_steps", t.schedule.horizon_steps);
  }
  if (j.contains("controller")) {
    const json& c = j.at("controller");
    t.controller.H0 = c.value("H0", t.controller.H0);
    t.controller.b_max = c.value("b_max", t.controller.b_max);
    if (c.contains("combine"))
      t.controller.combine = combine_from_string(c.at("combine").get<std::string>());
    t.controller.warmup_steps = c.value("warmup_steps", t.controller.warmup_steps);
    t.controller.entropy_floor = c.value("entropy_floor", t.controller.entropy_floor);
  }
}

std::string fmt(double v, const char* spec = "%.12g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace

ExperimentConfig config_from_json(const json& j, const std::string& path) {
  ExperimentConfig cfg;
  try {
    const json& jt = j.at("task");
    cfg.task.kind = task_kind_from_string(jt.at("kind").get<std::string>());
    cfg.task.n = jt.value("n", cfg.task.n);
    if (jt.contains("range")) {
      cfg.task.lo = jt.at("range").at(0).get<double>();
      cfg.task.hi = jt.at("range").at(1).get<double>();
    }
    cfg.task.grid = jt.value("grid", cfg.task.grid);
    cfg.task.tile = jt.value("tile", cfg.task.tile);
    cfg.task.anchors = jt.value("anchors", cfg.task.anchors);
    cfg.task.seed_base = jt.value("seed_base", cfg.task.seed_base);

    cfg.train = default_train_config(cfg.task.kind);
    if (j.contains("train")) apply_train_overrides(cfg.train, j.at("train"));

    if (!j.contains("modes") || !j.at("modes").is_array() || j.at("modes").empty())
      throw ConfigError("modes must be a non-empty array");
    for (const auto& m : j.at("modes"))
      cfg.modes.push_back(train_mode_from_string(m.get<std::string>()));
    for (TrainMode m : cfg.modes)
      if (m == TrainMode::DegreeAdaptive && cfg.task.kind != TaskKind::Tsp)
        throw ConfigError("degree_adaptive mode requires a tsp task");

    if (!j.contains("seeds") || !j.at("seeds").is_array() || j.at("seeds").empty())
      throw ConfigError("seeds must be a non-empty array");
    for (const auto& s : j.at("seeds")) cfg.seeds.push_back(s.get<uint64_t>());

    if (j.contains("sweep")) {
      const json& sw = j.at("sweep");
      if (sw.contains("H0")) cfg.sweep.h0 = sw.at("H0").get<std::vector<double>>();
      if (sw.contains("b_max")) cfg.sweep.b_max = sw.at("b_max").get<std::vector<double>>();
    }
    cfg.output_dir = j.value("output_dir", cfg.output_dir);

    if (cfg.train.epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (cfg.train.samples_per_step < 1) throw ConfigError("train.samples_per_step must be >= 1");
    if (cfg.train.sinkhorn.iterations < 1)
      throw ConfigError("train.sinkhorn_iterations must be >= 1");
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ":" + std::to_string(line_of_byte(text, e.byte)) + ": " + e.what());
  }
  return config_from_json(j, path);
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["task"]["kind"] = to_string(cfg.task.kind);
  j["task"]["n"] = cfg.task.n;
  j["task"]["range"] = {cfg.task.lo, cfg.task.hi};
  j["task"]["grid"] = cfg.task.grid;
  j["task"]["tile"] = cfg.task.tile;
  j["task"]["anchors"] = cfg.task.anchors;
  j["task"]["seed_base"] = cfg.task.seed_base;
  const TrainConfig& t = cfg.train;
  j["train"] = {{"learning_rate", t.learning_rate},
                {"epochs", t.epochs},
                {"samples_per_step", t.samples_per_step},
                {"sinkhorn_iterations", t.sinkhorn.iterations},
                {"clip_norm", t.clip_norm},
                {"decode_every", t.decode_every},
                {"band_k", t.band_k},
                {"tsp_row_penalty", t.tsp_row_penalty},
                {"init_sigma", t.init_sigma},
                {"schedule",
                 {{"kind", to_string(t.schedule.kind)},
                  {"beta_start", t.schedule.beta_start},
                  {"beta_end", t.schedule.beta_end},
                  {"horizon_steps", t.schedule.horizon_steps}}},
                {"controller",
                 {{"H0", t.controller.H0},
                  {"b_max", t.controller.b_max},
                  {"combine", combine_to_string(t.controller.combine)},
                  {"warmup_steps", t.controller.warmup_steps},
                  {"entropy_floor", t.controller.entropy_floor}}}};
  j["modes"] = json::array();
  for (TrainMode m : cfg.modes) j["modes"].push_back(to_string(m));
  j["seeds"] = cfg.seeds;
  if (cfg.sweep.active()) {
    if (!cfg.sweep.h0.empty()) j["sweep"]["H0"] = cfg.sweep.h0;
    if (!cfg.sweep.b_max.empty()) j["sweep"]["b_max"] = cfg.sweep.b_max;
  }
  j["output_dir"] = cfg.output_dir;
  return j;
}

// ---- runner -----------------------------------------------------------------

namespace {

struct Cell {
  TrainMode mode;
  double h0;
  double b_max;
};

struct RunJob {
  Cell cell;
  uint64_t seed;
};

RunOutcome execute_run(const ExperimentConfig& cfg, const RunJob& job, const fs::path& out_dir) {
  TrainConfig train = cfg.train;
  train.controller.H0 = job.cell.h0;
  train.controller.b_max = job.cell.b_max;
  train.seed = job.seed;

  RunOutcome out;
  out.mode = to_string(job.cell.mode);
  out.h0 = job.cell.h0;
  out.b_max = job.cell.b_max;
  out.seed = job.seed;

  char name[160];
  std::snprintf(name, sizeof(name), "trace_%s_h%.4g_b%.4g_seed%llu.csv", out.mode.c_str(),
                job.cell.h0, job.cell.b_max, static_cast<unsigned long long>(job.seed));
  out.trace_file = name;

  try {
    TaskInstance inst = cfg.task.generate(job.seed);
    TrainedResult res = train_instance(inst, train, job.cell.mode);
    std::ofstream trace(out_dir / name);
    write_trace_csv(trace, res.trace);
    out.failed = res.failed;
    out.failure = res.failure;
    if (!res.failed) {
      out.tau = res.record.tau;
      out.final_loss = res.final_loss;
      out.tour_length = res.record.tour_length;
      out.gap = res.record.gap;
      out.delta_tau = res.record.delta_tau;
    }
  } catch (const std::exception& e) {
    out.failed = true;
    out.failure = e.what();
  }
  return out;
}

struct Stats {
  double mean = 0.0;
  double stddev = 0.0;
  int count = 0;
};

Stats stats_of(const std::vector<double>& xs) {
  Stats s;
  s.count = static_cast<int>(xs.size());
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= s.count;
  if (s.count > 1) {
    double acc = 0.0;
    for (double x : xs) acc += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(acc / (s.count - 1));
  }
  return s;
}

std::string iso_utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg, const std::string& out_dir_override, int threads,
                   std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path out_dir = out_dir_override.empty() ? fs::path(cfg.output_dir)
                                                    : fs::path(out_dir_override);
  fs::create_directories(out_dir);

  if (const char* env = std::getenv("PERMLEARN_THREADS")) threads = std::atoi(env);
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads <= 0) threads = 1;

  std::vector<double> h0_grid = cfg.sweep.h0.empty() ? std::vector<double>{cfg.train.controller.H0}
                                                     : cfg.sweep.h0;
  std::vector<double> b_grid = cfg.sweep.b_max.empty()
                                   ? std::vector<double>{cfg.train.controller.b_max}
                                   : cfg.sweep.b_max;

  std::vector<Cell> cells;
  for (TrainMode m : cfg.modes)
    for (double h0 : h0_grid)
      for (double b : b_grid) cells.push_back({m, h0, b});

  std::vector<RunJob> jobs;
  for (const Cell& c : cells)
    for (uint64_t s : cfg.seeds) jobs.push_back({c, s});

  const int workers = std::min<int>(threads, static_cast<int>(jobs.size()));
  std::vector<RunOutcome> outcomes(jobs.size());
  std::atomic<size_t> next{0};
  auto work = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= jobs.size()) break;
      outcomes[i] = execute_run(cfg, jobs[i], out_dir);
    }
  };
  // Kernel-level OpenMP stays off while several runs share the machine.
  const bool kernel_parallel_before = kernels::parallel_enabled();
  if (workers > 1) {
    kernels::set_parallel_enabled(false);
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
    kernels::set_parallel_enabled(kernel_parallel_before);
  } else {
    work();
  }

  // Summary: one row per cell, aggregated over seeds.
  std::ofstream summary(out_dir / "summary.csv");
  summary << "kind,n,mode,H0,b_max,seeds,mean_tau,std_tau,mean_final_loss,std_final_loss,"
             "mean_tour_length,std_tour_length,mean_gap,mean_delta_tau,failures\n";
  int total_failures = 0;
  size_t idx = 0;
  for (const Cell& c : cells) {
    std::vector<double> taus, losses, lengths, gaps, dtaus;
    int failures = 0;
    for (size_t s = 0; s < cfg.seeds.size(); ++s, ++idx) {
      const RunOutcome& o = outcomes[idx];
      if (o.failed) {
        ++failures;
        continue;
      }
      taus.push_back(o.tau);
      losses.push_back(o.final_loss);
      if (o.tour_length) lengths.push_back(*o.tour_length);
      if (o.gap) gaps.push_back(*o.gap);
      if (o.delta_tau) dtaus.push_back(*o.delta_tau);
    }
    total_failures += failures;
    const Stats st = stats_of(taus), sl = stats_of(losses), sn = stats_of(lengths),
                sg = stats_of(gaps), sd = stats_of(dtaus);
    summary << to_string(cfg.task.kind) << ',' << cfg.task.n << ',' << to_string(c.mode) << ','
            << fmt(c.h0) << ',' << fmt(c.b_max) << ',' << cfg.seeds.size() << ',' << fmt(st.mean)
            << ',' << fmt(st.stddev) << ',' << fmt(sl.mean) << ',' << fmt(sl.stddev) << ',';
    if (sn.count) summary << fmt(sn.mean) << ',' << fmt(sn.stddev);
    else summary << ',';
    summary << ',';
    if (sg.count) summary << fmt(sg.mean);
    summary << ',';
    if (sd.count) summary << fmt(sd.mean);
    summary << ',' << failures << '\n';
  }
  summary.close();

  json manifest;
  manifest["version"] = kVersion;
  manifest["config"] = config_to_json(cfg);
  manifest["threads"] = threads;
  manifest["started_at"] = iso_utc_now();
  manifest["wall_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest["runs"] = json::array();
  for (const RunOutcome& o : outcomes) {
    json r = {{"mode", o.mode},         {"H0", o.h0},      {"b_max", o.b_max},
              {"seed", o.seed},         {"failed", o.failed}, {"trace", o.trace_file}};
    if (o.failed) {
      r["failure"] = o.failure;
    } else {
      r["tau"] = o.tau;
      r["final_loss"] = o.final_loss;
      if (o.tour_length) r["tour_length"] = *o.tour_length;
      if (o.gap) r["gap"] = *o.gap;
      if (o.delta_tau) r["delta_tau"] = *o.delta_tau;
    }
    manifest["runs"].push_back(r);
  }
  std::ofstream mf(out_dir / "manifest.json");
  mf << manifest.dump(2) << '\n';

  log << jobs.size() << " runs (" << cells.size() << " cells x " << cfg.seeds.size()
      << " seeds), " << total_failures << " failures; outputs in " << out_dir.string() << "\n";
  return total_failures == 0 ? 0 : 1;
}

// ---- verification suites ------------------------------------------------------

ClosedFormReport run_closed_form() {
  ClosedFormReport rep;
  const double betas[] = {0.5, 1.0, 2.0, 5.0};
  const double deltas[] = {0.05, 0.2, std::log(2.0)};
  const int sizes[] = {2, 3, 6};
  for (double beta : betas)
    for (double delta : deltas)
      for (int n2 : sizes) {
        auto [a, b] = hard_block_closed_form(n2, beta, delta);
        Matrix z(n2, n2, -beta * delta);
        for (int i = 0; i < n2; ++i) z(i, i) = 0.0;
        SoftPermutation p = log_sinkhorn(z, 200);
        double err = 0.0;
        for (int i = 0; i < n2; ++i)
          for (int j = 0; j < n2; ++j)
            err = std::max(err, std::fabs(p.matrix(i, j) - (i == j ? a : b)));
        rep.max_abs_err = std::max(rep.max_abs_err, err);
        ++rep.cells;
      }
  rep.pass = rep.max_abs_err < 1e-6;
  return rep;
}

Prop1Summary run_prop1(int grid_points) {
  Prop1Summary sum;
  {
    const auto spec = BlockAmbiguousSpec::make(2, 2, 1.0, 0.1);
    const auto bounds = proposition1_bounds(spec, 0.1, 0.49);
    const auto grid =
        log_uniform_grid(bounds.beta_upper / 10.0, bounds.beta_lower * 10.0, grid_points);
    sum.incompatible = verify_no_global_beta(spec, 0.1, 0.49, grid);
  }
  {
    const auto spec = BlockAmbiguousSpec::make(4, 4, 1.0, 1.0);
    const auto bounds = proposition1_bounds(spec, 0.2, 0.05);
    const auto grid =
        log_uniform_grid(bounds.beta_upper / 10.0, bounds.beta_lower * 10.0, grid_points);
    sum.compatible = verify_no_global_beta(spec, 0.2, 0.05, grid);
  }
  sum.pass = sum.incompatible.bounds.incompatible() && !sum.incompatible.any_feasible &&
             !sum.compatible.bounds.incompatible() && sum.compatible.any_feasible;
  return sum;
}

namespace {
// <beta ⊙ C, P> + sum P log P with C = -S; the entropic assignment objective
// that Sinkhorn(beta ⊙ S) minimizes over the Birkhoff polytope.
double regularized_objective(const Matrix& s, const Matrix& beta, const Matrix& p) {
  double obj = 0.0;
  for (int i = 0; i < p.size(); ++i) {
    obj += beta.data[i] * (-s.data[i]) * p.data[i];
    if (p.data[i] > 0.0) obj += p.data[i] * std::log(p.data[i]);
  }
  return obj;
}
}  // namespace

Prop2Report run_prop2(int problems, int competitors, uint64_t seed) {
  Prop2Report rep;
  rep.problems = problems;
  rep.competitors = competitors;
  rep.max_violation = -std::numeric_limits<double>::infinity();
  const int n = 5;
  for (int k = 0; k < problems; ++k) {
    const Matrix s = rng::uniform_matrix(n, n, -2.0, 2.0, rng::derive(seed, 2 * k));
    const Matrix beta = rng::uniform_matrix(n, n, 0.5, 2.0, rng::derive(seed, 2 * k + 1));
    Matrix z(n, n);
    kernels::binary_op(kernels::Binary::Mul, beta.data.data(), s.data.data(), z.data.data(),
                       z.size());
    SoftPermutation star = log_sinkhorn(z, 3000);
    if (star.residual > 1e-10) throw std::runtime_error("prop2: Sinkhorn did not converge");
    const double f_star = regularized_objective(s, beta, star.matrix);
    for (int c = 0; c < competitors; ++c) {
      Matrix raw = rng::uniform_matrix(n, n, 0.01, 1.0, rng::derive(seed ^ 0xc0ffee, k * 100003 + c));
      Matrix logits(n, n);
      for (int i = 0; i < n * n; ++i) logits.data[i] = std::log(raw.data[i]);
      SoftPermutation comp = log_sinkhorn(logits, 300);
      const double f_comp = regularized_objective(s, beta, comp.matrix);
      rep.max_violation = std::max(rep.max_violation, f_star - f_comp);
    }
  }
  rep.pass = rep.max_violation <= 1e-9;
  return rep;
}

// ---- gradient checks ----------------------------------------------------------

namespace {

struct FdCase {
  std::string name;
  // Builds the scalar loss from the parameter leaf on the given tape.
  std::function<Var(Tape&, Var)> build;
  int rows = 3, cols = 3;
  double lo = -2.0, hi = 2.0;
  // Moves sampled inputs away from kinks/poles (relu at 0, log near 0, ...).
  std::function<void(Matrix&)> adjust;
};

double max_rel_err_for_case(const FdCase& c, uint64_t seed) {
  Matrix x = rng::uniform_matrix(c.rows, c.cols, c.lo, c.hi, seed);
  if (c.adjust) c.adjust(x);

  Tape t;
  Var leaf = t.leaf(x, true);
  Var loss = c.build(t, leaf);
  t.backward(loss);
  const Matrix analytic = t.grad(leaf);

  auto eval = [&](const Matrix& m) {
    Tape tt;
    return tt.scalar_value(c.build(tt, tt.leaf(m, true)));
  };

  const double h = 1e-5;
  double worst = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    Matrix xp = x, xm = x;
    xp.data[i] += h;
    xm.data[i] -= h;
    const double fd = (eval(xp) - eval(xm)) / (2.0 * h);
    const double a = analytic.data[i];
    const double err = std::fabs(a - fd) / std::max({1.0, std::fabs(a), std::fabs(fd)});
    worst = std::max(worst, err);
  }
  return worst;
}

void keep_away_from_zero(Matrix& m, double margin) {
  for (double& v : m.data)
    if (std::fabs(v) < margin) v = v < 0.0 ? -margin : margin;
}

}  // namespace

std::vector<GradCheckReport> run_gradcheck(int cases_per_op, uint64_t seed) {
  std::vector<FdCase> cases;

  auto weighted_sum = [](Tape& t, Var v) {
    // Fixed non-uniform weights make the check sensitive to transposition
    // and indexing mistakes that a plain sum would hide.
    const Matrix& val = t.value(v);
    Matrix w(val.rows, val.cols);
    for (int i = 0; i < w.size(); ++i) w.data[i] = 0.3 + 0.01 * i;
    return t.reduce(t.mul(v, t.constant(w)), Reduce::Sum, Axis::All);
  };

  cases.push_back({"add", [&](Tape& t, Var x) {
                     Matrix b(3, 3, 0.7);
                     return weighted_sum(t, t.add(x, t.constant(b)));
                   }});
  cases.push_back({"sub", [&](Tape& t, Var x) {
                     Matrix b(3, 3, -0.4);
                     return weighted_sum(t, t.sub(t.constant(b), x));
                   }});
  cases.push_back({"mul", [&](Tape& t, Var x) { return weighted_sum(t, t.mul(x, t.square(x))); }});
  cases.push_back({"div", [&](Tape& t, Var x) {
                     Matrix b(3, 3, 1.7);
                     return weighted_sum(t, t.div(t.constant(b), x));
                   },
                   3, 3, -2.0, 2.0, [](Matrix& m) { keep_away_from_zero(m, 0.3); }});
  cases.push_back({"exp", [&](Tape& t, Var x) { return weighted_sum(t, t.exp(x)); }});
  cases.push_back({"log", [&](Tape& t, Var x) { return weighted_sum(t, t.log(x)); }, 3, 3, 0.1,
                   2.0, nullptr});
  cases.push_back({"relu", [&](Tape& t, Var x) { return weighted_sum(t, t.relu(x)); }, 3, 3, -2.0,
                   2.0, [](Matrix& m) { keep_away_from_zero(m, 1e-3 + 1e-4); }});
  cases.push_back({"square", [&](Tape& t, Var x) { return weighted_sum(t, t.square(x)); }});
  cases.push_back({"neg", [&](Tape& t, Var x) { return weighted_sum(t, t.neg(x)); }});
  cases.push_back({"scale", [&](Tape& t, Var x) { return weighted_sum(t, t.scale(x, -1.37)); }});
  cases.push_back({"matmul_lhs", [&](Tape& t, Var x) {
                     Matrix b = rng::uniform_matrix(5, 3, -1.0, 1.0, 99);
                     return weighted_sum(t, t.matmul(x, t.constant(b)));
                   },
                   4, 5, -2.0, 2.0, nullptr});
  cases.push_back({"matmul_rhs", [&](Tape& t, Var x) {
                     Matrix a = rng::uniform_matrix(3, 4, -1.0, 1.0, 98);
                     return weighted_sum(t, t.matmul(t.constant(a), x));
                   },
                   4, 5, -2.0, 2.0, nullptr});
  cases.push_back({"transpose", [&](Tape& t, Var x) { return weighted_sum(t, t.transpose(x)); },
                   3, 5, -2.0, 2.0, nullptr});
  cases.push_back({"log_softmax_row",
                   [&](Tape& t, Var x) { return weighted_sum(t, t.log_softmax(x, Axis::Row)); }});
  cases.push_back({"log_softmax_col",
                   [&](Tape& t, Var x) { return weighted_sum(t, t.log_softmax(x, Axis::Col)); }});
  cases.push_back({"reduce_sum_row", [&](Tape& t, Var x) {
                     return weighted_sum(t, t.reduce(x, Reduce::Sum, Axis::Row));
                   }});
  cases.push_back({"reduce_mean_col", [&](Tape& t, Var x) {
                     return weighted_sum(t, t.reduce(x, Reduce::Mean, Axis::Col));
                   }});
  cases.push_back({"reduce_mean_all",
                   [&](Tape& t, Var x) { return t.reduce(x, Reduce::Mean, Axis::All); }});
  cases.push_back({"gather", [&](Tape& t, Var x) {
                     std::vector<std::pair<int, int>> idx = {{0, 0}, {1, 2}, {2, 1}, {0, 0},
                                                             {2, 2}};
                     return weighted_sum(t, t.gather(x, idx));
                   }});
  cases.push_back({"sinkhorn_sum", [&](Tape& t, Var x) {
                     Var p = log_sinkhorn(t, x, 10);
                     return weighted_sum(t, p);
                   },
                   4, 4, -3.0, 3.0, nullptr});
  cases.push_back({"sorting_loss_path", [&](Tape& t, Var x) {
                     const Matrix values = rng::uniform_matrix(4, 1, 0.0, 1.0, 21);
                     const Matrix beta(4, 4, 1.3);
                     const Matrix noise = rng::gumbel_matrix(4, 4, 22);
                     SinkhornConfig sk;
                     sk.iterations = 10;
                     Var p = gumbel_sinkhorn(t, x, beta, sk, &noise);
                     Var x_hat = t.matmul(t.transpose(p), t.constant(values));
                     return monotonicity_loss(t, x_hat);
                   },
                   4, 4, -1.0, 1.0, nullptr});
  cases.push_back({"jigsaw_loss_path", [&](Tape& t, Var x) {
                     TaskInstance inst = generate_jigsaw(2, 3, 0, 5);
                     const Matrix beta(4, 4, 0.9);
                     const Matrix noise = rng::gumbel_matrix(4, 4, 23);
                     SinkhornConfig sk;
                     sk.iterations = 10;
                     Var p = gumbel_sinkhorn(t, x, beta, sk, &noise);
                     Var x_hat = t.matmul(t.transpose(p), t.constant(inst.x));
                     return jigsaw_smoothness_loss(t, x_hat, 2, 3, 3, 1);
                   },
                   4, 4, -1.0, 1.0, nullptr});
  cases.push_back({"tsp_loss_path", [&](Tape& t, Var x) {
                     TaskInstance inst = generate_tsp(4, 6);
                     const Matrix beta(4, 4, 1.1);
                     const Matrix noise = rng::gumbel_matrix(4, 4, 24);
                     SinkhornConfig sk;
                     sk.iterations = 20;
                     Var p = gumbel_sinkhorn(t, x, beta, sk, &noise);
                     return tsp_heatmap_loss(t, p, pairwise_distances(inst.x), 1.0);
                   },
                   4, 4, -1.0, 1.0, nullptr});

  std::vector<GradCheckReport> reports;
  for (const FdCase& c : cases) {
    GradCheckReport rep;
    rep.name = c.name;
    rep.cases = cases_per_op;
    for (int i = 0; i < cases_per_op; ++i)
      rep.max_rel_err = std::max(rep.max_rel_err,
                                 max_rel_err_for_case(c, rng::derive(seed, i * 131 + 7)));
    reports.push_back(rep);
  }
  return reports;
}

int run_verify(const std::string& what, std::ostream& os) {
  bool ok = true;
  auto line = [&](const std::string& name, bool pass, const std::string& detail) {
    os << (pass ? "[PASS] " : "[FAIL] ") << name << ": " << detail << "\n";
    if (!pass) ok = false;
  };

  if (what == "closed_form") {
    const auto rep = run_closed_form();
    line("closed_form", rep.pass,
         "max |closed form - Sinkhorn(200)| = " + fmt(rep.max_abs_err) + " over " +
             std::to_string(rep.cells) + " (beta, delta, n2) cells, tolerance 1e-6");
  } else if (what == "prop1") {
    const auto rep = run_prop1();
    line("prop1.incompatible", rep.incompatible.bounds.incompatible() &&
                                   !rep.incompatible.any_feasible,
         "bounds " + fmt(rep.incompatible.bounds.beta_lower) + " > " +
             fmt(rep.incompatible.bounds.beta_upper) + ", feasible beta count = " +
             std::to_string(std::count_if(rep.incompatible.grid.begin(),
                                          rep.incompatible.grid.end(),
                                          [](const BetaFeasibility& f) {
                                            return f.easy_ok && f.hard_ok;
                                          })) +
             " (no feasible beta expected)");
    line("prop1.compatible", !rep.compatible.bounds.incompatible() && rep.compatible.any_feasible,
         "bounds " + fmt(rep.compatible.bounds.beta_lower) + " < " +
             fmt(rep.compatible.bounds.beta_upper) + ", at least one feasible beta expected");
  } else if (what == "prop2") {
    const auto rep = run_prop2();
    line("prop2", rep.pass,
         "max objective violation = " + fmt(rep.max_violation) + " over " +
             std::to_string(rep.problems) + " problems x " + std::to_string(rep.competitors) +
             " competitors, tolerance 1e-9");
  } else if (what == "gradcheck") {
    const auto reps = run_gradcheck();
    double worst = 0.0;
    for (const auto& r : reps) {
      line("gradcheck." + r.name, r.max_rel_err < 1e-4,
           "max relative error " + fmt(r.max_rel_err) + " over " + std::to_string(r.cases) +
               " cases");
      worst = std::max(worst, r.max_rel_err);
    }
    os << "gradcheck overall max relative error: " << fmt(worst) << "\n";
  } else {
    os << "unknown verification suite: " << what
       << " (expected closed_form | prop1 | prop2 | gradcheck)\n";
    return 2;
  }
  return ok ? 0 : 1;
}

}  // namespace permlearn
