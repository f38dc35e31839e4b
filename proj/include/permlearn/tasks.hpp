#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "permlearn/matrix.hpp"
#include "permlearn/tape.hpp"

namespace permlearn {

enum class TaskKind { Sorting, Jigsaw, Tsp, Block };

std::string to_string(TaskKind k);
TaskKind task_kind_from_string(const std::string& s);

// One learning problem. x holds the element features (n x d): scalar values
// for sorting, flattened tile pixels for jigsaw, centered city coordinates
// for tsp, score matrix -C for block fixtures. truth maps element -> position
// and is used for evaluation only.
struct TaskInstance {
  TaskKind kind = TaskKind::Sorting;
  int n = 0;
  Matrix x;
  std::vector<std::pair<int, int>> anchors;  // (element, position)
  std::vector<int> truth;
  uint64_t seed = 0;

  // jigsaw geometry
  int grid = 0;
  int tile_h = 0;
  int tile_w = 0;

  // tsp reference (brute force, only for small n)
  bool has_reference = false;
  double reference_tour_length = 0.0;
};

void validate(const TaskInstance& inst);

nlohmann::json instance_to_json(const TaskInstance& inst);
TaskInstance instance_from_json(const nlohmann::json& j);

// ---- structural losses -----------------------------------------------------

// sum_i relu(-(x[i+1] - x[i]))^2 over an n x 1 column; zero iff non-decreasing.
Var monotonicity_loss(Tape& t, Var x_hat);
double monotonicity_loss(const Matrix& x_hat);

// Boundary smoothness of the reassembled p x p tile grid. x_hat rows are
// positions (row j = tile placed at grid cell (j / p, j % p), pixels flattened
// row-major as tile_h x tile_w). Sums squared differences between adjacent
// pixel columns/rows across a band of band_k pixels on each side of every
// shared tile boundary; band_k = 1 is the plain edge-to-edge loss, larger k
// adds the within-band total-variation terms.
Var jigsaw_smoothness_loss(Tape& t, Var x_hat, int grid, int tile_h, int tile_w, int band_k);
double jigsaw_smoothness_loss(const Matrix& x_hat, int grid, int tile_h, int tile_w, int band_k);

// Cyclic Euclidean tour length of the (soft) ordering x_hat (n x 2 rows in
// visiting order, x_{n+1} = x_1).
double tsp_tour_loss(const Matrix& x_hat);

// Training objective for routing: expected tour length under the successor
// heatmap induced by the position assignment P, <H, D>, plus
// row_penalty_weight * sum_i (sum_j H_ij - 1)^2.
Var tsp_heatmap_loss(Tape& t, Var p, const Matrix& distances, double row_penalty_weight);

// H = P V P^T where V is the cyclic shift (position j -> j+1 mod n):
// H(a, b) = mass of city b immediately following city a.
Matrix successor_shift(int n);
Var successor_heatmap(Tape& t, Var p);
Matrix successor_heatmap(const Matrix& p);

Matrix pairwise_distances(const Matrix& coords);

// ---- theory fixtures (block-ambiguous assignment) ---------------------------

struct BlockAmbiguousSpec {
  int n1 = 2;
  int n2 = 2;
  double Delta = 1.0;
  double delta = 0.1;
  double M = 10.0;  // defaults to 10 * Delta in make()
  static BlockAmbiguousSpec make(int n1, int n2, double Delta, double delta);
};

// Exact cost matrix: 0 on the diagonal, Delta within the easy block,
// delta within the hard block, M across blocks.
Matrix block_cost_matrix(const BlockAmbiguousSpec& spec);

// Constant diagonal a and off-diagonal b of the symmetric hard-block Sinkhorn
// solution: a = 1/(1 + (n2-1) e^{-beta*delta}), a + (n2-1) b = 1.
std::pair<double, double> hard_block_closed_form(int n2, double beta, double delta);

struct PropositionBounds {
  double epsilon = 0.0;
  double eta = 0.0;
  double beta_lower = 0.0;  // easy block discretizes only if beta >= this
  double beta_upper = 0.0;  // hard block stays diffuse only if beta <= this
  bool incompatible() const { return beta_lower > beta_upper; }
};

PropositionBounds proposition1_bounds(const BlockAmbiguousSpec& spec, double epsilon, double eta);

struct BetaFeasibility {
  double beta = 0.0;
  bool easy_ok = false;  // every easy diagonal >= 1 - epsilon
  bool hard_ok = false;  // every hard diagonal <= 1 - eta
};

struct Prop1Report {
  PropositionBounds bounds;
  std::vector<BetaFeasibility> grid;
  bool any_feasible = false;
  int sinkhorn_iterations = 200;
};

std::vector<double> log_uniform_grid(double lo, double hi, int points);

// Sweeps the beta grid, runs 200-iteration Sinkhorn on -beta*C for each
// point and tests both Proposition conditions.
Prop1Report verify_no_global_beta(const BlockAmbiguousSpec& spec, double epsilon, double eta,
                                  const std::vector<double>& beta_grid);

// ---- generators -------------------------------------------------------------

TaskInstance generate_sorting(int n, double lo, double hi, uint64_t seed);
// Synthetic smooth image (tilted plane plus a smooth bump, seeded), cut into
// grid x grid tiles of tile x tile pixels and scrambled.
TaskInstance generate_jigsaw(int grid, int tile, int anchors, uint64_t seed);
TaskInstance generate_tsp(int n, uint64_t seed);
TaskInstance generate_block(const BlockAmbiguousSpec& spec, uint64_t seed);

// Additive logit mask enforcing anchors: +30 on anchored entries, -30 on the
// rest of an anchored row/column, 0 elsewhere.
Matrix anchor_mask(int n, const std::vector<std::pair<int, int>>& anchors);

// Exhaustive shortest tour for n <= 10; returns its length and optionally the
// visiting order (as city indices).
double tsp_brute_force(const Matrix& coords, std::vector<int>* best_order = nullptr);

double tour_length_by_order(const Matrix& coords, const std::vector<int>& order);

}  // namespace permlearn
