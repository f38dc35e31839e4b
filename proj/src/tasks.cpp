#include "permlearn/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "permlearn/rng.hpp"
#include "permlearn/sinkhorn.hpp"

namespace permlearn {

using nlohmann::json;

std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::Sorting: return "sorting";
    case TaskKind::Jigsaw: return "jigsaw";
    case TaskKind::Tsp: return "tsp";
    case TaskKind::Block: return "block";
  }
  return "?";
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "sorting") return TaskKind::Sorting;
  if (s == "jigsaw") return TaskKind::Jigsaw;
  if (s == "tsp") return TaskKind::Tsp;
  if (s == "block") return TaskKind::Block;
  throw std::invalid_argument("unknown task kind: " + s);
}

void validate(const TaskInstance& inst) {
  if (inst.n < 1) throw std::invalid_argument("instance: n must be positive");
  if (inst.x.rows != inst.n) throw std::invalid_argument("instance: x must have n rows");
  if (static_cast<int>(inst.truth.size()) != inst.n)
    throw std::invalid_argument("instance: truth size mismatch");
  std::vector<bool> seen(inst.n, false);
  for (int p : inst.truth) {
    if (p < 0 || p >= inst.n || seen[p])
      throw std::invalid_argument("instance: truth is not a permutation");
    seen[p] = true;
  }
  std::set<int> elems, positions;
  for (auto [e, p] : inst.anchors) {
    if (e < 0 || e >= inst.n || p < 0 || p >= inst.n)
      throw std::invalid_argument("instance: anchor out of range");
    if (!elems.insert(e).second || !positions.insert(p).second)
      throw std::invalid_argument("instance: anchors not injective");
  }
}

// ---- structural losses -----------------------------------------------------

Var monotonicity_loss(Tape& t, Var x_hat) {
  const Matrix& x = t.value(x_hat);
  if (x.cols != 1) throw std::invalid_argument("monotonicity_loss: expected n x 1 column");
  if (x.rows < 2) throw std::invalid_argument("monotonicity_loss: need n >= 2");
  std::vector<std::pair<int, int>> hi, lo;
  hi.reserve(x.rows - 1);
  lo.reserve(x.rows - 1);
  for (int i = 0; i + 1 < x.rows; ++i) {
    hi.emplace_back(i + 1, 0);
    lo.emplace_back(i, 0);
  }
  Var diff = t.sub(t.gather(x_hat, hi), t.gather(x_hat, lo));
  return t.reduce(t.square(t.relu(t.neg(diff))), Reduce::Sum, Axis::All);
}

double monotonicity_loss(const Matrix& x_hat) {
  if (x_hat.cols != 1 || x_hat.rows < 2)
    throw std::invalid_argument("monotonicity_loss: expected n x 1 column with n >= 2");
  double loss = 0.0;
  for (int i = 0; i + 1 < x_hat.rows; ++i) {
    const double v = -(x_hat(i + 1, 0) - x_hat(i, 0));
    if (v > 0.0) loss += v * v;
  }
  return loss;
}

namespace {
struct PixelRef {
  int position;
  int pixel;
};

// Enumerates all penalized (a, b) pixel pairs of the boundary-band loss.
void smoothness_pairs(int grid, int tile_h, int tile_w, int band_k,
                      std::vector<std::pair<int, int>>& a, std::vector<std::pair<int, int>>& b) {
  const int p = grid;
  auto pos = [p](int gr, int gc) { return gr * p + gc; };
  auto pix = [tile_w](int r, int c) { return r * tile_w + c; };

  // Horizontal neighbors: strip of 2k pixel columns crossing the boundary.
  for (int gr = 0; gr < p; ++gr) {
    for (int gc = 0; gc + 1 < p; ++gc) {
      const int left = pos(gr, gc), right = pos(gr, gc + 1);
      auto strip_col = [&](int s) -> PixelRef {
        if (s < band_k) return {left, tile_w - band_k + s};
        return {right, s - band_k};
      };
      for (int s = 0; s + 1 < 2 * band_k; ++s) {
        PixelRef ca = strip_col(s), cb = strip_col(s + 1);
        for (int r = 0; r < tile_h; ++r) {
          a.emplace_back(ca.position, pix(r, ca.pixel));
          b.emplace_back(cb.position, pix(r, cb.pixel));
        }
      }
    }
  }
  // Vertical neighbors: strip of 2k pixel rows.
  for (int gr = 0; gr + 1 < p; ++gr) {
    for (int gc = 0; gc < p; ++gc) {
      const int top = pos(gr, gc), bottom = pos(gr + 1, gc);
      auto strip_row = [&](int s) -> PixelRef {
        if (s < band_k) return {top, tile_h - band_k + s};
        return {bottom, s - band_k};
      };
      for (int s = 0; s + 1 < 2 * band_k; ++s) {
        PixelRef ra = strip_row(s), rb = strip_row(s + 1);
        for (int c = 0; c < tile_w; ++c) {
          a.emplace_back(ra.position, pix(ra.pixel, c));
          b.emplace_back(rb.position, pix(rb.pixel, c));
        }
      }
    }
  }
}

void check_jigsaw_shape(const Matrix& x, int grid, int tile_h, int tile_w, int band_k) {
  if (grid < 2) throw std::invalid_argument("jigsaw_smoothness_loss: grid must be >= 2");
  if (x.rows != grid * grid || x.cols != tile_h * tile_w)
    throw std::invalid_argument("jigsaw_smoothness_loss: tile matrix shape does not divide");
  if (band_k < 1 || band_k > tile_h || band_k > tile_w)
    throw std::invalid_argument("jigsaw_smoothness_loss: band_k out of range");
}
}  // namespace

Var jigsaw_smoothness_loss(Tape& t, Var x_hat, int grid, int tile_h, int tile_w, int band_k) {
  check_jigsaw_shape(t.value(x_hat), grid, tile_h, tile_w, band_k);
  std::vector<std::pair<int, int>> a, b;
  smoothness_pairs(grid, tile_h, tile_w, band_k, a, b);
  Var diff = t.sub(t.gather(x_hat, a), t.gather(x_hat, b));
  return t.reduce(t.square(diff), Reduce::Sum, Axis::All);
}

double jigsaw_smoothness_loss(const Matrix& x_hat, int grid, int tile_h, int tile_w, int band_k) {
  check_jigsaw_shape(x_hat, grid, tile_h, tile_w, band_k);
  std::vector<std::pair<int, int>> a, b;
  smoothness_pairs(grid, tile_h, tile_w, band_k, a, b);
  double loss = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = x_hat(a[i].first, a[i].second) - x_hat(b[i].first, b[i].second);
    loss += d * d;
  }
  return loss;
}

double tsp_tour_loss(const Matrix& x_hat) {
  if (x_hat.cols != 2 || x_hat.rows < 2)
    throw std::invalid_argument("tsp_tour_loss: expected n x 2 with n >= 2");
  const int n = x_hat.rows;
  double len = 0.0;
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    const double dx = x_hat(i, 0) - x_hat(j, 0);
    const double dy = x_hat(i, 1) - x_hat(j, 1);
    len += std::sqrt(dx * dx + dy * dy);
  }
  return len;
}

Matrix successor_shift(int n) {
  Matrix v(n, n);
  for (int j = 0; j < n; ++j) v(j, (j + 1) % n) = 1.0;
  return v;
}

Var successor_heatmap(Tape& t, Var p) {
  const Matrix& pv = t.value(p);
  require_square(pv, "successor_heatmap");
  Var pv_shift = t.matmul(p, t.constant(successor_shift(pv.rows)));
  return t.matmul(pv_shift, t.transpose(p));
}

Matrix successor_heatmap(const Matrix& p) {
  Tape t;
  return t.value(successor_heatmap(t, t.constant(p)));
}

Matrix pairwise_distances(const Matrix& coords) {
  if (coords.cols != 2) throw std::invalid_argument("pairwise_distances: expected n x 2");
  const int n = coords.rows;
  Matrix d(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double dx = coords(i, 0) - coords(j, 0);
      const double dy = coords(i, 1) - coords(j, 1);
      d(i, j) = std::sqrt(dx * dx + dy * dy);
    }
  return d;
}

Var tsp_heatmap_loss(Tape& t, Var p, const Matrix& distances, double row_penalty_weight) {
  const Matrix& pv = t.value(p);
  require_square(pv, "tsp_heatmap_loss");
  require_same_shape(pv, distances, "tsp_heatmap_loss(distances)");
  Var h = successor_heatmap(t, p);
  Var expected_len = t.reduce(t.mul(h, t.constant(distances)), Reduce::Sum, Axis::All);
  Var row = t.reduce(h, Reduce::Sum, Axis::Row);
  Var pen = t.reduce(t.square(t.sub(row, t.constant(Matrix(pv.rows, 1, 1.0)))), Reduce::Sum,
                     Axis::All);
  return t.add(expected_len, t.scale(pen, row_penalty_weight));
}

// ---- theory fixtures --------------------------------------------------------

BlockAmbiguousSpec BlockAmbiguousSpec::make(int n1, int n2, double Delta, double delta) {
  BlockAmbiguousSpec s;
  s.n1 = n1;
  s.n2 = n2;
  s.Delta = Delta;
  s.delta = delta;
  s.M = 10.0 * Delta;
  return s;
}

Matrix block_cost_matrix(const BlockAmbiguousSpec& spec) {
  if (spec.n1 < 1 || spec.n2 < 1) throw std::invalid_argument("block_cost_matrix: block sizes");
  if (!(spec.Delta > 0.0) || !(spec.delta > 0.0))
    throw std::domain_error("block_cost_matrix: margins must be positive");
  if (spec.M < 2.0 * spec.Delta)
    throw std::domain_error("block_cost_matrix: M must be >= 2*Delta");
  const int n = spec.n1 + spec.n2;
  Matrix c(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j)
        c(i, j) = 0.0;
      else if (i < spec.n1 && j < spec.n1)
        c(i, j) = spec.Delta;
      else if (i >= spec.n1 && j >= spec.n1)
        c(i, j) = spec.delta;
      else
        c(i, j) = spec.M;
    }
  }
  return c;
}

std::pair<double, double> hard_block_closed_form(int n2, double beta, double delta) {
  if (n2 < 2) throw std::domain_error("hard_block_closed_form: n2 must be >= 2");
  if (!(beta > 0.0) || !(delta > 0.0))
    throw std::domain_error("hard_block_closed_form: beta and delta must be positive");
  const double a = 1.0 / (1.0 + (n2 - 1) * std::exp(-beta * delta));
  const double b = (1.0 - a) / (n2 - 1);
  return {a, b};
}

PropositionBounds proposition1_bounds(const BlockAmbiguousSpec& spec, double epsilon, double eta) {
  if (spec.n1 < 2) throw std::domain_error("proposition1_bounds: n1 must be >= 2");
  if (spec.n2 < 2) throw std::domain_error("proposition1_bounds: n2 must be >= 2");
  if (!(epsilon > 0.0 && epsilon < 0.5))
    throw std::domain_error("proposition1_bounds: epsilon must be in (0, 1/2)");
  if (!(eta > 0.0 && eta < 0.5))
    throw std::domain_error("proposition1_bounds: eta must be in (0, 1/2)");
  PropositionBounds b;
  b.epsilon = epsilon;
  b.eta = eta;
  b.beta_lower = std::log((spec.n1 - 1) / epsilon) / spec.Delta;
  b.beta_upper = std::log((spec.n2 - 1) * (1.0 - eta) / eta) / spec.delta;
  return b;
}

std::vector<double> log_uniform_grid(double lo, double hi, int points) {
  if (!(lo > 0.0) || !(hi > lo)) throw std::invalid_argument("log_uniform_grid: bad range");
  if (points < 2) throw std::invalid_argument("log_uniform_grid: need >= 2 points");
  std::vector<double> grid(points);
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < points; ++i)
    grid[i] = std::exp(llo + (lhi - llo) * i / (points - 1));
  return grid;
}

Prop1Report verify_no_global_beta(const BlockAmbiguousSpec& spec, double epsilon, double eta,
                                  const std::vector<double>& beta_grid) {
  Prop1Report report;
  report.bounds = proposition1_bounds(spec, epsilon, eta);
  const Matrix c = block_cost_matrix(spec);
  const int n = c.rows;
  Matrix z(n, n);
  for (double beta : beta_grid) {
    for (int i = 0; i < n * n; ++i) z.data[i] = -beta * c.data[i];
    SoftPermutation p = log_sinkhorn(z, report.sinkhorn_iterations);
    BetaFeasibility f;
    f.beta = beta;
    f.easy_ok = true;
    f.hard_ok = true;
    for (int i = 0; i < spec.n1; ++i)
      if (p.matrix(i, i) < 1.0 - epsilon) f.easy_ok = false;
    for (int i = spec.n1; i < n; ++i)
      if (p.matrix(i, i) > 1.0 - eta) f.hard_ok = false;
    if (f.easy_ok && f.hard_ok) report.any_feasible = true;
    report.grid.push_back(f);
  }
  return report;
}

// ---- generators -------------------------------------------------------------

TaskInstance generate_sorting(int n, double lo, double hi, uint64_t seed) {
  if (n < 2) throw std::invalid_argument("generate_sorting: n must be >= 2");
  if (!(hi > lo)) throw std::invalid_argument("generate_sorting: empty value range");
  TaskInstance inst;
  inst.kind = TaskKind::Sorting;
  inst.n = n;
  inst.seed = seed;
  inst.x = rng::uniform_matrix(n, 1, lo, hi, rng::derive(seed, 0x50f7));
  // truth[i] = ascending rank of x[i]
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return inst.x(a, 0) < inst.x(b, 0); });
  inst.truth.assign(n, 0);
  for (int rank = 0; rank < n; ++rank) inst.truth[order[rank]] = rank;
  return inst;
}

TaskInstance generate_jigsaw(int grid, int tile, int anchors, uint64_t seed) {
  if (grid < 2) throw std::invalid_argument("generate_jigsaw: grid must be >= 2");
  if (tile < 2) throw std::invalid_argument("generate_jigsaw: tile must be >= 2");
  const int n = grid * grid;
  if (anchors < 0 || anchors >= n)
    throw std::invalid_argument("generate_jigsaw: anchor count must be < n");

  rng::Stream rs(rng::derive(seed, 0x716));
  const int side = grid * tile;
  // Tilted plane with incommensurate slopes plus a smooth off-center bump:
  // smooth everywhere, monotone nowhere-degenerate, no repeated tiles.
  const double slope_r = 0.7 + 0.6 * rs.next_double();
  const double slope_c = (1.1 + 0.7 * rs.next_double()) * 1.6180339887;
  const double amp = 0.5 + 0.5 * rs.next_double();
  const double r0 = side * (0.25 + 0.5 * rs.next_double());
  const double c0 = side * (0.25 + 0.5 * rs.next_double());
  const double sigma = side * 0.35;
  Matrix image(side, side);
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) {
      const double plane = (slope_r * r + slope_c * c) / side;
      const double bump = amp * std::exp(-((r - r0) * (r - r0) + (c - c0) * (c - c0)) /
                                         (2.0 * sigma * sigma));
      image(r, c) = plane + bump;
    }

  // Scramble: element i is the tile whose correct position is g(i).
  std::vector<int> g(n);
  std::iota(g.begin(), g.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(g[i], g[rs.below(i + 1)]);

  TaskInstance inst;
  inst.kind = TaskKind::Jigsaw;
  inst.n = n;
  inst.seed = seed;
  inst.grid = grid;
  inst.tile_h = tile;
  inst.tile_w = tile;
  inst.x = Matrix(n, tile * tile);
  for (int i = 0; i < n; ++i) {
    const int pr = g[i] / grid, pc = g[i] % grid;
    for (int r = 0; r < tile; ++r)
      for (int c = 0; c < tile; ++c)
        inst.x(i, r * tile + c) = image(pr * tile + r, pc * tile + c);
  }
  inst.truth = g;

  // Anchor elements sampled uniformly at random, fixed to their truth position.
  std::vector<int> elems(n);
  std::iota(elems.begin(), elems.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(elems[i], elems[rs.below(i + 1)]);
  for (int a = 0; a < anchors; ++a) inst.anchors.emplace_back(elems[a], g[elems[a]]);
  return inst;
}

TaskInstance generate_tsp(int n, uint64_t seed) {
  if (n < 3) throw std::invalid_argument("generate_tsp: n must be >= 3");
  TaskInstance inst;
  inst.kind = TaskKind::Tsp;
  inst.n = n;
  inst.seed = seed;
  inst.x = rng::uniform_matrix(n, 2, 0.0, 1.0, rng::derive(seed, 0x75b));
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += inst.x(i, 0);
    my += inst.x(i, 1);
  }
  mx /= n;
  my /= n;
  for (int i = 0; i < n; ++i) {
    inst.x(i, 0) -= mx;
    inst.x(i, 1) -= my;
  }
  if (n <= 10) {
    std::vector<int> best;
    inst.reference_tour_length = tsp_brute_force(inst.x, &best);
    inst.has_reference = true;
    inst.truth.assign(n, 0);
    for (int step = 0; step < n; ++step) inst.truth[best[step]] = step;
  } else {
    inst.truth.resize(n);
    std::iota(inst.truth.begin(), inst.truth.end(), 0);
  }
  return inst;
}

TaskInstance generate_block(const BlockAmbiguousSpec& spec, uint64_t seed) {
  TaskInstance inst;
  inst.kind = TaskKind::Block;
  inst.n = spec.n1 + spec.n2;
  inst.seed = seed;
  Matrix c = block_cost_matrix(spec);
  inst.x = Matrix(inst.n, inst.n);
  for (int i = 0; i < inst.n * inst.n; ++i) inst.x.data[i] = -c.data[i];
  inst.truth.resize(inst.n);
  std::iota(inst.truth.begin(), inst.truth.end(), 0);
  return inst;
}

Matrix anchor_mask(int n, const std::vector<std::pair<int, int>>& anchors) {
  Matrix mask(n, n, 0.0);
  for (auto [e, p] : anchors) {
    if (e < 0 || e >= n || p < 0 || p >= n)
      throw std::invalid_argument("anchor_mask: anchor out of range");
    for (int j = 0; j < n; ++j) mask(e, j) = -30.0;
    for (int i = 0; i < n; ++i) mask(i, p) = -30.0;
  }
  for (auto [e, p] : anchors) mask(e, p) = 30.0;
  return mask;
}

double tour_length_by_order(const Matrix& coords, const std::vector<int>& order) {
  const int n = static_cast<int>(order.size());
  double len = 0.0;
  for (int i = 0; i < n; ++i) {
    const int a = order[i], b = order[(i + 1) % n];
    const double dx = coords(a, 0) - coords(b, 0);
    const double dy = coords(a, 1) - coords(b, 1);
    len += std::sqrt(dx * dx + dy * dy);
  }
  return len;
}

double tsp_brute_force(const Matrix& coords, std::vector<int>* best_order) {
  const int n = coords.rows;
  if (n < 3 || n > 10) throw std::invalid_argument("tsp_brute_force: supported for 3 <= n <= 10");
  std::vector<int> rest(n - 1);
  std::iota(rest.begin(), rest.end(), 1);
  std::vector<int> order(n);
  order[0] = 0;
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_seq;
  do {
    if (rest.front() > rest.back()) continue;  // each cycle counted once per direction
    std::copy(rest.begin(), rest.end(), order.begin() + 1);
    const double len = tour_length_by_order(coords, order);
    if (len < best) {
      best = len;
      best_seq = order;
    }
  } while (std::next_permutation(rest.begin(), rest.end()));
  if (best_order) *best_order = best_seq;
  return best;
}

// ---- serialization ----------------------------------------------------------

json instance_to_json(const TaskInstance& inst) {
  json j;
  j["kind"] = to_string(inst.kind);
  j["n"] = inst.n;
  j["rows"] = inst.x.rows;
  j["cols"] = inst.x.cols;
  j["data"] = inst.x.data;
  j["anchors"] = json::array();
  for (auto [e, p] : inst.anchors) j["anchors"].push_back({e, p});
  j["truth"] = inst.truth;
  j["seed"] = inst.seed;
  if (inst.kind == TaskKind::Jigsaw) {
    j["grid"] = inst.grid;
    j["tile_h"] = inst.tile_h;
    j["tile_w"] = inst.tile_w;
  }
  if (inst.kind == TaskKind::Tsp) {
    j["has_reference"] = inst.has_reference;
    if (inst.has_reference) j["reference_tour_length"] = inst.reference_tour_length;
  }
  return j;
}

TaskInstance instance_from_json(const json& j) {
  TaskInstance inst;
  inst.kind = task_kind_from_string(j.at("kind").get<std::string>());
  inst.n = j.at("n").get<int>();
  inst.x.rows = j.at("rows").get<int>();
  inst.x.cols = j.at("cols").get<int>();
  inst.x.data = j.at("data").get<std::vector<double>>();
  if (static_cast<int>(inst.x.data.size()) != inst.x.rows * inst.x.cols)
    throw std::invalid_argument("instance_from_json: data size mismatch");
  for (const auto& a : j.at("anchors")) inst.anchors.emplace_back(a.at(0), a.at(1));
  inst.truth = j.at("truth").get<std::vector<int>>();
  inst.seed = j.at("seed").get<uint64_t>();
  inst.grid = j.value("grid", 0);
  inst.tile_h = j.value("tile_h", 0);
  inst.tile_w = j.value("tile_w", 0);
  inst.has_reference = j.value("has_reference", false);
  inst.reference_tour_length = j.value("reference_tour_length", 0.0);
  validate(inst);
  return inst;
}

}  // namespace permlearn
