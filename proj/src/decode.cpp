#include "permlearn/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "permlearn/rng.hpp"

namespace permlearn {

Permutation Permutation::identity(int n) {
  Permutation p;
  p.map.resize(n);
  std::iota(p.map.begin(), p.map.end(), 0);
  return p;
}

Permutation Permutation::inverse() const {
  Permutation inv;
  inv.map.assign(map.size(), 0);
  for (int i = 0; i < size(); ++i) inv.map[map[i]] = i;
  return inv;
}

bool Permutation::valid() const {
  std::vector<bool> seen(map.size(), false);
  for (int v : map) {
    if (v < 0 || v >= size() || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

Permutation hungarian(const Matrix& profit) {
  require_square(profit, "hungarian");
  if (!profit.all_finite()) throw std::invalid_argument("hungarian: non-finite profit");
  const int n = profit.rows;
  // Shortest-augmenting-path assignment on cost = -profit, 1-indexed
  // potentials; rows are inserted in order 0..n-1.
  const double INF = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0);  // match[j] = row assigned to column j (1-indexed)
  std::vector<int> way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, INF);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = match[j0];
      double best = INF;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = -profit(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < best) {
          best = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += best;
          v[j] -= best;
        } else {
          minv[j] -= best;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }
  Permutation p;
  p.map.assign(n, -1);
  for (int j = 1; j <= n; ++j) p.map[match[j] - 1] = j - 1;
  return p;
}

namespace {
// Number of inversions by merge counting.
long long count_inversions(std::vector<int>& a) {
  const int n = static_cast<int>(a.size());
  std::vector<int> buf(n);
  long long inv = 0;
  for (int width = 1; width < n; width *= 2) {
    for (int lo = 0; lo < n; lo += 2 * width) {
      const int mid = std::min(lo + width, n);
      const int hi = std::min(lo + 2 * width, n);
      int i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (a[i] <= a[j]) {
          buf[k++] = a[i++];
        } else {
          inv += mid - i;
          buf[k++] = a[j++];
        }
      }
      while (i < mid) buf[k++] = a[i++];
      while (j < hi) buf[k++] = a[j++];
      std::copy(buf.begin() + lo, buf.begin() + hi, a.begin() + lo);
    }
  }
  return inv;
}

double tau_from_sequence(std::vector<int> seq) {
  const long long n = static_cast<long long>(seq.size());
  const long long inv = count_inversions(seq);
  return 1.0 - 4.0 * static_cast<double>(inv) / static_cast<double>(n * (n - 1));
}
}  // namespace

double kendall_tau(const Permutation& pred, const Permutation& truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("kendall_tau: size mismatch");
  const int n = pred.size();
  if (n < 2) throw std::invalid_argument("kendall_tau: need n >= 2");
  // pred positions of the elements taken in truth order; inversions of this
  // sequence are exactly the discordant pairs.
  Permutation tinv = truth.inverse();
  std::vector<int> seq(n);
  for (int r = 0; r < n; ++r) seq[r] = pred.map[tinv.map[r]];
  return tau_from_sequence(std::move(seq));
}

std::vector<int> visiting_order(const Permutation& assignment) {
  std::vector<int> order(assignment.size());
  for (int city = 0; city < assignment.size(); ++city) order[assignment.map[city]] = city;
  return order;
}

namespace {
// Rotates a visiting order so city 0 is first, then converts back to a
// city -> position map.
Permutation canonical_tour(const std::vector<int>& order) {
  const int n = static_cast<int>(order.size());
  int start = 0;
  for (int i = 0; i < n; ++i)
    if (order[i] == 0) {
      start = i;
      break;
    }
  Permutation p;
  p.map.assign(n, 0);
  for (int step = 0; step < n; ++step) p.map[order[(start + step) % n]] = step;
  return p;
}
}  // namespace

double tour_kendall_tau(const Permutation& pred, const Permutation& truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("tour_kendall_tau: size mismatch");
  std::vector<int> pred_order = visiting_order(pred);
  std::vector<int> truth_order = visiting_order(truth);
  Permutation truth_c = canonical_tour(truth_order);
  Permutation fwd = canonical_tour(pred_order);
  std::reverse(pred_order.begin(), pred_order.end());
  Permutation rev = canonical_tour(pred_order);
  return std::max(kendall_tau(fwd, truth_c), kendall_tau(rev, truth_c));
}

MaskOnlyEstimate mask_only_baseline(int n, int anchors, int trials, uint64_t seed) {
  if (anchors < 0 || anchors > n) throw std::invalid_argument("mask_only_baseline: anchors");
  if (trials < 1) throw std::invalid_argument("mask_only_baseline: trials must be >= 1");
  // tau is invariant to relabeling, so truth can be the identity: anchored
  // elements stay put, the rest are filled uniformly at random.
  rng::Stream rs(rng::derive(seed, 0xba5e));
  Permutation truth = Permutation::identity(n);
  std::vector<int> elems(n);
  double sum = 0.0, sum_sq = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    std::iota(elems.begin(), elems.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(elems[i], elems[rs.below(i + 1)]);
    // elems[0..anchors) anchored; remaining elements share the remaining
    // positions uniformly.
    Permutation pred;
    pred.map.assign(n, -1);
    std::vector<int> free_elems(elems.begin() + anchors, elems.end());
    std::vector<int> free_pos = free_elems;
    for (int i = 0; i < anchors; ++i) pred.map[elems[i]] = elems[i];
    for (int i = static_cast<int>(free_pos.size()) - 1; i > 0; --i)
      std::swap(free_pos[i], free_pos[rs.below(i + 1)]);
    for (size_t i = 0; i < free_elems.size(); ++i) pred.map[free_elems[i]] = free_pos[i];
    const double tau = n >= 2 ? kendall_tau(pred, truth) : 1.0;
    sum += tau;
    sum_sq += tau * tau;
  }
  MaskOnlyEstimate est;
  est.mean = sum / trials;
  if (trials > 1) {
    const double var = std::max(0.0, (sum_sq - sum * sum / trials) / (trials - 1));
    est.std_error = std::sqrt(var / trials);
  }
  return est;
}

MetricsRecord metrics(const Permutation& pred, const TaskInstance& inst, int mask_only_trials) {
  if (pred.size() != inst.n) throw std::invalid_argument("metrics: permutation size mismatch");
  Permutation truth;
  truth.map = inst.truth;
  MetricsRecord rec;
  if (inst.kind == TaskKind::Tsp) {
    rec.tau = tour_kendall_tau(pred, truth);
    rec.tour_length = tour_length_by_order(inst.x, visiting_order(pred));
    if (inst.has_reference) {
      if (inst.reference_tour_length <= 0.0)
        throw std::invalid_argument("metrics: missing reference for gap");
      rec.gap = (*rec.tour_length - inst.reference_tour_length) / inst.reference_tour_length;
    }
  } else {
    rec.tau = kendall_tau(pred, truth);
  }
  if (!inst.anchors.empty()) {
    const auto mask = mask_only_baseline(inst.n, static_cast<int>(inst.anchors.size()),
                                         mask_only_trials, inst.seed);
    rec.delta_tau = rec.tau - mask.mean;
  }
  return rec;
}

}  // namespace permlearn
