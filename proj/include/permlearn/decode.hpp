#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "permlearn/matrix.hpp"
#include "permlearn/tasks.hpp"

namespace permlearn {

// Bijection on {0..n-1}; map[i] is where element i goes.
struct Permutation {
  std::vector<int> map;
  int size() const { return static_cast<int>(map.size()); }
  static Permutation identity(int n);
  Permutation inverse() const;
  bool valid() const;
};

// Maximum-profit assignment (soft permutations are passed directly as
// profits; negate costs at the call site). Exact O(n^3); equal-profit ties
// resolve deterministically, lowest row index first.
Permutation hungarian(const Matrix& profit);

// 1 - 4*discordant/(n(n-1)) between two position maps, counted by mergesort.
double kendall_tau(const Permutation& pred, const Permutation& truth);

// Kendall tau over Hamiltonian-cycle visiting orders: both tours are rotated
// so city 0 sits at position 0, and the better of the forward and reversed
// pred is reported. Invariant to cyclic rotation and direction of pred.
double tour_kendall_tau(const Permutation& pred, const Permutation& truth);

struct MaskOnlyEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

// Monte Carlo expected Kendall tau of anchor-correct, otherwise-uniform
// permutations; anchor sets are resampled uniformly each trial.
MaskOnlyEstimate mask_only_baseline(int n, int anchors, int trials, uint64_t seed);

struct MetricsRecord {
  double tau = 0.0;
  std::optional<double> tour_length;
  std::optional<double> gap;        // (length - reference) / reference
  std::optional<double> delta_tau;  // tau - mask-only estimate, when anchored
};

// Converts a city->position assignment into the visiting order (city indices
// by position).
std::vector<int> visiting_order(const Permutation& assignment);

MetricsRecord metrics(const Permutation& pred, const TaskInstance& inst,
                      int mask_only_trials = 2000);

}  // namespace permlearn
