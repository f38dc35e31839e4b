#pragma once

#include <utility>
#include <vector>

#include "permlearn/matrix.hpp"
#include "permlearn/sinkhorn.hpp"

namespace permlearn {

enum class Combine { Avg, Prod };

struct ControllerConfig {
  double H0 = 0.7;         // normalized-entropy threshold, in [0, 1)
  double b_max = 0.1;      // maximum relative temperature increase
  Combine combine = Combine::Avg;
  int warmup_steps = 1;    // "adapt start": constant field before this step
  double entropy_floor = 1e-8;
};

// Entrywise inverse-temperature field. Entries are clamped to
// [beta0/(1+b_max), beta0] for avg combination and to
// [beta0/(1+b_max)^2, beta0] for prod, which can legitimately exceed a
// single boost factor.
struct BetaField {
  double beta0 = 1.0;
  Matrix entries;
  std::vector<double> row_beta;
  std::vector<double> col_beta;
  double min_entry() const;
  double max_entry() const;
};

// Normalized row and column entropies of a soft assignment, natural log,
// scaled by 1/log n; entries clamped to at least `floor` before the log.
std::pair<std::vector<double>, std::vector<double>> normalized_entropies(const Matrix& q,
                                                                         double floor = 1e-8);

// b(H) = b_max * clip((H - H0)/(1 - H0), 0, 1)
double boost(double h, const ControllerConfig& cfg);

BetaField constant_field(int n, double beta0);

// Field from precomputed entropies; the core of the controller, factored out
// so tests can quantify over arbitrary soft assignments.
BetaField field_from_entropies(const std::vector<double>& row_h, const std::vector<double>& col_h,
                               double beta0, const ControllerConfig& cfg);

// Full per-step controller: deterministic assignment at beta0 (constant
// w.r.t. the scores), entropies, boosted row/col temperatures, combination,
// clamp. Returns the constant beta0 field while step < warmup_steps (the
// assignment is still computed so the per-step cost profile does not change).
BetaField build_beta_field(const Matrix& s, double beta0, const ControllerConfig& cfg, int step,
                           const SinkhornConfig& sinkhorn_cfg);

// Degree-violation temperature adaptation for routing. Input is the soft
// successor heatmap (city b follows city a with mass succ(a,b)); the induced
// adjacency E = succ + succ^T with zeroed diagonal gives expected degrees
// d_i, violations u_i = |d_i - 2|, per-instance min-max normalization and
// scalings s_i = 1 + b_max * norm(u_i) applied to row i and column i.
// If all violations are equal the normalized signal is all-zeros and the
// field is the constant beta0.
BetaField degree_violation_field(const Matrix& successor_heatmap, double beta0,
                                 const ControllerConfig& cfg);

}  // namespace permlearn
