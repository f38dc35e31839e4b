#include "permlearn/controller.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace permlearn {

double BetaField::min_entry() const {
  return *std::min_element(entries.data.begin(), entries.data.end());
}
double BetaField::max_entry() const {
  return *std::max_element(entries.data.begin(), entries.data.end());
}

std::pair<std::vector<double>, std::vector<double>> normalized_entropies(const Matrix& q,
                                                                         double floor) {
  require_square(q, "normalized_entropies");
  const int n = q.rows;
  if (n < 2) throw std::domain_error("normalized_entropies: n must be >= 2");
  const double inv_log_n = 1.0 / std::log(static_cast<double>(n));
  std::vector<double> row_h(n, 0.0), col_h(n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double v = std::max(q(i, j), floor);
      const double t = v * std::log(v);
      row_h[i] -= t;
      col_h[j] -= t;
    }
  }
  for (int i = 0; i < n; ++i) {
    row_h[i] *= inv_log_n;
    col_h[i] *= inv_log_n;
  }
  return {std::move(row_h), std::move(col_h)};
}

double boost(double h, const ControllerConfig& cfg) {
  const double t = (h - cfg.H0) / (1.0 - cfg.H0);
  return cfg.b_max * std::clamp(t, 0.0, 1.0);
}

BetaField constant_field(int n, double beta0) {
  BetaField f;
  f.beta0 = beta0;
  f.entries = Matrix(n, n, beta0);
  f.row_beta.assign(n, beta0);
  f.col_beta.assign(n, beta0);
  return f;
}

namespace {
// Combines per-row and per-column boost denominators (1 + b) into the
// entrywise field and applies the clamp for the chosen combination.
BetaField combine_denominators(const std::vector<double>& row_den,
                               const std::vector<double>& col_den, double beta0,
                               const ControllerConfig& cfg) {
  const int n = static_cast<int>(row_den.size());
  BetaField f;
  f.beta0 = beta0;
  f.entries = Matrix(n, n);
  f.row_beta.resize(n);
  f.col_beta.resize(n);
  for (int i = 0; i < n; ++i) {
    f.row_beta[i] = beta0 / row_den[i];
    f.col_beta[i] = beta0 / col_den[i];
  }
  const double hi = beta0;
  const double lo = cfg.combine == Combine::Avg
                        ? beta0 / (1.0 + cfg.b_max)
                        : beta0 / ((1.0 + cfg.b_max) * (1.0 + cfg.b_max));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double b = cfg.combine == Combine::Avg
                     ? 0.5 * (f.row_beta[i] + f.col_beta[j])
                     : beta0 / (row_den[i] * col_den[j]);
      f.entries(i, j) = std::clamp(b, lo, hi);
    }
  }
  return f;
}
}  // namespace

BetaField field_from_entropies(const std::vector<double>& row_h, const std::vector<double>& col_h,
                               double beta0, const ControllerConfig& cfg) {
  if (row_h.size() != col_h.size())
    throw std::invalid_argument("field_from_entropies: size mismatch");
  if (!(cfg.H0 >= 0.0 && cfg.H0 < 1.0))
    throw std::domain_error("field_from_entropies: H0 must be in [0, 1)");
  if (!(cfg.b_max >= 0.0)) throw std::domain_error("field_from_entropies: b_max must be >= 0");
  const int n = static_cast<int>(row_h.size());
  std::vector<double> row_den(n), col_den(n);
  for (int i = 0; i < n; ++i) {
    row_den[i] = 1.0 + boost(row_h[i], cfg);
    col_den[i] = 1.0 + boost(col_h[i], cfg);
  }
  return combine_denominators(row_den, col_den, beta0, cfg);
}

BetaField build_beta_field(const Matrix& s, double beta0, const ControllerConfig& cfg, int step,
                           const SinkhornConfig& sinkhorn_cfg) {
  SoftPermutation q = deterministic_assignment(s, beta0, sinkhorn_cfg.iterations);
  if (step < cfg.warmup_steps) return constant_field(s.rows, beta0);
  auto [row_h, col_h] = normalized_entropies(q.matrix, cfg.entropy_floor);
  return field_from_entropies(row_h, col_h, beta0, cfg);
}

BetaField degree_violation_field(const Matrix& successor_heatmap, double beta0,
                                 const ControllerConfig& cfg) {
  require_square(successor_heatmap, "degree_violation_field");
  const int n = successor_heatmap.rows;
  // E = succ + succ^T, diagonal zeroed; d_i = sum_j E_ij.
  std::vector<double> degree(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (j != i) degree[i] += successor_heatmap(i, j) + successor_heatmap(j, i);
  std::vector<double> violation(n);
  for (int i = 0; i < n; ++i) violation[i] = std::fabs(degree[i] - 2.0);
  const double lo = *std::min_element(violation.begin(), violation.end());
  const double hi = *std::max_element(violation.begin(), violation.end());
  std::vector<double> den(n, 1.0);
  if (hi > lo) {
    const double span = hi - lo + 1e-12;
    for (int i = 0; i < n; ++i) den[i] = 1.0 + cfg.b_max * ((violation[i] - lo) / span);
  }
  // min == max leaves den at 1: the conservative no-op field.
  return combine_denominators(den, den, beta0, cfg);
}

}  // namespace permlearn
