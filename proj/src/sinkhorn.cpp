#include "permlearn/sinkhorn.hpp"

#include <cmath>
#include <stdexcept>

#include "permlearn/kernels.hpp"
#include "permlearn/rng.hpp"

namespace permlearn {

namespace k = kernels;

double row_residual(const Matrix& p) {
  double worst = 0.0;
  for (int i = 0; i < p.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < p.cols; ++j) s += p(i, j);
    worst = std::max(worst, std::fabs(s - 1.0));
  }
  return worst;
}

SoftPermutation log_sinkhorn(const Matrix& z, int iterations) {
  require_square(z, "log_sinkhorn");
  if (iterations < 1) throw std::invalid_argument("log_sinkhorn: iterations must be >= 1");
  const int n = z.rows;
  Matrix cur = z;
  Matrix tmp(n, n);
  for (int it = 0; it < iterations; ++it) {
    k::row_log_softmax(cur.data.data(), tmp.data.data(), n, n);
    k::col_log_softmax(tmp.data.data(), cur.data.data(), n, n);
  }
  SoftPermutation out;
  out.matrix = Matrix(n, n);
  k::unary_op(k::Unary::Exp, cur.data.data(), out.matrix.data.data(), n * n);
  out.residual = row_residual(out.matrix);
  return out;
}

Var log_sinkhorn(Tape& t, Var z, int iterations) {
  require_square(t.value(z), "log_sinkhorn");
  if (iterations < 1) throw std::invalid_argument("log_sinkhorn: iterations must be >= 1");
  Var cur = z;
  for (int it = 0; it < iterations; ++it) {
    cur = t.log_softmax(cur, Axis::Row);
    cur = t.log_softmax(cur, Axis::Col);
  }
  return t.exp(cur);
}

namespace {
void check_gs_inputs(const Matrix& s, const Matrix& beta, const Matrix* noise) {
  require_square(s, "gumbel_sinkhorn");
  require_same_shape(s, beta, "gumbel_sinkhorn(beta)");
  for (double b : beta.data)
    if (!(b > 0.0)) throw std::domain_error("gumbel_sinkhorn: beta entries must be positive");
  if (noise) require_same_shape(s, *noise, "gumbel_sinkhorn(noise)");
}

Matrix draw_noise(const Matrix& s, const SinkhornConfig& cfg, uint64_t sample_index) {
  return rng::gumbel_matrix(s.rows, s.cols, rng::derive(cfg.seed, sample_index));
}
}  // namespace

Var gumbel_sinkhorn(Tape& t, Var s, const Matrix& beta, const SinkhornConfig& cfg,
                    const Matrix* noise, uint64_t sample_index) {
  const Matrix& sv = t.value(s);
  check_gs_inputs(sv, beta, noise);
  Matrix g = noise ? *noise : draw_noise(sv, cfg, sample_index);
  Var perturbed = t.add(s, t.constant(std::move(g)));
  Var scaled = t.mul(perturbed, t.constant(beta));
  return log_sinkhorn(t, scaled, cfg.iterations);
}

SoftPermutation gumbel_sinkhorn(const Matrix& s, const Matrix& beta, const SinkhornConfig& cfg,
                                const Matrix* noise, uint64_t sample_index) {
  check_gs_inputs(s, beta, noise);
  Matrix g = noise ? *noise : draw_noise(s, cfg, sample_index);
  Matrix z(s.rows, s.cols);
  k::binary_op(k::Binary::Add, s.data.data(), g.data.data(), z.data.data(), z.size());
  k::binary_op(k::Binary::Mul, z.data.data(), beta.data.data(), z.data.data(), z.size());
  return log_sinkhorn(z, cfg.iterations);
}

SoftPermutation deterministic_assignment(const Matrix& s, double beta0, int iterations) {
  require_square(s, "deterministic_assignment");
  if (!(beta0 > 0.0)) throw std::domain_error("deterministic_assignment: beta0 must be positive");
  Matrix z(s.rows, s.cols);
  k::scale(s.data.data(), beta0, z.data.data(), z.size());
  return log_sinkhorn(z, iterations);
}

}  // namespace permlearn
