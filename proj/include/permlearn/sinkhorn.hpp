#pragma once

#include <cstdint>

#include "permlearn/matrix.hpp"
#include "permlearn/tape.hpp"

namespace permlearn {

// Doubly stochastic matrix produced by log-space Sinkhorn normalization.
// The final half-step normalizes columns, so column sums are exact (up to
// fp rounding) and the remaining row-sum deviation is reported as residual.
struct SoftPermutation {
  Matrix matrix;
  double residual = 0.0;
};

struct SinkhornConfig {
  int iterations = 10;  // 10 for sorting/jigsaw, 50 for routing
  int noise_samples = 1;
  uint64_t seed = 0;
};

double row_residual(const Matrix& p);

// exp of alternating row/column log-softmax passes over Z. Value-only path;
// used for oracles, entropy estimation and decoding.
SoftPermutation log_sinkhorn(const Matrix& z, int iterations);

// Differentiable path; gradients flow through every iteration.
Var log_sinkhorn(Tape& t, Var z, int iterations);

// P = log_sinkhorn(beta ⊙ (S + g)). beta scales logits and noise jointly.
// When noise is null, Gumbel noise is drawn from a stream derived from
// cfg.seed and sample_index (the caller-supplied call counter); passing an
// explicit noise matrix makes the call fully deterministic for tests.
// The beta field is a constant from the tape's point of view.
Var gumbel_sinkhorn(Tape& t, Var s, const Matrix& beta, const SinkhornConfig& cfg,
                    const Matrix* noise = nullptr, uint64_t sample_index = 0);
SoftPermutation gumbel_sinkhorn(const Matrix& s, const Matrix& beta, const SinkhornConfig& cfg,
                                const Matrix* noise = nullptr, uint64_t sample_index = 0);

// Q = Sinkhorn(beta0 * S) with the scores treated as constants: the result
// is used for entropy estimation only and carries no gradient back to S.
SoftPermutation deterministic_assignment(const Matrix& s, double beta0, int iterations);

}  // namespace permlearn
