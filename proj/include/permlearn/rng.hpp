#pragma once

#include <cmath>
#include <cstdint>

#include "permlearn/matrix.hpp"

namespace permlearn::rng {

// SplitMix64. Small, fast, and identical across platforms, which is what the
// reproducibility contract needs (std::mt19937 distributions are not
// implementation-defined-free).
struct Stream {
  uint64_t state;

  explicit Stream(uint64_t seed) : state(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Box-Muller.
  double gaussian() {
    double u1 = next_double();
    double u2 = next_double();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Gumbel(0,1) via g = -log(-log(u)), u clamped away from the endpoints so
  // the sample is always finite.
  double gumbel() {
    double u = next_double();
    if (u < 1e-12) u = 1e-12;
    if (u > 1.0 - 1e-12) u = 1.0 - 1e-12;
    return -std::log(-std::log(u));
  }

  // Uniform integer in [0, n).
  int below(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }
};

// Derives an independent stream seed from a base seed and counters; used to
// give every (step, sample) pair its own noise stream.
inline uint64_t derive(uint64_t seed, uint64_t a, uint64_t b = 0) {
  Stream s(seed ^ (0x632be59bd9b4e019ULL + a * 0x9e3779b97f4a7c15ULL + b * 0xd1b54a32d192ed03ULL));
  s.next_u64();
  return s.next_u64();
}

inline Matrix gumbel_matrix(int rows, int cols, uint64_t seed) {
  Matrix g(rows, cols);
  Stream s(seed);
  for (double& v : g.data) v = s.gumbel();
  return g;
}

inline Matrix gaussian_matrix(int rows, int cols, double sigma, uint64_t seed) {
  Matrix g(rows, cols);
  Stream s(seed);
  for (double& v : g.data) v = sigma * s.gaussian();
  return g;
}

inline Matrix uniform_matrix(int rows, int cols, double lo, double hi, uint64_t seed) {
  Matrix g(rows, cols);
  Stream s(seed);
  for (double& v : g.data) v = s.uniform(lo, hi);
  return g;
}

}  // namespace permlearn::rng
