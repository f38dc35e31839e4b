#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace permlearn {

// Dense row-major matrix of doubles. Column vectors are n x 1, scalars 1 x 1.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {
    if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative dimension");
  }

  static Matrix identity(int n) {
    Matrix m(n, n, 0.0);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static Matrix constant(int r, int c, double v) { return Matrix(r, c, v); }

  double& operator()(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

  int size() const { return rows * cols; }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool square() const { return rows == cols; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* where) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(where) + ": shape mismatch");
}

inline void require_square(const Matrix& a, const char* where) {
  if (!a.square()) throw std::invalid_argument(std::string(where) + ": matrix must be square");
}

}  // namespace permlearn
