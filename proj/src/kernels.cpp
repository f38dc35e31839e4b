#include "permlearn/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace permlearn::kernels {

namespace {
std::atomic<bool> g_parallel{true};
std::atomic<int> g_threshold{8192};
}  // namespace

void set_parallel_enabled(bool on) { g_parallel.store(on, std::memory_order_relaxed); }
bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }
void set_parallel_threshold(int elems) { g_threshold.store(elems, std::memory_order_relaxed); }
int parallel_threshold() { return g_threshold.load(std::memory_order_relaxed); }

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace serial {

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += a[i * k + l] * b[l * n + j];
      c[i * n + j] = acc;
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += a[i * k + l] * b[j * k + l];
      c[i * n + j] = acc;
    }
  }
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += a[l * m + i] * b[l * n + j];
      c[i * n + j] = acc;
    }
  }
}

void transpose(const double* a, double* out, int rows, int cols) {
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out[j * rows + i] = a[i * cols + j];
}

namespace detail {
inline void one_row_log_softmax(const double* z, double* y, int cols) {
  double mx = z[0];
  for (int j = 1; j < cols; ++j) mx = std::max(mx, z[j]);
  double acc = 0.0;
  for (int j = 0; j < cols; ++j) acc += std::exp(z[j] - mx);
  const double lse = mx + std::log(acc);
  for (int j = 0; j < cols; ++j) y[j] = z[j] - lse;
}

inline void one_col_log_softmax(const double* z, double* y, int rows, int cols, int j) {
  double mx = z[j];
  for (int i = 1; i < rows; ++i) mx = std::max(mx, z[i * cols + j]);
  double acc = 0.0;
  for (int i = 0; i < rows; ++i) acc += std::exp(z[i * cols + j] - mx);
  const double lse = mx + std::log(acc);
  for (int i = 0; i < rows; ++i) y[i * cols + j] = z[i * cols + j] - lse;
}

inline void one_row_lsm_backward(const double* y, const double* g, double* dz, int cols) {
  double gsum = 0.0;
  for (int j = 0; j < cols; ++j) gsum += g[j];
  for (int j = 0; j < cols; ++j) dz[j] = g[j] - std::exp(y[j]) * gsum;
}

inline void one_col_lsm_backward(const double* y, const double* g, double* dz, int rows,
                                 int cols, int j) {
  double gsum = 0.0;
  for (int i = 0; i < rows; ++i) gsum += g[i * cols + j];
  for (int i = 0; i < rows; ++i)
    dz[i * cols + j] = g[i * cols + j] - std::exp(y[i * cols + j]) * gsum;
}
}  // namespace detail

void row_log_softmax(const double* z, double* y, int rows, int cols) {
  for (int i = 0; i < rows; ++i) detail::one_row_log_softmax(z + i * cols, y + i * cols, cols);
}

void col_log_softmax(const double* z, double* y, int rows, int cols) {
  for (int j = 0; j < cols; ++j) detail::one_col_log_softmax(z, y, rows, cols, j);
}

void row_log_softmax_backward(const double* y, const double* g, double* dz, int rows, int cols) {
  for (int i = 0; i < rows; ++i)
    detail::one_row_lsm_backward(y + i * cols, g + i * cols, dz + i * cols, cols);
}

void col_log_softmax_backward(const double* y, const double* g, double* dz, int rows, int cols) {
  for (int j = 0; j < cols; ++j) detail::one_col_lsm_backward(y, g, dz, rows, cols, j);
}

void row_sums(const double* a, double* out, int rows, int cols) {
  for (int i = 0; i < rows; ++i) {
    double acc = 0.0;
    for (int j = 0; j < cols; ++j) acc += a[i * cols + j];
    out[i] = acc;
  }
}

void col_sums(const double* a, double* out, int rows, int cols) {
  for (int j = 0; j < cols; ++j) {
    double acc = 0.0;
    for (int i = 0; i < rows; ++i) acc += a[i * cols + j];
    out[j] = acc;
  }
}

double sum_all(const double* a, int rows, int cols) {
  // Row partials combined in row order; the parallel version uses the same
  // association so the result is bitwise identical.
  double total = 0.0;
  for (int i = 0; i < rows; ++i) {
    double acc = 0.0;
    for (int j = 0; j < cols; ++j) acc += a[i * cols + j];
    total += acc;
  }
  return total;
}

void unary_op(Unary op, const double* a, double* out, int n) {
  switch (op) {
    case Unary::Exp:
      for (int i = 0; i < n; ++i) out[i] = std::exp(a[i]);
      break;
    case Unary::Log:
      for (int i = 0; i < n; ++i) out[i] = std::log(a[i]);
      break;
    case Unary::Relu:
      for (int i = 0; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
      break;
    case Unary::Square:
      for (int i = 0; i < n; ++i) out[i] = a[i] * a[i];
      break;
    case Unary::Neg:
      for (int i = 0; i < n; ++i) out[i] = -a[i];
      break;
  }
}

void binary_op(Binary op, const double* a, const double* b, double* out, int n) {
  switch (op) {
    case Binary::Add:
      for (int i = 0; i < n; ++i) out[i] = a[i] + b[i];
      break;
    case Binary::Sub:
      for (int i = 0; i < n; ++i) out[i] = a[i] - b[i];
      break;
    case Binary::Mul:
      for (int i = 0; i < n; ++i) out[i] = a[i] * b[i];
      break;
    case Binary::Div:
      for (int i = 0; i < n; ++i) out[i] = a[i] / b[i];
      break;
  }
}

void scale(const double* a, double s, double* out, int n) {
  for (int i = 0; i < n; ++i) out[i] = s * a[i];
}

void axpy(double alpha, const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace serial

namespace par {

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += a[i * k + l] * b[l * n + j];
      c[i * n + j] = acc;
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += a[i * k + l] * b[j * k + l];
      c[i * n + j] = acc;
    }
  }
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += a[l * m + i] * b[l * n + j];
      c[i * n + j] = acc;
    }
  }
}

void transpose(const double* a, double* out, int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) out[j * rows + i] = a[i * cols + j];
}

void row_log_softmax(const double* z, double* y, int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i)
    serial::detail::one_row_log_softmax(z + i * cols, y + i * cols, cols);
}

void col_log_softmax(const double* z, double* y, int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int j = 0; j < cols; ++j) serial::detail::one_col_log_softmax(z, y, rows, cols, j);
}

void row_log_softmax_backward(const double* y, const double* g, double* dz, int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i)
    serial::detail::one_row_lsm_backward(y + i * cols, g + i * cols, dz + i * cols, cols);
}

void col_log_softmax_backward(const double* y, const double* g, double* dz, int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int j = 0; j < cols; ++j) serial::detail::one_col_lsm_backward(y, g, dz, rows, cols, j);
}

void row_sums(const double* a, double* out, int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i) {
    double acc = 0.0;
    for (int j = 0; j < cols; ++j) acc += a[i * cols + j];
    out[i] = acc;
  }
}

void col_sums(const double* a, double* out, int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int j = 0; j < cols; ++j) {
    double acc = 0.0;
    for (int i = 0; i < rows; ++i) acc += a[i * cols + j];
    out[j] = acc;
  }
}

double sum_all(const double* a, int rows, int cols) {
  std::vector<double> partial(static_cast<size_t>(rows));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i) {
    double acc = 0.0;
    for (int j = 0; j < cols; ++j) acc += a[i * cols + j];
    partial[i] = acc;
  }
  double total = 0.0;
  for (int i = 0; i < rows; ++i) total += partial[i];
  return total;
}

void unary_op(Unary op, const double* a, double* out, int n) {
  switch (op) {
    case Unary::Exp:
#pragma omp parallel for schedule(static)
      for (int i = 0; i < n; ++i) out[i] = std::exp(a[i]);
      break;
    case Unary::Log:
#pragma omp parallel for schedule(static)
      for (int i = 0; i < n; ++i) out[i] = std::log(a[i]);
      break;
    case Unary::Relu:
#pragma omp parallel for schedule(static)
      for (int i = 0; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
      break;
    case Unary::Square:
#pragma omp parallel for schedule(static)
      for (int i = 0; i < n; ++i) out[i] = a[i] * a[i];
      break;
    case Unary::Neg:
#pragma omp parallel for schedule(static)
      for (int i = 0; i < n; ++i) out[i] = -a[i];
      break;
  }
}

void binary_op(Binary op, const double* a, const double* b, double* out, int n) {
  switch (op) {
    case Binary::Add:
#pragma omp parallel for schedule(static)
      for (int i = 0; i < n; ++i) out[i] = a[i] + b[i];
      break;
    case Binary::Sub:
#pragma omp parallel for schedule(static)
      for (int i = 0; i < n; ++i) out[i] = a[i] - b[i];
      break;
    case Binary::Mul:
#pragma omp parallel for schedule(static)
      for (int i = 0; i < n; ++i) out[i] = a[i] * b[i];
      break;
    case Binary::Div:
#pragma omp parallel for schedule(static)
      for (int i = 0; i < n; ++i) out[i] = a[i] / b[i];
      break;
  }
}

void scale(const double* a, double s, double* out, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) out[i] = s * a[i];
}

void axpy(double alpha, const double* x, double* y, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace par

namespace {
inline bool go_par(long long work) {
  return parallel_enabled() && thread_count() > 1 &&
         work >= static_cast<long long>(parallel_threshold());
}
}  // namespace

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n) {
  if (go_par(1LL * m * k * n)) par::matmul_nn(a, b, c, m, k, n);
  else serial::matmul_nn(a, b, c, m, k, n);
}
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n) {
  if (go_par(1LL * m * k * n)) par::matmul_nt(a, b, c, m, k, n);
  else serial::matmul_nt(a, b, c, m, k, n);
}
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n) {
  if (go_par(1LL * m * k * n)) par::matmul_tn(a, b, c, m, k, n);
  else serial::matmul_tn(a, b, c, m, k, n);
}
void transpose(const double* a, double* out, int rows, int cols) {
  if (go_par(1LL * rows * cols)) par::transpose(a, out, rows, cols);
  else serial::transpose(a, out, rows, cols);
}
void row_log_softmax(const double* z, double* y, int rows, int cols) {
  if (go_par(1LL * rows * cols)) par::row_log_softmax(z, y, rows, cols);
  else serial::row_log_softmax(z, y, rows, cols);
}
void col_log_softmax(const double* z, double* y, int rows, int cols) {
  if (go_par(1LL * rows * cols)) par::col_log_softmax(z, y, rows, cols);
  else serial::col_log_softmax(z, y, rows, cols);
}
void row_log_softmax_backward(const double* y, const double* g, double* dz, int rows, int cols) {
  if (go_par(1LL * rows * cols)) par::row_log_softmax_backward(y, g, dz, rows, cols);
  else serial::row_log_softmax_backward(y, g, dz, rows, cols);
}
void col_log_softmax_backward(const double* y, const double* g, double* dz, int rows, int cols) {
  if (go_par(1LL * rows * cols)) par::col_log_softmax_backward(y, g, dz, rows, cols);
  else serial::col_log_softmax_backward(y, g, dz, rows, cols);
}
void row_sums(const double* a, double* out, int rows, int cols) {
  if (go_par(1LL * rows * cols)) par::row_sums(a, out, rows, cols);
  else serial::row_sums(a, out, rows, cols);
}
void col_sums(const double* a, double* out, int rows, int cols) {
  if (go_par(1LL * rows * cols)) par::col_sums(a, out, rows, cols);
  else serial::col_sums(a, out, rows, cols);
}
double sum_all(const double* a, int rows, int cols) {
  if (go_par(1LL * rows * cols)) return par::sum_all(a, rows, cols);
  return serial::sum_all(a, rows, cols);
}
void unary_op(Unary op, const double* a, double* out, int n) {
  if (go_par(n)) par::unary_op(op, a, out, n);
  else serial::unary_op(op, a, out, n);
}
void binary_op(Binary op, const double* a, const double* b, double* out, int n) {
  if (go_par(n)) par::binary_op(op, a, b, out, n);
  else serial::binary_op(op, a, b, out, n);
}
void scale(const double* a, double s, double* out, int n) {
  if (go_par(n)) par::scale(a, s, out, n);
  else serial::scale(a, s, out, n);
}
void axpy(double alpha, const double* x, double* y, int n) {
  if (go_par(n)) par::axpy(alpha, x, y, n);
  else serial::axpy(alpha, x, y, n);
}

}  // namespace permlearn::kernels
