#pragma once

#include <cstddef>

// Dense numeric kernels behind the tape and Sinkhorn operators.
//
// Every kernel exists twice: kernels::serial is the plain reference
// implementation, kernels::par is the OpenMP version. The parallel variants
// split work across *independent output elements* (rows for row-wise ops,
// columns for column-wise ops) and keep the per-element summation order
// identical to the serial code, so the two paths produce bitwise-identical
// results; tests assert that. The unqualified functions dispatch at runtime
// based on set_parallel_enabled() and the work size.

namespace permlearn::kernels {

enum class Unary { Exp, Log, Relu, Square, Neg };
enum class Binary { Add, Sub, Mul, Div };

void set_parallel_enabled(bool on);
bool parallel_enabled();
void set_parallel_threshold(int elems);
int parallel_threshold();
int thread_count();  // max OpenMP threads, 1 without OpenMP

#define PERMLEARN_KERNEL_LIST                                                            \
  /* c(m x n) = a(m x k) * b(k x n) */                                                   \
  void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n);      \
  /* c(m x n) = a(m x k) * b(n x k)^T */                                                 \
  void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n);      \
  /* c(m x n) = a(k x m)^T * b(k x n) */                                                 \
  void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n);      \
  void transpose(const double* a, double* out, int rows, int cols);                     \
  void row_log_softmax(const double* z, double* y, int rows, int cols);                 \
  void col_log_softmax(const double* z, double* y, int rows, int cols);                 \
  /* dz = g - exp(y) * row_sum(g), y = row_log_softmax output */                         \
  void row_log_softmax_backward(const double* y, const double* g, double* dz, int rows, \
                                int cols);                                              \
  void col_log_softmax_backward(const double* y, const double* g, double* dz, int rows, \
                                int cols);                                              \
  void row_sums(const double* a, double* out, int rows, int cols);                      \
  void col_sums(const double* a, double* out, int rows, int cols);                      \
  double sum_all(const double* a, int rows, int cols);                                  \
  void unary_op(Unary op, const double* a, double* out, int n);                         \
  void binary_op(Binary op, const double* a, const double* b, double* out, int n);      \
  void scale(const double* a, double s, double* out, int n);                            \
  /* y += alpha * x */                                                                  \
  void axpy(double alpha, const double* x, double* y, int n);

namespace serial {
PERMLEARN_KERNEL_LIST
}
namespace par {
PERMLEARN_KERNEL_LIST
}

// Runtime-dispatched entry points used by the rest of the library.
PERMLEARN_KERNEL_LIST

#undef PERMLEARN_KERNEL_LIST

}  // namespace permlearn::kernels
