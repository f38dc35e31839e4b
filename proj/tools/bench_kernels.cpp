// Times the OpenMP kernels against the serial reference and checks that both
// paths agree bitwise. Sizes cover the regimes the training loops hit
// (n = 64 .. 512 score matrices).

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "permlearn/kernels.hpp"
#include "permlearn/matrix.hpp"
#include "permlearn/rng.hpp"
#include "permlearn/sinkhorn.hpp"

using namespace permlearn;
namespace k = kernels;

namespace {

double time_of(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / reps;
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data.data(), b.data.data(), sizeof(double) * a.size()) == 0;
}

struct Row {
  std::string name;
  double serial_s;
  double parallel_s;
  bool identical;
};

}  // namespace

int main(int argc, char** argv) {
  bool quick = false;
  for (int i = 1; i < argc; ++i)
    if (std::string(argv[i]) == "--quick") quick = true;

  std::vector<int> sizes = quick ? std::vector<int>{64, 128} : std::vector<int>{64, 128, 256, 512};
  const int reps = quick ? 3 : 10;

  std::printf("threads available: %d\n", k::thread_count());
  std::printf("%-28s %12s %12s %9s %s\n", "kernel", "serial (ms)", "openmp (ms)", "speedup",
              "bitwise");

  std::vector<Row> rows;
  for (int n : sizes) {
    const Matrix a = rng::uniform_matrix(n, n, -3.0, 3.0, 1);
    const Matrix b = rng::uniform_matrix(n, n, -3.0, 3.0, 2);
    Matrix out_s(n, n), out_p(n, n);
    char name[64];

    auto bench = [&](const char* op, const std::function<void(double*)>& run_serial,
                     const std::function<void(double*)>& run_parallel) {
      std::snprintf(name, sizeof(name), "%s n=%d", op, n);
      Row row;
      row.name = name;
      row.serial_s = time_of([&] { run_serial(out_s.data.data()); }, reps);
      row.parallel_s = time_of([&] { run_parallel(out_p.data.data()); }, reps);
      row.identical = bitwise_equal(out_s, out_p);
      rows.push_back(row);
    };

    bench(
        "matmul_nn",
        [&](double* out) { k::serial::matmul_nn(a.data.data(), b.data.data(), out, n, n, n); },
        [&](double* out) { k::par::matmul_nn(a.data.data(), b.data.data(), out, n, n, n); });
    bench(
        "row_log_softmax",
        [&](double* out) { k::serial::row_log_softmax(a.data.data(), out, n, n); },
        [&](double* out) { k::par::row_log_softmax(a.data.data(), out, n, n); });
    bench(
        "col_log_softmax",
        [&](double* out) { k::serial::col_log_softmax(a.data.data(), out, n, n); },
        [&](double* out) { k::par::col_log_softmax(a.data.data(), out, n, n); });
    bench(
        "binary_mul",
        [&](double* out) {
          k::serial::binary_op(k::Binary::Mul, a.data.data(), b.data.data(), out, n * n);
        },
        [&](double* out) {
          k::par::binary_op(k::Binary::Mul, a.data.data(), b.data.data(), out, n * n);
        });

    // Whole-operator comparison: 10-iteration log-space Sinkhorn forward.
    {
      std::snprintf(name, sizeof(name), "log_sinkhorn(10) n=%d", n);
      Row row;
      row.name = name;
      const bool before = k::parallel_enabled();
      k::set_parallel_enabled(false);
      Matrix ps;
      row.serial_s = time_of([&] { ps = log_sinkhorn(a, 10).matrix; }, reps);
      k::set_parallel_enabled(true);
      k::set_parallel_threshold(1);
      Matrix pp;
      row.parallel_s = time_of([&] { pp = log_sinkhorn(a, 10).matrix; }, reps);
      k::set_parallel_threshold(8192);
      k::set_parallel_enabled(before);
      row.identical = bitwise_equal(ps, pp);
      rows.push_back(row);
    }
  }

  bool all_identical = true;
  for (const Row& r : rows) {
    std::printf("%-28s %12.4f %12.4f %8.2fx %s\n", r.name.c_str(), r.serial_s * 1e3,
                r.parallel_s * 1e3, r.serial_s / r.parallel_s, r.identical ? "yes" : "NO");
    all_identical = all_identical && r.identical;
  }
  if (!all_identical) {
    std::printf("ERROR: serial and OpenMP paths disagree\n");
    return 1;
  }
  return 0;
}
