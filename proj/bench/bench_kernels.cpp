// Times the serial reference kernels against the OpenMP variants and
// checks that both produce bitwise-identical outputs. Usage:
//
//   bench_kernels [max_dim] [repeats]
//
// Prints one line per (kernel, size): the serial and parallel wall times
// in milliseconds, the speedup, and whether the outputs matched exactly.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ri/matrix.hpp"
#include "ri/rng.hpp"

namespace {

using ri::Matrix;

Matrix random_matrix(std::size_t r, std::size_t c, ri::Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.data) v = rng.uniform(-1.0, 1.0);
  return m;
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  return a.same_shape(b) &&
         std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

template <typename F>
double time_ms(F&& fn, int repeats, Matrix& out) {
  // One warm-up call, then the best of `repeats` timed calls.
  out = fn();
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    out = fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t max_dim = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 512;
  const int repeats = argc > 2 ? std::atoi(argv[2]) : 5;

#ifdef _OPENMP
  std::printf("openmp enabled, max threads %d\n", omp_get_max_threads());
#else
  std::printf("openmp disabled; parallel kernels fall back to the serial path\n");
#endif
  std::printf("%-12s %6s %10s %10s %8s %7s\n", "kernel", "dim", "serial_ms", "omp_ms", "speedup",
              "match");

  bool all_match = true;
  for (std::size_t dim = 64; dim <= max_dim; dim *= 2) {
    ri::Rng rng(ri::mix_seed(0xbe7c, dim));
    const Matrix a = random_matrix(dim, dim, rng);
    const Matrix b = random_matrix(dim, dim, rng);

    struct Case {
      const char* name;
      Matrix (*serial)(const Matrix&, const Matrix&);
      Matrix (*parallel)(const Matrix&, const Matrix&);
    };
    const Case cases[] = {
        {"matmul", ri::kernels::serial::matmul, ri::kernels::omp::matmul},
        {"matmul_a_bt", ri::kernels::serial::matmul_a_bt, ri::kernels::omp::matmul_a_bt},
        {"matmul_at_b", ri::kernels::serial::matmul_at_b, ri::kernels::omp::matmul_at_b},
    };
    for (const Case& c : cases) {
      Matrix out_serial, out_omp;
      const double ts = time_ms([&] { return c.serial(a, b); }, repeats, out_serial);
      const double tp = time_ms([&] { return c.parallel(a, b); }, repeats, out_omp);
      const bool match = bitwise_equal(out_serial, out_omp);
      all_match = all_match && match;
      std::printf("%-12s %6zu %10.3f %10.3f %8.2f %7s\n", c.name, dim, ts, tp,
                  tp > 0 ? ts / tp : 0.0, match ? "yes" : "NO");
    }
  }
  if (!all_match) {
    std::printf("mismatch between serial and parallel kernels\n");
    return 1;
  }
  return 0;
}
