#include "ri/matrix.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ri {

bool all_finite(const Matrix& m) {
  for (double v : m.data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix out(idx.size(), m.cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= m.rows) throw std::out_of_range("take_rows: row index out of range");
    const double* src = m.row(idx[i]);
    double* dst = out.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) dst[j] = src[j];
  }
  return out;
}

namespace kernels {

static void check_matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw std::invalid_argument("matmul: inner dimensions " + std::to_string(a.cols) +
                                " and " + std::to_string(b.rows) + " do not match");
}

static void check_a_bt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols)
    throw std::invalid_argument("matmul_a_bt: column counts " + std::to_string(a.cols) +
                                " and " + std::to_string(b.cols) + " do not match");
}

static void check_at_b(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows)
    throw std::invalid_argument("matmul_at_b: row counts " + std::to_string(a.rows) +
                                " and " + std::to_string(b.rows) + " do not match");
}

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_matmul(a, b);
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = ai[k];
      const double* bk = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  check_a_bt(a, b);
  Matrix c(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* bj = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += ai[k] * bj[k];
      ci[j] = acc;
    }
  }
  return c;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  check_at_b(a, b);
  Matrix c(a.cols, b.cols);
  for (std::size_t i = 0; i < a.cols; ++i) {
    double* ci = c.row(i);
    for (std::size_t r = 0; r < a.rows; ++r) {
      const double ari = a(r, i);
      const double* br = b.row(r);
      for (std::size_t j = 0; j < b.cols; ++j) ci[j] += ari * br[j];
    }
  }
  return c;
}

}  // namespace serial

namespace omp {

// Each output row is owned by exactly one thread and its inner loops run
// in the same order as the serial kernel, so results match bitwise.

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_matmul(a, b);
  Matrix c(a.rows, b.cols);
  const std::int64_t n = static_cast<std::int64_t>(a.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const double* ai = a.row(static_cast<std::size_t>(i));
    double* ci = c.row(static_cast<std::size_t>(i));
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = ai[k];
      const double* bk = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  check_a_bt(a, b);
  Matrix c(a.rows, b.rows);
  const std::int64_t n = static_cast<std::int64_t>(a.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const double* ai = a.row(static_cast<std::size_t>(i));
    double* ci = c.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* bj = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += ai[k] * bj[k];
      ci[j] = acc;
    }
  }
  return c;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  check_at_b(a, b);
  Matrix c(a.cols, b.cols);
  const std::int64_t n = static_cast<std::int64_t>(a.cols);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    double* ci = c.row(static_cast<std::size_t>(i));
    for (std::size_t r = 0; r < a.rows; ++r) {
      const double ari = a(r, static_cast<std::size_t>(i));
      const double* br = b.row(r);
      for (std::size_t j = 0; j < b.cols; ++j) ci[j] += ari * br[j];
    }
  }
  return c;
}

}  // namespace omp

#ifdef _OPENMP
static bool go_parallel(std::size_t work) { return work >= kParallelWorkThreshold; }
#else
static bool go_parallel(std::size_t) { return false; }
#endif

Matrix matmul(const Matrix& a, const Matrix& b) {
  return go_parallel(a.rows * a.cols * b.cols) ? omp::matmul(a, b) : serial::matmul(a, b);
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  return go_parallel(a.rows * a.cols * b.rows) ? omp::matmul_a_bt(a, b)
                                               : serial::matmul_a_bt(a, b);
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  return go_parallel(a.rows * a.cols * b.cols) ? omp::matmul_at_b(a, b)
                                               : serial::matmul_at_b(a, b);
}

}  // namespace kernels
}  // namespace ri
