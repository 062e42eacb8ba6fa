#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ri {

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }

  bool empty() const { return rows == 0 || cols == 0; }
  std::size_t size() const { return data.size(); }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

bool all_finite(const Matrix& m);

// Gathers the given rows into a new matrix.
Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& idx);

namespace kernels {

// Serial reference kernels. These define the ground truth; the OpenMP
// variants below must produce bitwise-identical results because every
// output element is computed by a single thread with the same inner-loop
// order as here.
namespace serial {
Matrix matmul(const Matrix& a, const Matrix& b);        // (m x k)(k x n) -> m x n
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);   // (m x k)(n x k)^T -> m x n
Matrix matmul_at_b(const Matrix& a, const Matrix& b);   // (m x k)^T(m x n) -> k x n
}  // namespace serial

namespace omp {
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);
Matrix matmul_at_b(const Matrix& a, const Matrix& b);
}  // namespace omp

// Dispatchers: pick the OpenMP kernel when the flop count is large enough
// to pay for the fork, the serial one otherwise. Results are identical
// either way.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);
Matrix matmul_at_b(const Matrix& a, const Matrix& b);

// Work threshold (multiply-adds) above which the dispatchers go parallel.
inline constexpr std::size_t kParallelWorkThreshold = 1u << 16;

}  // namespace kernels

}  // namespace ri
