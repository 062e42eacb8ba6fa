#include <cmath>

#include "doctest.h"
#include "ri/matrix.hpp"
#include "ri/rng.hpp"

using ri::Matrix;

namespace {

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols, m.rows);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
  return t;
}

Matrix random_matrix(std::size_t r, std::size_t c, ri::Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.data) v = rng.uniform(-1.0, 1.0);
  return m;
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    if (a.data[i] != b.data[i]) return false;
  return true;
}

}  // namespace

TEST_CASE("matmul matches a hand-computed product") {
  Matrix a(2, 3), b(3, 2);
  a.data = {1, 2, 3, 4, 5, 6};
  b.data = {7, 8, 9, 10, 11, 12};
  const Matrix c = ri::kernels::serial::matmul(a, b);
  REQUIRE(c.rows == 2);
  REQUIRE(c.cols == 2);
  CHECK(c(0, 0) == 58.0);
  CHECK(c(0, 1) == 64.0);
  CHECK(c(1, 0) == 139.0);
  CHECK(c(1, 1) == 154.0);
}

TEST_CASE("transposed kernels agree with explicit transposition") {
  ri::Rng rng(7);
  const Matrix a = random_matrix(5, 4, rng);
  const Matrix b = random_matrix(6, 4, rng);
  CHECK(bitwise_equal(ri::kernels::serial::matmul_a_bt(a, b),
                      ri::kernels::serial::matmul(a, transpose(b))));
  const Matrix c = random_matrix(5, 6, rng);
  CHECK(bitwise_equal(ri::kernels::serial::matmul_at_b(a, c),
                      ri::kernels::serial::matmul(transpose(a), c)));
}

TEST_CASE("parallel kernels are bitwise equal to the serial reference") {
  // Cover shapes below and above the parallel dispatch threshold.
  for (std::size_t dim : {3u, 17u, 64u, 160u}) {
    ri::Rng rng(ri::mix_seed(11, dim));
    const Matrix a = random_matrix(dim, dim + 1, rng);
    const Matrix b = random_matrix(dim + 1, dim + 2, rng);
    CHECK(bitwise_equal(ri::kernels::omp::matmul(a, b), ri::kernels::serial::matmul(a, b)));
    CHECK(bitwise_equal(ri::kernels::matmul(a, b), ri::kernels::serial::matmul(a, b)));

    const Matrix bt = random_matrix(dim + 2, dim + 1, rng);
    CHECK(bitwise_equal(ri::kernels::omp::matmul_a_bt(a, bt),
                        ri::kernels::serial::matmul_a_bt(a, bt)));
    CHECK(bitwise_equal(ri::kernels::matmul_a_bt(a, bt),
                        ri::kernels::serial::matmul_a_bt(a, bt)));

    const Matrix c = random_matrix(dim, dim + 3, rng);
    CHECK(bitwise_equal(ri::kernels::omp::matmul_at_b(a, c),
                        ri::kernels::serial::matmul_at_b(a, c)));
    CHECK(bitwise_equal(ri::kernels::matmul_at_b(a, c),
                        ri::kernels::serial::matmul_at_b(a, c)));
  }
}

TEST_CASE("shape mismatches are rejected") {
  const Matrix a(2, 3), b(4, 2);
  CHECK_THROWS_AS((void)ri::kernels::matmul(a, b), std::invalid_argument);
  CHECK_THROWS_AS((void)ri::kernels::matmul_a_bt(a, Matrix(2, 4)), std::invalid_argument);
  CHECK_THROWS_AS((void)ri::kernels::matmul_at_b(a, Matrix(3, 2)), std::invalid_argument);
}

TEST_CASE("take_rows gathers rows in the requested order") {
  Matrix m(3, 2);
  m.data = {1, 2, 3, 4, 5, 6};
  const Matrix got = ri::take_rows(m, {2, 0});
  REQUIRE(got.rows == 2);
  CHECK(got(0, 0) == 5);
  CHECK(got(0, 1) == 6);
  CHECK(got(1, 0) == 1);
  CHECK(got(1, 1) == 2);
}

TEST_CASE("all_finite flags NaN and infinity") {
  Matrix m(2, 2, 1.0);
  CHECK(ri::all_finite(m));
  m(1, 1) = std::nan("");
  CHECK_FALSE(ri::all_finite(m));
  m(1, 1) = INFINITY;
  CHECK_FALSE(ri::all_finite(m));
}

TEST_CASE("rng produces identical streams from identical seeds") {
  ri::Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
  ri::Rng c(42), d(43);
  CHECK(c.normal() != d.normal());
}

TEST_CASE("rng shuffle is a permutation") {
  std::vector<std::size_t> v(10);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
  ri::Rng rng(3);
  rng.shuffle(v);
  std::vector<bool> seen(v.size(), false);
  for (std::size_t x : v) {
    REQUIRE(x < seen.size());
    CHECK_FALSE(seen[x]);
    seen[x] = true;
  }
}
