#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "ri/dists.hpp"
#include "ri/rng.hpp"
#include "support/quadrature.hpp"

using ri::dists::BernoulliDist;
using ri::dists::DiagGaussian;

namespace {

constexpr double kLog2Pi = 1.8378770664093455;

double log_normal_1d(double x, double mu, double var) {
  return -0.5 * (kLog2Pi + std::log(var)) - (x - mu) * (x - mu) / (2.0 * var);
}

DiagGaussian random_gauss(std::size_t d, ri::Rng& rng) {
  DiagGaussian g;
  g.mean.resize(d);
  g.var.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    g.mean[i] = rng.uniform(-3.0, 3.0);
    g.var[i] = std::exp(rng.uniform(-2.0, 2.0));
  }
  return g;
}

/// Direct closed form for KL(q || p), written independently of the
/// entropy/cross-entropy composition the library uses.
double kl_direct(const DiagGaussian& q, const DiagGaussian& p) {
  double acc = 0.0;
  for (std::size_t i = 0; i < q.dim(); ++i) {
    const double d = q.mean[i] - p.mean[i];
    acc += 0.5 * (std::log(p.var[i] / q.var[i]) + (q.var[i] + d * d) / p.var[i] - 1.0);
  }
  return acc;
}

}  // namespace

TEST_CASE("validate rejects malformed parameters") {
  DiagGaussian g{{0.0, 1.0}, {1.0, 2.0}};
  CHECK_NOTHROW(g.validate());
  g.var[1] = 0.0;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  g.var[1] = -1.0;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  DiagGaussian bad{{0.0}, {1.0, 1.0}};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  ri::dists::GmmPrior prior;
  prior.comp0 = DiagGaussian{{0.0}, {1.0}};
  prior.comp1 = DiagGaussian{{1.0}, {1.0}};
  CHECK_NOTHROW(prior.validate());
  prior.pi = 0.0;
  CHECK_THROWS_AS(prior.validate(), std::invalid_argument);
  prior.pi = 1.0;
  CHECK_THROWS_AS(prior.validate(), std::invalid_argument);
}

TEST_CASE("gmm prior selects components and log weights by label") {
  ri::dists::GmmPrior prior;
  prior.pi = 0.25;  // weight of the class-0 component
  prior.comp0 = DiagGaussian{{-1.0}, {1.0}};
  prior.comp1 = DiagGaussian{{2.0}, {3.0}};
  CHECK(prior.component(0).mean[0] == -1.0);
  CHECK(prior.component(1).mean[0] == 2.0);
  CHECK(prior.log_weight(0) == doctest::Approx(std::log(0.25)).epsilon(1e-14));
  CHECK(prior.log_weight(1) == doctest::Approx(std::log(0.75)).epsilon(1e-14));
}

TEST_CASE("gauss_logpdf matches the explicit density") {
  // Standard normal at the origin, one dimension.
  DiagGaussian std1{{0.0}, {1.0}};
  CHECK(ri::dists::gauss_logpdf(std1, std::vector<double>{0.0}) ==
        doctest::Approx(-0.91893853320467267).epsilon(1e-15));

  ri::Rng rng(101);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t d = 1 + rep % 4;
    const DiagGaussian g = random_gauss(d, rng);
    std::vector<double> x(d);
    for (auto& xi : x) xi = rng.uniform(-4.0, 4.0);
    double want = 0.0;
    for (std::size_t i = 0; i < d; ++i) want += log_normal_1d(x[i], g.mean[i], g.var[i]);
    CHECK(ri::dists::gauss_logpdf(g, x) == doctest::Approx(want).epsilon(1e-13));
  }
}

TEST_CASE("exp(gauss_logpdf) integrates to one") {
  const DiagGaussian g{{0.7}, {2.3}};
  const auto density = [&](double x) {
    return std::exp(ri::dists::gauss_logpdf(g, std::vector<double>{x}));
  };
  const double lo = g.mean[0] - 12.0 * std::sqrt(g.var[0]);
  const double hi = g.mean[0] + 12.0 * std::sqrt(g.var[0]);
  CHECK(testsupport::adaptive_simpson(density, lo, hi, 1e-12) ==
        doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("reparam_sample is the exact affine transform") {
  const DiagGaussian g{{1.0, -2.0}, {4.0, 0.25}};
  const std::vector<double> eps{0.5, -1.0};
  const auto z = ri::dists::reparam_sample(g, eps);
  CHECK(z[0] == 1.0 + 2.0 * 0.5);
  CHECK(z[1] == -2.0 + 0.5 * -1.0);
}

TEST_CASE("cross entropy matches Gauss-Hermite quadrature") {
  // E_q[log p] separates per dimension, so a 1-d rule per coordinate is an
  // exact-oracle check (the integrand is quadratic in x).
  const auto gh = testsupport::gauss_hermite(40);
  ri::Rng rng(202);
  for (std::size_t d : {1u, 2u, 3u, 5u}) {
    for (int rep = 0; rep < 10; ++rep) {
      const DiagGaussian p = random_gauss(d, rng);
      const DiagGaussian q = random_gauss(d, rng);
      double want = 0.0;
      for (std::size_t i = 0; i < d; ++i)
        want += testsupport::gauss_expect(
            gh, q.mean[i], q.var[i], [&](double x) { return log_normal_1d(x, p.mean[i], p.var[i]); });
      CHECK(ri::dists::gauss_cross_entropy(p, q) == doctest::Approx(want).epsilon(1e-10));
    }
  }
}

TEST_CASE("cross entropy matches Monte Carlo within stated error") {
  ri::Rng rng(303);
  const std::size_t n = 200000;
  for (int rep = 0; rep < 4; ++rep) {
    const std::size_t d = 1 + rep;
    const DiagGaussian p = random_gauss(d, rng);
    const DiagGaussian q = random_gauss(d, rng);
    double sum = 0.0, sumsq = 0.0;
    std::vector<double> eps(d);
    for (std::size_t s = 0; s < n; ++s) {
      for (auto& e : eps) e = rng.normal();
      const auto x = ri::dists::reparam_sample(q, eps);
      const double v = ri::dists::gauss_logpdf(p, x);
      sum += v;
      sumsq += v * v;
    }
    const double mean = sum / n;
    const double var = (sumsq - n * mean * mean) / (n - 1.0);
    const double se = std::sqrt(var / n);
    CHECK(std::abs(ri::dists::gauss_cross_entropy(p, q) - mean) <= 4.0 * se);
  }
}

TEST_CASE("gauss_entropy matches its closed form") {
  ri::Rng rng(404);
  const DiagGaussian g = random_gauss(3, rng);
  double want = 0.0;
  for (double v : g.var) want += 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * v);
  CHECK(ri::dists::gauss_entropy(g) == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("kl_diag_gauss: direct form, nonnegativity, zero at equality") {
  ri::Rng rng(505);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t d = 1 + rep % 5;
    const DiagGaussian q = random_gauss(d, rng);
    const DiagGaussian p = random_gauss(d, rng);
    const double kl = ri::dists::kl_diag_gauss(q, p);
    CHECK(kl >= 0.0);
    CHECK(kl == doctest::Approx(kl_direct(q, p)).epsilon(1e-11));
    // Composition identity: KL = int q log q - int q log p.
    const double via_ce =
        ri::dists::gauss_cross_entropy(q, q) - ri::dists::gauss_cross_entropy(p, q);
    CHECK(kl == doctest::Approx(via_ce).epsilon(1e-11));
    CHECK(std::abs(ri::dists::kl_diag_gauss(q, q)) <= 1e-12);
  }
}

TEST_CASE("kl_gauss_std equals the general KL against N(0, I)") {
  ri::Rng rng(606);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t d = 1 + rep % 5;
    const DiagGaussian q = random_gauss(d, rng);
    DiagGaussian std_normal;
    std_normal.mean.assign(d, 0.0);
    std_normal.var.assign(d, 1.0);
    CHECK(std::abs(ri::dists::kl_gauss_std(q) - ri::dists::kl_diag_gauss(q, std_normal)) <=
          1e-12 * std::max(1.0, std::abs(ri::dists::kl_gauss_std(q))));
  }
  DiagGaussian std1{{0.0, 0.0}, {1.0, 1.0}};
  CHECK(ri::dists::kl_gauss_std(std1) == 0.0);
}

TEST_CASE("reparameterization gradient matches finite differences") {
  // d/dmu E[f(mu + sigma eps)] for quadratic f, common random numbers.
  ri::Rng noise(707);
  const std::size_t n = 2000;
  std::vector<double> eps(n);
  for (auto& e : eps) e = noise.normal();
  const auto f = [](double z) { return 3.0 * z * z - 2.0 * z + 1.0; };
  const auto expect = [&](double mu, double var) {
    DiagGaussian g{{mu}, {var}};
    double acc = 0.0;
    for (double e : eps) acc += f(ri::dists::reparam_sample(g, std::vector<double>{e})[0]);
    return acc / n;
  };
  const double mu = 0.4, var = 1.7;
  // Pathwise analytic gradient: E[f'(z)] with the same draws.
  double grad = 0.0;
  for (double e : eps) grad += 6.0 * (mu + std::sqrt(var) * e) - 2.0;
  grad /= n;
  const double h = 1e-5;
  const double fd = (expect(mu + h, var) - expect(mu - h, var)) / (2.0 * h);
  CHECK(fd == doctest::Approx(grad).epsilon(1e-4));
}

TEST_CASE("bernoulli_entropy_terms is -KL with a frozen example") {
  const BernoulliDist uniform{0.5};
  CHECK(ri::dists::bernoulli_entropy_terms(uniform, uniform) == 0.0);
  const BernoulliDist post{0.1};
  // 0.9 log(0.5/0.9) + 0.1 log(0.5/0.1)
  CHECK(ri::dists::bernoulli_entropy_terms(post, uniform) ==
        doctest::Approx(-0.36806420716849712).epsilon(1e-14));
  ri::Rng rng(808);
  for (int rep = 0; rep < 100; ++rep) {
    const BernoulliDist a{rng.uniform(0.01, 0.99)}, b{rng.uniform(0.01, 0.99)};
    CHECK(ri::dists::bernoulli_entropy_terms(a, b) <= 1e-15);
    CHECK(ri::dists::bernoulli_entropy_terms(a, a) == doctest::Approx(0.0).epsilon(1e-14));
  }
}

TEST_CASE("probability clamps") {
  CHECK(ri::dists::log_prob(1.0) == 0.0);
  CHECK(ri::dists::log_prob(0.0) == std::log(ri::dists::kProbClampLo));
  CHECK(ri::dists::log_prob(0.5) == std::log(0.5));
  CHECK(ri::dists::clamp_prob(0.0) == ri::dists::kProbClampLo);
  CHECK(ri::dists::clamp_prob(1.0) == ri::dists::kProbClampHi);
  CHECK(ri::dists::clamp_prob(0.25) == 0.25);
}

TEST_CASE("gauss-hermite oracle sanity: moments of exp(-x^2)") {
  const auto q = testsupport::gauss_hermite(20);
  double s0 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < q.x.size(); ++i) {
    s0 += q.w[i];
    s2 += q.w[i] * q.x[i] * q.x[i];
  }
  const double sqrt_pi = 1.7724538509055160;
  CHECK(s0 == doctest::Approx(sqrt_pi).epsilon(1e-13));
  CHECK(s2 == doctest::Approx(0.5 * sqrt_pi).epsilon(1e-13));
}
