#include "ri/dists.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ri::dists {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

void check_same_dim(const DiagGaussian& a, const DiagGaussian& b, const char* what) {
  if (a.dim() != b.dim())
    throw std::invalid_argument(std::string(what) + ": dimension mismatch " +
                                std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
}
}  // namespace

void DiagGaussian::validate() const {
  if (mean.size() != var.size())
    throw std::invalid_argument("DiagGaussian: mean and var lengths differ");
  if (mean.empty()) throw std::invalid_argument("DiagGaussian: zero dimension");
  for (double v : var)
    if (!(v > 0.0)) throw std::invalid_argument("DiagGaussian: non-positive variance");
}

double GmmPrior::log_weight(int y) const {
  return y == 0 ? std::log(pi) : std::log(1.0 - pi);
}

void GmmPrior::validate() const {
  if (!(pi > 0.0 && pi < 1.0))
    throw std::invalid_argument("GmmPrior: pi must lie strictly inside (0, 1)");
  comp0.validate();
  comp1.validate();
  if (comp0.dim() != comp1.dim())
    throw std::invalid_argument("GmmPrior: component dimensions differ");
}

double clamp_prob(double p) { return std::clamp(p, kProbClampLo, kProbClampHi); }

double log_prob(double p) { return std::log(std::max(p, kProbClampLo)); }

double gauss_logpdf(const DiagGaussian& g, std::span<const double> x) {
  g.validate();
  if (x.size() != g.dim())
    throw std::invalid_argument("gauss_logpdf: point dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < g.dim(); ++i) {
    const double d = x[i] - g.mean[i];
    acc += -0.5 * (kLog2Pi + std::log(g.var[i])) - d * d / (2.0 * g.var[i]);
  }
  return acc;
}

std::vector<double> reparam_sample(const DiagGaussian& g, std::span<const double> eps) {
  g.validate();
  if (eps.size() != g.dim())
    throw std::invalid_argument("reparam_sample: eps dimension mismatch");
  std::vector<double> z(g.dim());
  for (std::size_t i = 0; i < g.dim(); ++i) z[i] = g.mean[i] + std::sqrt(g.var[i]) * eps[i];
  return z;
}

double gauss_cross_entropy(const DiagGaussian& p, const DiagGaussian& q) {
  p.validate();
  q.validate();
  check_same_dim(p, q, "gauss_cross_entropy");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    const double d = q.mean[i] - p.mean[i];
    acc += -0.5 * (kLog2Pi + std::log(p.var[i])) - q.var[i] / (2.0 * p.var[i]) -
           d * d / (2.0 * p.var[i]);
  }
  return acc;
}

double gauss_entropy(const DiagGaussian& g) {
  g.validate();
  double acc = 0.0;
  for (double v : g.var) acc += 0.5 * (kLog2Pi + 1.0 + std::log(v));
  return acc;
}

double kl_diag_gauss(const DiagGaussian& q, const DiagGaussian& p) {
  return -gauss_entropy(q) - gauss_cross_entropy(p, q);
}

double kl_gauss_std(const DiagGaussian& q) {
  q.validate();
  double acc = 0.0;
  for (std::size_t i = 0; i < q.dim(); ++i)
    acc += 0.5 * (q.var[i] + q.mean[i] * q.mean[i] - 1.0 - std::log(q.var[i]));
  return acc;
}

double bernoulli_entropy_terms(const BernoulliDist& post, const BernoulliDist& prior) {
  const double q1 = post.p1, q0 = 1.0 - post.p1;
  const double lp1 = log_prob(prior.p1), lp0 = log_prob(1.0 - prior.p1);
  // 0 * log 0 is taken as 0: a zero posterior weight kills the term before
  // the clamped log can contribute.
  double acc = 0.0;
  if (q0 != 0.0) acc += q0 * (lp0 - log_prob(q0));
  if (q1 != 0.0) acc += q1 * (lp1 - log_prob(q1));
  return acc;
}

}  // namespace ri::dists
