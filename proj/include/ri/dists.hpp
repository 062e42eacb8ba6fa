#pragma once

#include <span>
#include <vector>

namespace ri::dists {

/// Diagonal Gaussian given by per-dimension means and variances.
struct DiagGaussian {
  std::vector<double> mean;
  std::vector<double> var;

  std::size_t dim() const { return mean.size(); }
  /// Throws std::invalid_argument on size mismatch or non-positive variance.
  void validate() const;
};

/// Two-component Gaussian mixture over the latent space; pi is the weight
/// of component 0 (the class-0 component) and must lie in (0, 1).
struct GmmPrior {
  double pi = 0.5;
  DiagGaussian comp0, comp1;

  const DiagGaussian& component(int y) const { return y == 0 ? comp0 : comp1; }
  double log_weight(int y) const;
  void validate() const;
};

struct BernoulliDist {
  double p1 = 0.5;  // probability of class 1
};

/// Probabilities are clamped to this interval where both log(p) and
/// log(1 - p) are taken (calibration features); where only log(p) appears
/// the low bound alone is applied via log_prob so that log(1) stays exactly
/// zero and degenerate-posterior identities hold to machine precision.
inline constexpr double kProbClampLo = 1e-7;
inline constexpr double kProbClampHi = 1.0 - 1e-7;
double clamp_prob(double p);

/// log(max(p, kProbClampLo)); p is expected to lie in [0, 1].
double log_prob(double p);

/// log N(x | mean, diag(var)), summed over dimensions.
double gauss_logpdf(const DiagGaussian& g, std::span<const double> x);

/// mean + sqrt(var) * eps, elementwise.
std::vector<double> reparam_sample(const DiagGaussian& g, std::span<const double> eps);

/// Cross entropy integral of q against p:
///   integral q(x) log p(x) dx
///     = sum_i [ -0.5 log(2 pi var_p_i)
///               - var_q_i / (2 var_p_i)
///               - (mean_q_i - mean_p_i)^2 / (2 var_p_i) ].
double gauss_cross_entropy(const DiagGaussian& p, const DiagGaussian& q);

/// Differential entropy of a diagonal Gaussian,
///   0.5 * sum_i log(2 pi e var_i).
double gauss_entropy(const DiagGaussian& g);

/// KL(q || p) between diagonal Gaussians, computed as
/// -entropy(q) - cross_entropy(p, q) so the 2 pi bookkeeping cancels in
/// exactly one place. Always >= 0, zero iff q == p.
double kl_diag_gauss(const DiagGaussian& q, const DiagGaussian& p);

/// KL(q || N(0, I)) in closed form: 0.5 * sum (var + mean^2 - 1 - log var).
double kl_gauss_std(const DiagGaussian& q);

/// Negative KL between two-point (Bernoulli) distributions,
///   -KL(post || prior) = sum_y post(y) * (log prior(y) - log post(y)),
/// with probabilities clamped before the logs. Zero at equality, else < 0.
double bernoulli_entropy_terms(const BernoulliDist& post, const BernoulliDist& prior);

}  // namespace ri::dists
