#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ri/data.hpp"
#include "ri/elbo.hpp"
#include "ri/matrix.hpp"
#include "ri/nn.hpp"
#include "ri/rng.hpp"

namespace ri::model2 {

struct Model2Dims {
  std::size_t lx = 0;
  std::size_t lz = 50;
  std::size_t la = 50;  // auxiliary latent width; must be positive
  std::vector<std::size_t> encoder_z_hidden{10, 40, 10};
  std::vector<std::size_t> decoder_hidden{10, 40, 10};
  std::vector<std::size_t> gmm_hidden{10};
  std::vector<std::size_t> encoder_a_hidden{10, 40};
  std::vector<std::size_t> classifier_hidden{130};
};

/// Auxiliary-variable variant: the generative side adds an independent
/// standard-normal latent a and conditions the decoder on the label,
///   p(a) p(y) p(z|y) p(x|z,y),
/// while inference factorizes as q(a|x) q(y|x,a) q(z|x,y).
struct Model2Params {
  std::size_t lx = 0, lz = 0, la = 0;
  double prior_pi = 0.5;
  nn::MlpParams gmm_net;         // one-hot y (2)   -> heads mu, var (lz each)
  nn::MlpParams decoder_net;     // z ++ one-hot y  -> heads mu, var (lx each)
  nn::MlpParams encoder_z_net;   // x ++ one-hot y  -> heads mu, var (lz each)
  nn::MlpParams encoder_a_net;   // x               -> heads mu, var (la each)
  nn::MlpParams classifier_net;  // x ++ a          -> head probs (2, softmax)

  void validate() const;
};

Model2Params init_model2(const Model2Dims& dims, double prior_pi, Rng& rng);

using EpsDraws = std::vector<std::vector<double>>;

/// Supervised bound:
///   -KL(q(z|x,y) || p(z|y)) - KL(q(a|x) || N(0,I)) + log p(y)
///   + mean_draws log N(x | decoder(z, y)).
/// The a-penalty is closed form, so eps_a is unused here; the parameter
/// keeps the two bounds' signatures aligned.
ElboBreakdown elbo_accept2(const Model2Params& p, std::span<const double> x, int y,
                           const EpsDraws& eps_z, const EpsDraws& eps_a);

/// Unsupervised bound: a is sampled from q(a|x) (eps_a draws), the label
/// is enumerated under q(y|x,a) per draw, and the z branches reuse the
/// same eps_z draws for both candidates.
ElboBreakdown elbo_reject2(const Model2Params& p, std::span<const double> x,
                           const EpsDraws& eps_z, const EpsDraws& eps_a);

struct Model2Grads {
  nn::MlpParams gmm, decoder, encoder_z, encoder_a, classifier;
};

struct TrainConfig2 {
  double learning_rate = 5e-5;
  double beta = 0.008;
  std::size_t n_draws = 1;    // z draws per bound
  std::size_t n_draws_a = 1;  // a draws per bound
  std::size_t epochs = 50;
  std::size_t batch_size = 128;
  std::size_t pretrain_epochs = 0;  // warm-up epochs with the classifier weight at zero
  bool strict_alternation = false;
  double prior_pi = 0.5;
  std::uint64_t seed = 0;
};

struct Objective2Out {
  double loss = 0.0;
  double supervised = 0.0;
  double classifier = 0.0;  // mean of -log q(y|x,a) under sampled a
  double unsupervised = 0.0;
  double alpha = 0.0;
  Model2Grads grads;
};

/// Same shape as the first model's objective; the classifier term draws a
/// from q(a|x) so its gradient reaches encoder_a_net through the
/// reparameterization. All noise comes from noise_seed in a fixed order.
Objective2Out objective2(const Model2Params& p, const Matrix& x_labeled,
                         const std::vector<int>& y_labeled, const Matrix& x_unlabeled,
                         const TrainConfig2& cfg, std::size_t n_total, std::size_t m_total,
                         std::uint64_t noise_seed, bool want_grads = true);

struct TrainResult {
  Model2Params params;
  std::vector<double> loss_trace;
};

/// Training run on standardized features. pretrain_epochs warm-up passes
/// run the same objective with the classifier weight forced to zero.
TrainResult train2(const data::LabeledDataset& labeled, const data::UnlabeledDataset& unlabeled,
                   const Model2Dims& dims, const TrainConfig2& cfg);

/// P(y = 1 | x) averaged over n_mc posterior draws of a.
std::vector<double> predict_proba2(const Model2Params& p, const Matrix& x, std::size_t n_mc,
                                   std::uint64_t seed);

}  // namespace ri::model2
