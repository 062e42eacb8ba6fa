#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ri/data.hpp"
#include "ri/elbo.hpp"
#include "ri/matrix.hpp"
#include "ri/nn.hpp"
#include "ri/rng.hpp"

namespace ri::model1 {

/// Network widths. lx is the observed feature width, lz the latent width.
struct Model1Dims {
  std::size_t lx = 0;
  std::size_t lz = 50;
  std::vector<std::size_t> encoder_hidden{10, 10};
  std::vector<std::size_t> decoder_hidden{10, 10};
  std::vector<std::size_t> gmm_hidden{10};
  std::vector<std::size_t> classifier_hidden{70};
};

/// Generative model with a two-component Gaussian-mixture latent prior.
///   p(y) = Bernoulli, p(z|y) from gmm_net at the one-hot code for y,
///   p(x|z) from decoder_net; inference nets q(z|x,y) and q(y|x).
/// prior_pi is P(y = 0) and stays fixed during training.
struct Model1Params {
  std::size_t lx = 0, lz = 0;
  double prior_pi = 0.5;
  nn::MlpParams gmm_net;         // one-hot y (2) -> heads mu, var (lz each)
  nn::MlpParams decoder_net;     // z (lz)        -> heads mu, var (lx each)
  nn::MlpParams encoder_net;     // x ++ one-hot y -> heads mu, var (lz each)
  nn::MlpParams classifier_net;  // x             -> head probs (2, softmax)

  void validate() const;
};

Model1Params init_model1(const Model1Dims& dims, double prior_pi, Rng& rng);

/// Monte Carlo draws for the reparameterized latent: n_draws vectors of
/// standard normals, each of length lz.
using EpsDraws = std::vector<std::vector<double>>;

/// Evidence lower bound for a labeled application:
///   -KL(q(z|x,y) || p(z|y)) + log p(y) + mean_draws log N(x | decoder(z)).
/// Only the mixture component selected by y enters.
ElboBreakdown elbo_accept(const Model1Params& p, std::span<const double> x, int y,
                          const EpsDraws& eps);

/// Bound for an unlabeled application: the label is enumerated under
/// q(y|x), giving
///   sum_y q(y|x) * [elbo_accept(x, y) - log q(y|x)]
/// with the same eps draws reused for both label candidates.
ElboBreakdown elbo_reject(const Model1Params& p, std::span<const double> x,
                          const EpsDraws& eps);

struct Model1Grads {
  nn::MlpParams gmm, decoder, encoder, classifier;
};

struct TrainConfig1 {
  double learning_rate = 1e-4;
  double beta = 1.1;              // classifier weight scale; alpha = beta*(n+m)/n
  std::size_t n_draws = 1;        // Monte Carlo draws per bound
  std::size_t epochs = 50;
  std::size_t batch_size = 128;
  std::size_t pretrain_epochs = 0;
  bool strict_alternation = false;  // labeled and unlabeled steps separately
  double prior_pi = 0.5;
  std::uint64_t seed = 0;
};

struct Objective1Out {
  double loss = 0.0;          // minimization target
  double supervised = 0.0;    // mean negative labeled bound
  double classifier = 0.0;    // mean label cross entropy
  double unsupervised = 0.0;  // mean negative unlabeled bound
  double alpha = 0.0;
  Model1Grads grads;          // populated when want_grads
};

/// One optimization step's loss:
///   mean_i -elbo_accept(x_i, y_i) + alpha * mean_i -log q(y_i|x_i)
///   + mean_j -elbo_reject(x_j)
/// with alpha = beta * (n_total + m_total) / n_total from the global
/// dataset sizes, not the batch sizes. All sampling noise comes from
/// noise_seed alone, so re-evaluating at perturbed parameters reuses the
/// same draws (as the finite-difference tests require). Either batch may
/// be empty; its terms drop out.
Objective1Out objective1(const Model1Params& p, const Matrix& x_labeled,
                         const std::vector<int>& y_labeled, const Matrix& x_unlabeled,
                         const TrainConfig1& cfg, std::size_t n_total, std::size_t m_total,
                         std::uint64_t noise_seed, bool want_grads = true);

/// Standard variational-autoencoder warm start for the encoder/decoder
/// pair: N(0, I) prior, label input to the encoder held at zero. Returns
/// the per-epoch mean negative bound.
std::vector<double> pretrain_vae(Model1Params& p, const Matrix& x, const TrainConfig1& cfg);

struct TrainResult {
  Model1Params params;
  std::vector<double> loss_trace;  // per-epoch mean step loss
};

/// Full training run on standardized features. Each step takes one labeled
/// and one unlabeled batch jointly (or alternates when
/// cfg.strict_alternation). Throws on divergence, naming the epoch/step.
TrainResult train1(const data::LabeledDataset& labeled, const data::UnlabeledDataset& unlabeled,
                   const Model1Dims& dims, const TrainConfig1& cfg);

/// P(y = 1 | x) from the classifier head, one value per row.
std::vector<double> predict_proba1(const Model1Params& p, const Matrix& x);

}  // namespace ri::model1
