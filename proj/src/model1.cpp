#include "ri/model1.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "internal/batching.hpp"
#include "internal/gauss_branch.hpp"
#include "ri/dists.hpp"

namespace ri::model1 {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

std::vector<nn::HeadSpec> gauss_heads(std::size_t d) {
  return {{"mu", d, nn::Activation::Linear}, {"var", d, nn::Activation::ExpLinear}};
}

std::vector<std::size_t> with_input(std::size_t in, const std::vector<std::size_t>& hidden) {
  std::vector<std::size_t> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  return dims;
}

void check_label(int y) {
  if (y != 0 && y != 1) throw std::invalid_argument("label must be 0 or 1");
}

void check_eps(const EpsDraws& eps, std::size_t lz) {
  if (eps.empty()) throw std::invalid_argument("at least one eps draw required");
  for (const auto& e : eps)
    if (e.size() != lz) throw std::invalid_argument("eps draw has wrong dimension");
}

dists::DiagGaussian row_gaussian(const Matrix& mu, const Matrix& var, std::size_t i) {
  dists::DiagGaussian g;
  g.mean.assign(mu.row(i), mu.row(i) + mu.cols);
  g.var.assign(var.row(i), var.row(i) + var.cols);
  return g;
}

internal::BranchOut run_branch(const Model1Params& p, const Matrix& x, const std::vector<int>& y,
                               const std::vector<Matrix>& eps, const std::vector<double>& w,
                               Model1Grads* g) {
  internal::BranchGrads bg;
  if (g) {
    bg.encoder = &g->encoder;
    bg.gmm = &g->gmm;
    bg.decoder = &g->decoder;
  }
  return internal::accept_branch(p.encoder_net, p.gmm_net, p.decoder_net,
                                 /*decoder_sees_label=*/false, p.lx, p.lz, x, y, eps, w,
                                 g ? &bg : nullptr);
}

Model1Grads zero_grads(const Model1Params& p) {
  return {nn::zeros_like(p.gmm_net), nn::zeros_like(p.decoder_net), nn::zeros_like(p.encoder_net),
          nn::zeros_like(p.classifier_net)};
}

// Mean label cross entropy -log q(y|x); the gradient scaled by grad_scale
// goes into g->classifier.
double classifier_ce(const Model1Params& p, const Matrix& x, const std::vector<int>& y,
                     double grad_scale, Model1Grads* g) {
  const std::size_t B = x.rows;
  nn::GradientTape tape;
  const auto cls = nn::mlp_forward(p.classifier_net, x, g ? &tape : nullptr);
  const Matrix& probs = cls.values[0];
  double ce = 0.0;
  Matrix gp;
  if (g) gp = Matrix(B, 2);
  for (std::size_t i = 0; i < B; ++i) {
    const std::size_t c = y[i] == 0 ? 0 : 1;
    const double pt = probs(i, c);
    ce += -dists::log_prob(pt);
    if (g && pt > dists::kProbClampLo) gp(i, c) = -grad_scale / pt;
  }
  if (g) nn::accumulate(g->classifier, nn::mlp_backward(p.classifier_net, tape, {gp}));
  return ce / static_cast<double>(B);
}

// Mean negative unlabeled bound over the batch: the label is enumerated
// under q(y|x) and both candidate branches share the same eps draws.
double reject_term(const Model1Params& p, const Matrix& xu, const std::vector<Matrix>& eps,
                   Model1Grads* g) {
  const std::size_t B = xu.rows;
  const double scale = 1.0 / static_cast<double>(B);
  nn::GradientTape tape;
  const auto cls = nn::mlp_forward(p.classifier_net, xu, g ? &tape : nullptr);
  const Matrix& probs = cls.values[0];

  std::vector<double> w[2];
  for (int y = 0; y < 2; ++y) {
    w[y].resize(B);
    for (std::size_t i = 0; i < B; ++i) w[y][i] = scale * probs(i, static_cast<std::size_t>(y));
  }
  const internal::BranchOut b0 = run_branch(p, xu, std::vector<int>(B, 0), eps, w[0], g);
  const internal::BranchOut b1 = run_branch(p, xu, std::vector<int>(B, 1), eps, w[1], g);

  const double lp[2] = {std::log(p.prior_pi), std::log(1.0 - p.prior_pi)};
  Matrix gp;
  if (g) gp = Matrix(B, 2);
  double loss = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    double total = 0.0;
    for (int y = 0; y < 2; ++y) {
      const double piy = probs(i, static_cast<std::size_t>(y));
      const double bnd = (y == 0 ? b0 : b1).bound[i];
      const double logc = dists::log_prob(piy);
      if (piy != 0.0) total += piy * (bnd + lp[y] - logc);
      if (g) {
        const bool unclamped = piy > dists::kProbClampLo;
        gp(i, static_cast<std::size_t>(y)) =
            -scale * (bnd + lp[y] - logc - (unclamped ? 1.0 : 0.0));
      }
    }
    loss += -scale * total;
  }
  if (g) nn::accumulate(g->classifier, nn::mlp_backward(p.classifier_net, tape, {gp}));
  return loss;
}

}  // namespace

void Model1Params::validate() const {
  gmm_net.validate();
  decoder_net.validate();
  encoder_net.validate();
  classifier_net.validate();
  if (!(prior_pi > 0.0 && prior_pi < 1.0))
    throw std::invalid_argument("Model1Params: prior_pi must lie in (0, 1)");
  if (lx == 0 || lz == 0) throw std::invalid_argument("Model1Params: lx and lz must be positive");
  auto expect = [](const nn::MlpParams& net, std::size_t in, const char* head, std::size_t out,
                   const char* what) {
    if (net.input_dim() != in)
      throw std::invalid_argument(std::string("Model1Params: ") + what + " input width mismatch");
    const int h = net.head_index(head);
    if (h < 0 || net.heads[static_cast<std::size_t>(h)].dim != out)
      throw std::invalid_argument(std::string("Model1Params: ") + what + " head mismatch");
  };
  expect(gmm_net, 2, "mu", lz, "gmm_net");
  expect(gmm_net, 2, "var", lz, "gmm_net");
  expect(decoder_net, lz, "mu", lx, "decoder_net");
  expect(decoder_net, lz, "var", lx, "decoder_net");
  expect(encoder_net, lx + 2, "mu", lz, "encoder_net");
  expect(encoder_net, lx + 2, "var", lz, "encoder_net");
  expect(classifier_net, lx, "probs", 2, "classifier_net");
}

Model1Params init_model1(const Model1Dims& dims, double prior_pi, Rng& rng) {
  if (dims.lx == 0 || dims.lz == 0)
    throw std::invalid_argument("init_model1: lx and lz must be positive");
  Model1Params p;
  p.lx = dims.lx;
  p.lz = dims.lz;
  p.prior_pi = prior_pi;
  p.gmm_net = nn::glorot_init(with_input(2, dims.gmm_hidden), gauss_heads(dims.lz), rng);
  p.decoder_net =
      nn::glorot_init(with_input(dims.lz, dims.decoder_hidden), gauss_heads(dims.lx), rng);
  p.encoder_net =
      nn::glorot_init(with_input(dims.lx + 2, dims.encoder_hidden), gauss_heads(dims.lz), rng);
  p.classifier_net = nn::glorot_init(with_input(dims.lx, dims.classifier_hidden),
                                     {{"probs", 2, nn::Activation::Softmax}}, rng);
  p.validate();
  return p;
}

ElboBreakdown elbo_accept(const Model1Params& p, std::span<const double> x, int y,
                          const EpsDraws& eps) {
  check_label(y);
  check_eps(eps, p.lz);
  if (x.size() != p.lx) throw std::invalid_argument("elbo_accept: feature width mismatch");

  Matrix xrow(1, p.lx);
  std::copy(x.begin(), x.end(), xrow.data.begin());
  const Matrix enc_in = internal::onehot_append(xrow, {y});
  const auto enc = nn::mlp_forward(p.encoder_net, enc_in);
  const dists::DiagGaussian q = row_gaussian(enc.values[0], enc.values[1], 0);

  const auto pr = nn::mlp_forward(p.gmm_net, internal::onehot_row(y));
  const dists::DiagGaussian prior = row_gaussian(pr.values[0], pr.values[1], 0);

  ElboBreakdown b;
  b.kl_to_prior = -dists::kl_diag_gauss(q, prior);
  b.log_prior_label = y == 0 ? std::log(p.prior_pi) : std::log(1.0 - p.prior_pi);
  double acc = 0.0;
  for (const auto& e : eps) {
    const std::vector<double> z = dists::reparam_sample(q, e);
    Matrix zrow(1, p.lz);
    std::copy(z.begin(), z.end(), zrow.data.begin());
    const auto dec = nn::mlp_forward(p.decoder_net, zrow);
    acc += dists::gauss_logpdf(row_gaussian(dec.values[0], dec.values[1], 0), x);
  }
  b.reconstruction = acc / static_cast<double>(eps.size());
  b.total = b.sum_of_terms();
  return b;
}

ElboBreakdown elbo_reject(const Model1Params& p, std::span<const double> x, const EpsDraws& eps) {
  if (x.size() != p.lx) throw std::invalid_argument("elbo_reject: feature width mismatch");
  Matrix xrow(1, p.lx);
  std::copy(x.begin(), x.end(), xrow.data.begin());
  const auto cls = nn::mlp_forward(p.classifier_net, xrow);
  const Matrix& probs = cls.values[0];

  ElboBreakdown b;
  for (int y = 0; y < 2; ++y) {
    const double piy = probs(0, static_cast<std::size_t>(y));
    if (piy != 0.0) {
      const ElboBreakdown acc = elbo_accept(p, x, y, eps);
      b.kl_to_prior += piy * acc.kl_to_prior;
      b.reconstruction += piy * acc.reconstruction;
      b.log_prior_label += piy * acc.log_prior_label;
      b.classifier_term += -piy * dists::log_prob(piy);
    }
  }
  b.total = b.sum_of_terms();
  return b;
}

Objective1Out objective1(const Model1Params& p, const Matrix& x_labeled,
                         const std::vector<int>& y_labeled, const Matrix& x_unlabeled,
                         const TrainConfig1& cfg, std::size_t n_total, std::size_t m_total,
                         std::uint64_t noise_seed, bool want_grads) {
  if (n_total == 0) throw std::invalid_argument("objective1: n_total must be positive");
  if (x_labeled.rows != y_labeled.size())
    throw std::invalid_argument("objective1: labeled batch size mismatch");
  if (cfg.n_draws == 0) throw std::invalid_argument("objective1: n_draws must be positive");
  for (int y : y_labeled) check_label(y);

  const std::size_t bl = x_labeled.rows, bu = x_unlabeled.rows;
  Rng rng(noise_seed);
  std::vector<Matrix> eps_l, eps_u;
  for (std::size_t l = 0; l < cfg.n_draws; ++l) eps_l.push_back(rng.normal_matrix(bl, p.lz));
  for (std::size_t l = 0; l < cfg.n_draws; ++l) eps_u.push_back(rng.normal_matrix(bu, p.lz));

  Objective1Out out;
  out.alpha = cfg.beta * static_cast<double>(n_total + m_total) / static_cast<double>(n_total);
  if (want_grads) out.grads = zero_grads(p);
  Model1Grads* g = want_grads ? &out.grads : nullptr;

  if (bl > 0) {
    const std::vector<double> w(bl, 1.0 / static_cast<double>(bl));
    const internal::BranchOut b = run_branch(p, x_labeled, y_labeled, eps_l, w, g);
    double sup = 0.0;
    for (std::size_t i = 0; i < bl; ++i) {
      const double lp = y_labeled[i] == 0 ? std::log(p.prior_pi) : std::log(1.0 - p.prior_pi);
      sup += -(b.bound[i] + lp);
    }
    out.supervised = sup / static_cast<double>(bl);
    out.classifier =
        classifier_ce(p, x_labeled, y_labeled, out.alpha / static_cast<double>(bl), g);
  }
  if (bu > 0) out.unsupervised = reject_term(p, x_unlabeled, eps_u, g);

  out.loss = out.supervised + out.alpha * out.classifier + out.unsupervised;
  return out;
}

std::vector<double> pretrain_vae(Model1Params& p, const Matrix& x, const TrainConfig1& cfg) {
  if (x.cols != p.lx) throw std::invalid_argument("pretrain_vae: feature width mismatch");
  std::vector<double> trace;
  if (cfg.pretrain_epochs == 0 || x.rows == 0) return trace;

  const std::size_t lz = p.lz;
  nn::AdamConfig acfg;
  acfg.lr = cfg.learning_rate;
  nn::AdamState enc_adam = nn::adam_init(p.encoder_net, acfg);
  nn::AdamState dec_adam = nn::adam_init(p.decoder_net, acfg);
  internal::BatchCycler cycler(x.rows, mix_seed(cfg.seed, 0x5e1));
  Rng noise(mix_seed(cfg.seed, 0x5e2));
  const std::size_t batch = std::min<std::size_t>(std::max<std::size_t>(cfg.batch_size, 1), x.rows);
  const std::size_t steps = (x.rows + batch - 1) / batch;

  for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (std::size_t step = 0; step < steps; ++step) {
      const Matrix xb = take_rows(x, cycler.next(batch));
      const std::size_t B = xb.rows;
      const double inv_b = 1.0 / static_cast<double>(B);

      // The encoder sees the features with both label slots zeroed.
      Matrix enc_in(B, p.lx + 2);
      for (std::size_t i = 0; i < B; ++i) std::copy(xb.row(i), xb.row(i) + p.lx, enc_in.row(i));
      nn::GradientTape enc_tape;
      const auto enc = nn::mlp_forward(p.encoder_net, enc_in, &enc_tape);
      const Matrix& mq = enc.values[0];
      const Matrix& vq = enc.values[1];

      double loss = 0.0;
      Matrix dmq(B, lz), dvq(B, lz);
      for (std::size_t i = 0; i < B * lz; ++i) {
        const double m = mq.data[i], v = vq.data[i];
        loss += inv_b * 0.5 * (v + m * m - 1.0 - std::log(v));
        dmq.data[i] = inv_b * m;
        dvq.data[i] = inv_b * 0.5 * (1.0 - 1.0 / v);
      }

      nn::MlpParams dec_grads = nn::zeros_like(p.decoder_net);
      const double inv_l = 1.0 / static_cast<double>(cfg.n_draws);
      for (std::size_t l = 0; l < cfg.n_draws; ++l) {
        const Matrix eps = noise.normal_matrix(B, lz);
        Matrix z(B, lz);
        for (std::size_t i = 0; i < B * lz; ++i)
          z.data[i] = mq.data[i] + std::sqrt(vq.data[i]) * eps.data[i];
        nn::GradientTape dec_tape;
        const auto dec = nn::mlp_forward(p.decoder_net, z, &dec_tape);
        const Matrix& mx = dec.values[0];
        const Matrix& vx = dec.values[1];
        Matrix gmx(B, p.lx), gvx(B, p.lx);
        for (std::size_t i = 0; i < B; ++i) {
          for (std::size_t d = 0; d < p.lx; ++d) {
            const double v = vx(i, d);
            const double diff = xb(i, d) - mx(i, d);
            loss += -inv_b * inv_l * (-0.5 * (kLog2Pi + std::log(v)) - diff * diff / (2.0 * v));
            gmx(i, d) = -inv_b * inv_l * diff / v;
            gvx(i, d) = -inv_b * inv_l * (-0.5 / v + diff * diff / (2.0 * v * v));
          }
        }
        Matrix dz;
        nn::accumulate(dec_grads, nn::mlp_backward(p.decoder_net, dec_tape, {gmx, gvx}, &dz));
        for (std::size_t i = 0; i < B * lz; ++i) dmq.data[i] += dz.data[i];
        for (std::size_t i = 0; i < B; ++i)
          for (std::size_t j = 0; j < lz; ++j)
            dvq(i, j) += dz(i, j) * eps(i, j) / (2.0 * std::sqrt(vq(i, j)));
      }
      nn::MlpParams enc_grads = nn::mlp_backward(p.encoder_net, enc_tape, {dmq, dvq});

      if (!std::isfinite(loss))
        throw std::runtime_error("pretrain_vae: non-finite loss at epoch " +
                                 std::to_string(epoch) + " step " + std::to_string(step));
      nn::adam_step(enc_adam, p.encoder_net, enc_grads);
      nn::adam_step(dec_adam, p.decoder_net, dec_grads);
      epoch_loss += loss;
    }
    trace.push_back(epoch_loss / static_cast<double>(steps));
  }
  return trace;
}

TrainResult train1(const data::LabeledDataset& labeled, const data::UnlabeledDataset& unlabeled,
                   const Model1Dims& dims, const TrainConfig1& cfg) {
  if (labeled.size() == 0) throw std::invalid_argument("train1: labeled set is empty");
  if (labeled.labels.size() != labeled.size())
    throw std::invalid_argument("train1: label count mismatch");
  Model1Dims d = dims;
  if (d.lx == 0) d.lx = labeled.features.cols;
  if (d.lx != labeled.features.cols)
    throw std::invalid_argument("train1: dims.lx does not match the labeled features");
  if (unlabeled.size() > 0 && unlabeled.features.cols != d.lx)
    throw std::invalid_argument("train1: unlabeled feature width mismatch");

  Rng init_rng(mix_seed(cfg.seed, 0x11));
  TrainResult res{init_model1(d, cfg.prior_pi, init_rng), {}};
  Model1Params& p = res.params;

  const std::size_t n = labeled.size(), m = unlabeled.size();
  if (cfg.pretrain_epochs > 0) {
    Matrix all(n + m, d.lx);
    for (std::size_t i = 0; i < n; ++i)
      std::copy(labeled.features.row(i), labeled.features.row(i) + d.lx, all.row(i));
    for (std::size_t i = 0; i < m; ++i)
      std::copy(unlabeled.features.row(i), unlabeled.features.row(i) + d.lx, all.row(n + i));
    pretrain_vae(p, all, cfg);
  }

  nn::AdamConfig acfg;
  acfg.lr = cfg.learning_rate;
  nn::AdamState adam_gmm = nn::adam_init(p.gmm_net, acfg);
  nn::AdamState adam_dec = nn::adam_init(p.decoder_net, acfg);
  nn::AdamState adam_enc = nn::adam_init(p.encoder_net, acfg);
  nn::AdamState adam_cls = nn::adam_init(p.classifier_net, acfg);
  auto apply = [&](const Model1Grads& g) {
    nn::adam_step(adam_gmm, p.gmm_net, g.gmm);
    nn::adam_step(adam_dec, p.decoder_net, g.decoder);
    nn::adam_step(adam_enc, p.encoder_net, g.encoder);
    nn::adam_step(adam_cls, p.classifier_net, g.classifier);
  };

  const std::size_t batch = std::max<std::size_t>(cfg.batch_size, 1);
  internal::BatchCycler lab_cycler(n, mix_seed(cfg.seed, 0x21));
  internal::BatchCycler unl_cycler(std::max<std::size_t>(m, 1), mix_seed(cfg.seed, 0x22));
  const std::size_t bl = std::min(batch, n);
  const std::size_t bu = std::min(batch, m);
  const std::size_t steps = (std::max(n, m) + batch - 1) / batch;
  const Matrix empty;

  auto guarded = [&](std::size_t epoch, std::size_t step, const Objective1Out& o) {
    if (!std::isfinite(o.loss))
      throw std::runtime_error("train1: diverged at epoch " + std::to_string(epoch) + " step " +
                               std::to_string(step));
    apply(o.grads);
    return o.loss;
  };

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0, denom = 0.0;
    for (std::size_t step = 0; step < steps; ++step) {
      const auto lab_idx = lab_cycler.next(bl);
      const Matrix xl = take_rows(labeled.features, lab_idx);
      std::vector<int> yl(lab_idx.size());
      for (std::size_t i = 0; i < lab_idx.size(); ++i) yl[i] = labeled.labels[lab_idx[i]];
      const Matrix xu = bu == 0 ? empty : take_rows(unlabeled.features, unl_cycler.next(bu));
      const std::uint64_t noise_seed = mix_seed(cfg.seed, epoch * steps + step, 0x33);

      if (!cfg.strict_alternation) {
        epoch_loss += guarded(epoch, step, objective1(p, xl, yl, xu, cfg, n, m, noise_seed));
        denom += 1.0;
      } else {
        epoch_loss += guarded(epoch, step, objective1(p, xl, yl, empty, cfg, n, m, noise_seed));
        denom += 1.0;
        if (bu > 0) {
          epoch_loss += guarded(epoch, step,
                                objective1(p, empty, {}, xu, cfg, n, m, mix_seed(noise_seed, 0x34)));
          denom += 1.0;
        }
      }
    }
    res.loss_trace.push_back(epoch_loss / denom);
  }
  return res;
}

std::vector<double> predict_proba1(const Model1Params& p, const Matrix& x) {
  if (x.cols != p.lx) throw std::invalid_argument("predict_proba1: feature width mismatch");
  const auto cls = nn::mlp_forward(p.classifier_net, x);
  const Matrix& probs = cls.values[0];
  std::vector<double> out(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) out[i] = probs(i, 1);
  return out;
}

}  // namespace ri::model1
