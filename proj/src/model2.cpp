#include "ri/model2.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "internal/batching.hpp"
#include "internal/gauss_branch.hpp"
#include "ri/dists.hpp"

namespace ri::model2 {

namespace {

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

void check_eps(const EpsDraws& eps, std::size_t d, const char* what) {
  if (eps.empty()) throw std::invalid_argument(std::string(what) + ": at least one draw required");
  for (const auto& e : eps)
    if (e.size() != d) throw std::invalid_argument(std::string(what) + ": draw dimension mismatch");
}

dists::DiagGaussian row_gaussian(const Matrix& mu, const Matrix& var, std::size_t i) {
  dists::DiagGaussian g;
  g.mean.assign(mu.row(i), mu.row(i) + mu.cols);
  g.var.assign(var.row(i), var.row(i) + var.cols);
  return g;
}

Matrix append_cols(const Matrix& x, const Matrix& a) {
  Matrix out(x.rows, x.cols + a.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double* dst = out.row(i);
    const double* xs = x.row(i);
    for (std::size_t j = 0; j < x.cols; ++j) dst[j] = xs[j];
    const double* as = a.row(i);
    for (std::size_t j = 0; j < a.cols; ++j) dst[x.cols + j] = as[j];
  }
  return out;
}

Model2Grads zero_grads(const Model2Params& p) {
  return {nn::zeros_like(p.gmm_net), nn::zeros_like(p.decoder_net),
          nn::zeros_like(p.encoder_z_net), nn::zeros_like(p.encoder_a_net),
          nn::zeros_like(p.classifier_net)};
}

internal::BranchOut run_branch(const Model2Params& p, const Matrix& x, const std::vector<int>& y,
                               const std::vector<Matrix>& eps, const std::vector<double>& w,
                               Model2Grads* g) {
  internal::BranchGrads bg;
  if (g) {
    bg.encoder = &g->encoder_z;
    bg.gmm = &g->gmm;
    bg.decoder = &g->decoder;
  }
  return internal::accept_branch(p.encoder_z_net, p.gmm_net, p.decoder_net,
                                 /*decoder_sees_label=*/true, p.lx, p.lz, x, y, eps, w,
                                 g ? &bg : nullptr);
}

// Shared handling of the auxiliary posterior q(a|x) for one batch: a single
// encoder forward whose head gradients collect contributions from the
// closed-form KL(q(a|x) || N(0,I)) and from every sampled-a consumer, then
// one backward at the end.
struct ATerm {
  nn::GradientTape tape;
  Matrix ma, va;    // B x la
  Matrix dma, dva;  // head gradient accumulators (only when tracking grads)
  double kl_mean = 0.0;
  bool grads = false;

  ATerm(const Model2Params& p, const Matrix& x, double kl_scale, bool want_grads)
      : grads(want_grads) {
    const auto enc = nn::mlp_forward(p.encoder_a_net, x, grads ? &tape : nullptr);
    ma = enc.values[0];
    va = enc.values[1];
    const std::size_t B = x.rows;
    if (grads) {
      dma = Matrix(B, p.la);
      dva = Matrix(B, p.la);
    }
    double kl = 0.0;
    for (std::size_t i = 0; i < ma.size(); ++i) {
      const double m = ma.data[i], v = va.data[i];
      kl += 0.5 * (v + m * m - 1.0 - std::log(v));
      if (grads) {
        dma.data[i] = kl_scale * m;
        dva.data[i] = kl_scale * 0.5 * (1.0 - 1.0 / v);
      }
    }
    kl_mean = kl / static_cast<double>(B);
  }

  Matrix sample(const Matrix& eps) const {
    Matrix a(ma.rows, ma.cols);
    for (std::size_t i = 0; i < a.size(); ++i)
      a.data[i] = ma.data[i] + std::sqrt(va.data[i]) * eps.data[i];
    return a;
  }

  // Registers dLoss/da from a consumer of the draw made with eps.
  void add_sample_grad(const Matrix& da, const Matrix& eps) {
    for (std::size_t i = 0; i < da.size(); ++i) {
      dma.data[i] += da.data[i];
      dva.data[i] += da.data[i] * eps.data[i] / (2.0 * std::sqrt(va.data[i]));
    }
  }

  void backward(const Model2Params& p, Model2Grads& g) {
    nn::accumulate(g.encoder_a, nn::mlp_backward(p.encoder_a_net, tape, {dma, dva}));
  }
};

}  // namespace

void Model2Params::validate() const {
  gmm_net.validate();
  decoder_net.validate();
  encoder_z_net.validate();
  encoder_a_net.validate();
  classifier_net.validate();
  if (!(prior_pi > 0.0 && prior_pi < 1.0))
    throw std::invalid_argument("Model2Params: prior_pi must lie in (0, 1)");
  if (lx == 0 || lz == 0) throw std::invalid_argument("Model2Params: lx and lz must be positive");
  if (la == 0) throw std::invalid_argument("Model2Params: the auxiliary width la must be positive");
  auto expect = [](const nn::MlpParams& net, std::size_t in, const char* head, std::size_t out,
                   const char* what) {
    if (net.input_dim() != in)
      throw std::invalid_argument(std::string("Model2Params: ") + what + " input width mismatch");
    const int h = net.head_index(head);
    if (h < 0 || net.heads[static_cast<std::size_t>(h)].dim != out)
      throw std::invalid_argument(std::string("Model2Params: ") + what + " head mismatch");
  };
  expect(gmm_net, 2, "mu", lz, "gmm_net");
  expect(decoder_net, lz + 2, "mu", lx, "decoder_net");
  expect(encoder_z_net, lx + 2, "mu", lz, "encoder_z_net");
  expect(encoder_a_net, lx, "mu", la, "encoder_a_net");
  expect(classifier_net, lx + la, "probs", 2, "classifier_net");
}

Model2Params init_model2(const Model2Dims& dims, double prior_pi, Rng& rng) {
  if (dims.lx == 0 || dims.lz == 0)
    throw std::invalid_argument("init_model2: lx and lz must be positive");
  if (dims.la == 0)
    throw std::invalid_argument("init_model2: the auxiliary width la must be positive");
  Model2Params p;
  p.lx = dims.lx;
  p.lz = dims.lz;
  p.la = dims.la;
  p.prior_pi = prior_pi;
  p.gmm_net = nn::glorot_init(with_input(2, dims.gmm_hidden), gauss_heads(dims.lz), rng);
  p.decoder_net =
      nn::glorot_init(with_input(dims.lz + 2, dims.decoder_hidden), gauss_heads(dims.lx), rng);
  p.encoder_z_net =
      nn::glorot_init(with_input(dims.lx + 2, dims.encoder_z_hidden), gauss_heads(dims.lz), rng);
  p.encoder_a_net =
      nn::glorot_init(with_input(dims.lx, dims.encoder_a_hidden), gauss_heads(dims.la), rng);
  p.classifier_net = nn::glorot_init(with_input(dims.lx + dims.la, dims.classifier_hidden),
                                     {{"probs", 2, nn::Activation::Softmax}}, rng);
  p.validate();
  return p;
}

ElboBreakdown elbo_accept2(const Model2Params& p, std::span<const double> x, int y,
                           const EpsDraws& eps_z, const EpsDraws& eps_a) {
  check_label(y);
  check_eps(eps_z, p.lz, "eps_z");
  if (!eps_a.empty()) check_eps(eps_a, p.la, "eps_a");
  if (x.size() != p.lx) throw std::invalid_argument("elbo_accept2: feature width mismatch");

  Matrix xrow(1, p.lx);
  std::copy(x.begin(), x.end(), xrow.data.begin());
  const auto enc = nn::mlp_forward(p.encoder_z_net, internal::onehot_append(xrow, {y}));
  const dists::DiagGaussian q = row_gaussian(enc.values[0], enc.values[1], 0);
  const auto pr = nn::mlp_forward(p.gmm_net, internal::onehot_row(y));
  const dists::DiagGaussian prior = row_gaussian(pr.values[0], pr.values[1], 0);
  const auto enc_a = nn::mlp_forward(p.encoder_a_net, xrow);
  const dists::DiagGaussian qa = row_gaussian(enc_a.values[0], enc_a.values[1], 0);

  ElboBreakdown b;
  b.kl_to_prior = -dists::kl_diag_gauss(q, prior);
  b.kl_aux = -dists::kl_gauss_std(qa);
  b.log_prior_label = y == 0 ? std::log(p.prior_pi) : std::log(1.0 - p.prior_pi);
  double acc = 0.0;
  for (const auto& e : eps_z) {
    const std::vector<double> z = dists::reparam_sample(q, e);
    Matrix zrow(1, p.lz);
    std::copy(z.begin(), z.end(), zrow.data.begin());
    const auto dec = nn::mlp_forward(p.decoder_net, internal::onehot_append(zrow, {y}));
    acc += dists::gauss_logpdf(row_gaussian(dec.values[0], dec.values[1], 0), x);
  }
  b.reconstruction = acc / static_cast<double>(eps_z.size());
  b.total = b.sum_of_terms();
  return b;
}

ElboBreakdown elbo_reject2(const Model2Params& p, std::span<const double> x,
                           const EpsDraws& eps_z, const EpsDraws& eps_a) {
  check_eps(eps_z, p.lz, "eps_z");
  check_eps(eps_a, p.la, "eps_a");
  if (x.size() != p.lx) throw std::invalid_argument("elbo_reject2: feature width mismatch");

  Matrix xrow(1, p.lx);
  std::copy(x.begin(), x.end(), xrow.data.begin());
  const auto enc_a = nn::mlp_forward(p.encoder_a_net, xrow);
  const dists::DiagGaussian qa = row_gaussian(enc_a.values[0], enc_a.values[1], 0);

  // Label-conditional pieces are independent of a, so evaluate them once
  // and weight them by the draw-averaged posterior.
  ElboBreakdown acc[2];
  for (int y = 0; y < 2; ++y) acc[y] = elbo_accept2(p, x, y, eps_z, eps_a);

  const double inv_la = 1.0 / static_cast<double>(eps_a.size());
  double wbar[2] = {0.0, 0.0};
  double entropy = 0.0;
  for (const auto& ea : eps_a) {
    const std::vector<double> a = dists::reparam_sample(qa, ea);
    Matrix cin(1, p.lx + p.la);
    std::copy(x.begin(), x.end(), cin.data.begin());
    std::copy(a.begin(), a.end(), cin.data.begin() + static_cast<std::ptrdiff_t>(p.lx));
    const auto cls = nn::mlp_forward(p.classifier_net, cin);
    for (int y = 0; y < 2; ++y) {
      const double piy = cls.values[0](0, static_cast<std::size_t>(y));
      wbar[y] += inv_la * piy;
      if (piy != 0.0) entropy += inv_la * -piy * dists::log_prob(piy);
    }
  }

  ElboBreakdown b;
  for (int y = 0; y < 2; ++y) {
    b.kl_to_prior += wbar[y] * acc[y].kl_to_prior;
    b.reconstruction += wbar[y] * acc[y].reconstruction;
    b.log_prior_label += wbar[y] * acc[y].log_prior_label;
  }
  b.kl_aux = acc[0].kl_aux;
  b.classifier_term = entropy;
  b.total = b.sum_of_terms();
  return b;
}

namespace {

// Mean of -log q(y|x,a) over the labeled batch and the a draws, with the
// classifier gradient scaled by grad_scale and the chain back into
// q(a|x) registered on the ATerm.
double classifier_ce2(const Model2Params& p, const Matrix& x, const std::vector<int>& y,
                      const std::vector<Matrix>& eps_a, ATerm& at, double grad_scale,
                      Model2Grads* g) {
  const std::size_t B = x.rows;
  const double inv_la = 1.0 / static_cast<double>(eps_a.size());
  double ce = 0.0;
  for (const Matrix& eps : eps_a) {
    const Matrix a = at.sample(eps);
    const Matrix cin = append_cols(x, a);
    nn::GradientTape tape;
    const auto cls = nn::mlp_forward(p.classifier_net, cin, g ? &tape : nullptr);
    const Matrix& probs = cls.values[0];
    Matrix gp;
    if (g) gp = Matrix(B, 2);
    for (std::size_t i = 0; i < B; ++i) {
      const std::size_t c = y[i] == 0 ? 0 : 1;
      const double pt = probs(i, c);
      ce += inv_la * -dists::log_prob(pt);
      if (g && pt > dists::kProbClampLo) gp(i, c) = -grad_scale * inv_la / pt;
    }
    if (g) {
      Matrix din;
      nn::accumulate(g->classifier, nn::mlp_backward(p.classifier_net, tape, {gp}, &din));
      Matrix da(B, p.la);
      for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < p.la; ++j) da(i, j) = din(i, p.lx + j);
      at.add_sample_grad(da, eps);
    }
  }
  return ce / static_cast<double>(B);
}

// Mean negative unsupervised bound over the batch, gradients included.
double reject_term2(const Model2Params& p, const Matrix& xu, const std::vector<Matrix>& eps_z,
                    const std::vector<Matrix>& eps_a, ATerm& at, Model2Grads* g) {
  const std::size_t B = xu.rows;
  const double scale = 1.0 / static_cast<double>(B);
  const double inv_la = 1.0 / static_cast<double>(eps_a.size());

  // Per-draw posteriors first: the branch weights average them.
  struct DrawEval {
    Matrix a;
    nn::GradientTape tape;
    Matrix probs;
  };
  std::vector<DrawEval> draws(eps_a.size());
  for (std::size_t l = 0; l < eps_a.size(); ++l) {
    draws[l].a = at.sample(eps_a[l]);
    const Matrix cin = append_cols(xu, draws[l].a);
    const auto cls = nn::mlp_forward(p.classifier_net, cin, g ? &draws[l].tape : nullptr);
    draws[l].probs = cls.values[0];
  }

  std::vector<double> w[2];
  for (int y = 0; y < 2; ++y) {
    w[y].assign(B, 0.0);
    for (const auto& d : draws)
      for (std::size_t i = 0; i < B; ++i)
        w[y][i] += scale * inv_la * d.probs(i, static_cast<std::size_t>(y));
  }
  const internal::BranchOut b0 = run_branch(p, xu, std::vector<int>(B, 0), eps_z, w[0], g);
  const internal::BranchOut b1 = run_branch(p, xu, std::vector<int>(B, 1), eps_z, w[1], g);

  const double lp[2] = {std::log(p.prior_pi), std::log(1.0 - p.prior_pi)};
  double loss = 0.0;
  for (std::size_t l = 0; l < draws.size(); ++l) {
    const Matrix& probs = draws[l].probs;
    Matrix gp;
    if (g) gp = Matrix(B, 2);
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
              -scale * inv_la * (bnd + lp[y] - logc - (unclamped ? 1.0 : 0.0));
        }
      }
      loss += -scale * inv_la * total;
    }
    if (g) {
      Matrix din;
      nn::accumulate(g->classifier, nn::mlp_backward(p.classifier_net, draws[l].tape, {gp}, &din));
      Matrix da(B, p.la);
      for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < p.la; ++j) da(i, j) = din(i, p.lx + j);
      at.add_sample_grad(da, eps_a[l]);
    }
  }
  return loss + at.kl_mean;
}

}  // namespace

Objective2Out objective2(const Model2Params& p, const Matrix& x_labeled,
                         const std::vector<int>& y_labeled, const Matrix& x_unlabeled,
                         const TrainConfig2& cfg, std::size_t n_total, std::size_t m_total,
                         std::uint64_t noise_seed, bool want_grads) {
  if (n_total == 0) throw std::invalid_argument("objective2: n_total must be positive");
  if (x_labeled.rows != y_labeled.size())
    throw std::invalid_argument("objective2: labeled batch size mismatch");
  if (cfg.n_draws == 0 || cfg.n_draws_a == 0)
    throw std::invalid_argument("objective2: draw counts must be positive");
  for (int y : y_labeled) check_label(y);

  const std::size_t bl = x_labeled.rows, bu = x_unlabeled.rows;
  Rng rng(noise_seed);
  std::vector<Matrix> eps_z_l, eps_a_l, eps_z_u, eps_a_u;
  for (std::size_t l = 0; l < cfg.n_draws; ++l) eps_z_l.push_back(rng.normal_matrix(bl, p.lz));
  for (std::size_t l = 0; l < cfg.n_draws_a; ++l) eps_a_l.push_back(rng.normal_matrix(bl, p.la));
  for (std::size_t l = 0; l < cfg.n_draws; ++l) eps_z_u.push_back(rng.normal_matrix(bu, p.lz));
  for (std::size_t l = 0; l < cfg.n_draws_a; ++l) eps_a_u.push_back(rng.normal_matrix(bu, p.la));

  Objective2Out out;
  out.alpha = cfg.beta * static_cast<double>(n_total + m_total) / static_cast<double>(n_total);
  if (want_grads) out.grads = zero_grads(p);
  Model2Grads* g = want_grads ? &out.grads : nullptr;

  if (bl > 0) {
    const double inv_b = 1.0 / static_cast<double>(bl);
    const std::vector<double> w(bl, inv_b);
    const internal::BranchOut b = run_branch(p, x_labeled, y_labeled, eps_z_l, w, g);
    ATerm at(p, x_labeled, inv_b, want_grads);
    double sup = 0.0;
    for (std::size_t i = 0; i < bl; ++i) {
      const double lp = y_labeled[i] == 0 ? std::log(p.prior_pi) : std::log(1.0 - p.prior_pi);
      sup += -(b.bound[i] + lp);
    }
    out.supervised = sup * inv_b + at.kl_mean;
    out.classifier = classifier_ce2(p, x_labeled, y_labeled, eps_a_l, at, out.alpha * inv_b, g);
    if (g) at.backward(p, *g);
  }
  if (bu > 0) {
    ATerm at(p, x_unlabeled, 1.0 / static_cast<double>(bu), want_grads);
    out.unsupervised = reject_term2(p, x_unlabeled, eps_z_u, eps_a_u, at, g);
    if (g) at.backward(p, *g);
  }

  out.loss = out.supervised + out.alpha * out.classifier + out.unsupervised;
  return out;
}

TrainResult train2(const data::LabeledDataset& labeled, const data::UnlabeledDataset& unlabeled,
                   const Model2Dims& dims, const TrainConfig2& cfg) {
  if (labeled.size() == 0) throw std::invalid_argument("train2: labeled set is empty");
  if (labeled.labels.size() != labeled.size())
    throw std::invalid_argument("train2: label count mismatch");
  Model2Dims d = dims;
  if (d.lx == 0) d.lx = labeled.features.cols;
  if (d.lx != labeled.features.cols)
    throw std::invalid_argument("train2: dims.lx does not match the labeled features");
  if (unlabeled.size() > 0 && unlabeled.features.cols != d.lx)
    throw std::invalid_argument("train2: unlabeled feature width mismatch");

  Rng init_rng(mix_seed(cfg.seed, 0x12));
  TrainResult res{init_model2(d, cfg.prior_pi, init_rng), {}};
  Model2Params& p = res.params;

  const std::size_t n = labeled.size(), m = unlabeled.size();
  nn::AdamConfig acfg;
  acfg.lr = cfg.learning_rate;
  nn::AdamState adam_gmm = nn::adam_init(p.gmm_net, acfg);
  nn::AdamState adam_dec = nn::adam_init(p.decoder_net, acfg);
  nn::AdamState adam_ez = nn::adam_init(p.encoder_z_net, acfg);
  nn::AdamState adam_ea = nn::adam_init(p.encoder_a_net, acfg);
  nn::AdamState adam_cls = nn::adam_init(p.classifier_net, acfg);
  auto apply = [&](const Model2Grads& g) {
    nn::adam_step(adam_gmm, p.gmm_net, g.gmm);
    nn::adam_step(adam_dec, p.decoder_net, g.decoder);
    nn::adam_step(adam_ez, p.encoder_z_net, g.encoder_z);
    nn::adam_step(adam_ea, p.encoder_a_net, g.encoder_a);
    nn::adam_step(adam_cls, p.classifier_net, g.classifier);
  };

  const std::size_t batch = std::max<std::size_t>(cfg.batch_size, 1);
  internal::BatchCycler lab_cycler(n, mix_seed(cfg.seed, 0x23));
  internal::BatchCycler unl_cycler(std::max<std::size_t>(m, 1), mix_seed(cfg.seed, 0x24));
  const std::size_t bl = std::min(batch, n);
  const std::size_t bu = std::min(batch, m);
  const std::size_t steps = (std::max(n, m) + batch - 1) / batch;
  const std::size_t total_epochs = cfg.pretrain_epochs + cfg.epochs;
  const Matrix empty;

  auto guarded = [&](std::size_t epoch, std::size_t step, const Objective2Out& o) {
    if (!std::isfinite(o.loss))
      throw std::runtime_error("train2: diverged at epoch " + std::to_string(epoch) + " step " +
                               std::to_string(step));
    apply(o.grads);
    return o.loss;
  };

  for (std::size_t epoch = 0; epoch < total_epochs; ++epoch) {
    // Warm-up passes keep the classifier loss weight at zero.
    TrainConfig2 step_cfg = cfg;
    if (epoch < cfg.pretrain_epochs) step_cfg.beta = 0.0;
    double epoch_loss = 0.0, denom = 0.0;
    for (std::size_t step = 0; step < steps; ++step) {
      const auto lab_idx = lab_cycler.next(bl);
      const Matrix xl = take_rows(labeled.features, lab_idx);
      std::vector<int> yl(lab_idx.size());
      for (std::size_t i = 0; i < lab_idx.size(); ++i) yl[i] = labeled.labels[lab_idx[i]];
      const Matrix xu = bu == 0 ? empty : take_rows(unlabeled.features, unl_cycler.next(bu));
      const std::uint64_t noise_seed = mix_seed(cfg.seed, epoch * steps + step, 0x35);

      if (!cfg.strict_alternation) {
        epoch_loss += guarded(epoch, step, objective2(p, xl, yl, xu, step_cfg, n, m, noise_seed));
        denom += 1.0;
      } else {
        epoch_loss +=
            guarded(epoch, step, objective2(p, xl, yl, empty, step_cfg, n, m, noise_seed));
        denom += 1.0;
        if (bu > 0) {
          epoch_loss += guarded(
              epoch, step, objective2(p, empty, {}, xu, step_cfg, n, m, mix_seed(noise_seed, 0x36)));
          denom += 1.0;
        }
      }
    }
    res.loss_trace.push_back(epoch_loss / denom);
  }
  return res;
}

std::vector<double> predict_proba2(const Model2Params& p, const Matrix& x, std::size_t n_mc,
                                   std::uint64_t seed) {
  if (x.cols != p.lx) throw std::invalid_argument("predict_proba2: feature width mismatch");
  if (n_mc == 0) throw std::invalid_argument("predict_proba2: n_mc must be positive");
  const auto enc = nn::mlp_forward(p.encoder_a_net, x);
  const Matrix& ma = enc.values[0];
  const Matrix& va = enc.values[1];
  Rng rng(seed);
  std::vector<double> out(x.rows, 0.0);
  const double inv = 1.0 / static_cast<double>(n_mc);
  for (std::size_t l = 0; l < n_mc; ++l) {
    const Matrix eps = rng.normal_matrix(x.rows, p.la);
    Matrix a(x.rows, p.la);
    for (std::size_t i = 0; i < a.size(); ++i)
      a.data[i] = ma.data[i] + std::sqrt(va.data[i]) * eps.data[i];
    const auto cls = nn::mlp_forward(p.classifier_net, append_cols(x, a));
    for (std::size_t i = 0; i < x.rows; ++i) out[i] += inv * cls.values[0](i, 1);
  }
  return out;
}

}  // namespace ri::model2
