#include "ri/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "internal/batching.hpp"
#include "ri/dists.hpp"
#include "ri/rng.hpp"

namespace ri::baselines {

namespace {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// log(1 + exp(t)) without overflow.
double softplus(double t) { return std::log1p(std::exp(-std::abs(t))) + std::max(t, 0.0); }

double dot_with_intercept(std::span<const double> coef, std::span<const double> x) {
  double t = coef[0];
  for (std::size_t j = 0; j < x.size(); ++j) t += coef[j + 1] * x[j];
  return t;
}

// Penalized negative log likelihood; the quantity the Newton loop descends.
double penalized_nll(const std::vector<WeightedRow>& rows, const std::vector<double>& coef,
                     double l2) {
  double nll = 0.0;
  for (const auto& r : rows) {
    const double t = dot_with_intercept(coef, r.features);
    nll += r.weight * (softplus(t) - (r.label == 1 ? t : 0.0));
  }
  double pen = 0.0;
  for (double c : coef) pen += c * c;
  return nll + 0.5 * l2 * pen;
}

// Solves A x = b for symmetric positive definite A (row major, d x d),
// overwriting A with its Cholesky factor. Returns false if A is not
// positive definite.
bool cholesky_solve(std::vector<double>& A, std::vector<double>& b, std::size_t d) {
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = A[i * d + j];
      for (std::size_t k = 0; k < j; ++k) s -= A[i * d + k] * A[j * d + k];
      if (i == j) {
        if (!(s > 0.0)) return false;
        A[i * d + i] = std::sqrt(s);
      } else {
        A[i * d + j] = s / A[j * d + j];
      }
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= A[i * d + k] * b[k];
    b[i] = s / A[i * d + i];
  }
  for (std::size_t ii = d; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < d; ++k) s -= A[k * d + ii] * b[k];
    b[ii] = s / A[ii * d + ii];
  }
  return true;
}

void check_rows(const std::vector<WeightedRow>& rows) {
  if (rows.size() < 2) throw std::invalid_argument("logreg_fit: need at least two rows");
  const std::size_t d = rows.front().features.size();
  double w0 = 0.0, w1 = 0.0;
  for (const auto& r : rows) {
    if (r.features.size() != d)
      throw std::invalid_argument("logreg_fit: inconsistent feature widths");
    if (!(r.weight > 0.0)) throw std::invalid_argument("logreg_fit: weights must be positive");
    if (r.label != 0 && r.label != 1)
      throw std::invalid_argument("logreg_fit: labels must be 0 or 1");
    (r.label == 0 ? w0 : w1) += r.weight;
  }
  if (!(w0 > 0.0 && w1 > 0.0))
    throw std::invalid_argument("logreg_fit: both classes need positive total weight");
}

data::LabeledDataset append_rows(const data::LabeledDataset& base, const Matrix& extra,
                                 const std::vector<std::size_t>& which,
                                 const std::vector<int>& labels) {
  data::LabeledDataset out;
  out.names = base.names;
  out.features = Matrix(base.size() + which.size(), base.features.cols);
  out.labels = base.labels;
  for (std::size_t i = 0; i < base.size(); ++i)
    std::copy(base.features.row(i), base.features.row(i) + base.features.cols,
              out.features.row(i));
  for (std::size_t k = 0; k < which.size(); ++k) {
    std::copy(extra.row(which[k]), extra.row(which[k]) + extra.cols,
              out.features.row(base.size() + k));
    out.labels.push_back(labels[k]);
  }
  return out;
}

}  // namespace

double LogisticModel::predict_one(std::span<const double> x) const {
  if (x.size() + 1 != coef.size())
    throw std::invalid_argument("LogisticModel: feature width mismatch");
  return sigmoid(dot_with_intercept(coef, x));
}

std::vector<double> LogisticModel::predict(const Matrix& x) const {
  std::vector<double> out(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i)
    out[i] = predict_one(std::span<const double>(x.row(i), x.cols));
  return out;
}

LogisticModel logreg_fit(const std::vector<WeightedRow>& rows, double l2) {
  check_rows(rows);
  if (l2 < 0.0) throw std::invalid_argument("logreg_fit: l2 must be nonnegative");
  const std::size_t d = rows.front().features.size() + 1;

  LogisticModel model;
  model.coef.assign(d, 0.0);
  double nll = penalized_nll(rows, model.coef, l2);
  double total_weight = 0.0;
  for (const auto& r : rows) total_weight += r.weight;

  std::vector<double> g(d), step(d), trial(d);
  std::vector<double> H(d * d);
  constexpr double kTol = 1e-8;
  constexpr std::size_t kMaxIter = 100;

  for (std::size_t iter = 1; iter <= kMaxIter; ++iter) {
    std::fill(g.begin(), g.end(), 0.0);
    std::fill(H.begin(), H.end(), 0.0);
    for (const auto& r : rows) {
      const double p = sigmoid(dot_with_intercept(model.coef, r.features));
      const double resid = r.weight * ((r.label == 1 ? 1.0 : 0.0) - p);
      const double curv = r.weight * p * (1.0 - p);
      g[0] += resid;
      H[0] += curv;
      for (std::size_t j = 0; j < r.features.size(); ++j) {
        const double xj = r.features[j];
        g[j + 1] += resid * xj;
        H[j + 1] += curv * xj;  // first row of H
        for (std::size_t k = 0; k <= j; ++k)
          H[(j + 1) * d + (k + 1)] += curv * xj * r.features[k];
      }
    }
    // Mirror the strictly-lower triangle and add the penalty curvature.
    for (std::size_t i = 0; i < d; ++i) {
      H[i * d] = H[i];
      H[i * d + i] += l2;
      g[i] -= l2 * model.coef[i];
      for (std::size_t j = 0; j < i; ++j) H[j * d + i] = H[i * d + j];
    }

    model.iterations = iter;
    model.grad_norm = 0.0;
    for (double v : g) model.grad_norm = std::max(model.grad_norm, std::abs(v));
    if (model.grad_norm < kTol) {
      model.converged = true;
      break;
    }

    step = g;
    std::vector<double> Hc = H;
    double ridge = 0.0;
    while (!cholesky_solve(Hc, step, d)) {
      ridge = ridge == 0.0 ? 1e-10 : ridge * 10.0;
      if (ridge > 1e6) throw std::runtime_error("logreg_fit: singular Newton system");
      Hc = H;
      for (std::size_t i = 0; i < d; ++i) Hc[i * d + i] += ridge;
      step = g;
    }

    // Allow a roundoff-sized increase: near the optimum the true improvement
    // of a full Newton step can fall below the resolution of nll itself, and
    // rejecting that step would stall the quadratic endgame.
    const double slack = 1e-12 * (std::abs(nll) + 1.0);
    double damp = 1.0;
    while (true) {
      for (std::size_t i = 0; i < d; ++i) trial[i] = model.coef[i] + damp * step[i];
      const double trial_nll = penalized_nll(rows, trial, l2);
      if (trial_nll <= nll + slack || damp < 1e-12) {
        model.coef = trial;
        nll = trial_nll;
        break;
      }
      damp *= 0.5;
    }

    for (double c : model.coef)
      if (!std::isfinite(c) || std::abs(c) > 1e8)
        throw std::runtime_error(
            "logreg_fit: fit diverged (data may be perfectly separable); refit with l2 > 0");
  }

  // A (near-)zero unpenalized likelihood means every row is classified with
  // certainty: perfect separation, where the optimum runs to infinity.
  if (l2 == 0.0 && nll < 1e-6 * total_weight)
    throw std::runtime_error(
        "logreg_fit: perfectly separable data has no finite optimum at l2 = 0; refit with l2 > 0");
  return model;
}

std::vector<WeightedRow> to_rows(const data::LabeledDataset& ds) {
  return to_rows(ds, std::vector<double>(ds.size(), 1.0));
}

std::vector<WeightedRow> to_rows(const data::LabeledDataset& ds, std::span<const double> weights) {
  if (weights.size() != ds.size()) throw std::invalid_argument("to_rows: weight count mismatch");
  if (ds.labels.size() != ds.size()) throw std::invalid_argument("to_rows: label count mismatch");
  std::vector<WeightedRow> rows(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    rows[i].features.assign(ds.features.row(i), ds.features.row(i) + ds.features.cols);
    rows[i].label = ds.labels[i];
    rows[i].weight = weights[i];
  }
  return rows;
}

std::vector<WeightedRow> reclassify(const data::LabeledDataset& accepted, const Matrix& rejected,
                                    std::span<const double> p_default, ThresholdRule rule,
                                    double cutoff) {
  std::vector<WeightedRow> rows = to_rows(accepted);
  if (rejected.rows == 0) return rows;
  if (p_default.size() != rejected.rows)
    throw std::invalid_argument("reclassify: score count mismatch");
  if (rejected.cols != accepted.features.cols)
    throw std::invalid_argument("reclassify: feature width mismatch");

  std::vector<int> hard(rejected.rows, 0);
  if (rule == ThresholdRule::FixedCutoff) {
    for (std::size_t i = 0; i < rejected.rows; ++i) hard[i] = p_default[i] >= cutoff ? 1 : 0;
  } else {
    const double q =
        static_cast<double>(accepted.n_class(1)) / static_cast<double>(accepted.size());
    const std::size_t k = static_cast<std::size_t>(
        std::llround(q * static_cast<double>(rejected.rows)));
    std::vector<std::size_t> order(rejected.rows);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return p_default[a] > p_default[b]; });
    for (std::size_t i = 0; i < k && i < order.size(); ++i) hard[order[i]] = 1;
  }
  for (std::size_t i = 0; i < rejected.rows; ++i) {
    WeightedRow r;
    r.features.assign(rejected.row(i), rejected.row(i) + rejected.cols);
    r.label = hard[i];
    r.weight = 1.0;
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<WeightedRow> fuzzy_parcel(const data::LabeledDataset& accepted, const Matrix& rejected,
                                      std::span<const double> p_default) {
  if (p_default.size() != rejected.rows)
    throw std::invalid_argument("fuzzy_parcel: score count mismatch");
  if (rejected.rows > 0 && rejected.cols != accepted.features.cols)
    throw std::invalid_argument("fuzzy_parcel: feature width mismatch");
  std::vector<WeightedRow> rows = to_rows(accepted);
  for (std::size_t i = 0; i < rejected.rows; ++i) {
    const double p = p_default[i];
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("fuzzy_parcel: probabilities must lie in [0, 1]");
    for (int label : {1, 0}) {
      const double w = label == 1 ? p : 1.0 - p;
      if (w == 0.0) continue;  // a degenerate base probability leaves one hard copy
      WeightedRow r;
      r.features.assign(rejected.row(i), rejected.row(i) + rejected.cols);
      r.label = label;
      r.weight = w;
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

std::vector<double> augment_weights(std::span<const double> p_reject) {
  std::vector<double> w(p_reject.size());
  for (std::size_t i = 0; i < p_reject.size(); ++i) {
    const double p = p_reject[i];
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("augment_weights: probabilities must lie in [0, 1]");
    const double raw = 1.0 / (1.0 - p);
    w[i] = (std::isfinite(raw) && raw <= kAugmentWeightCap) ? raw : kAugmentWeightCap;
  }
  return w;
}

LogisticModel fit_reclassification(const data::LabeledDataset& accepted, const Matrix& rejected,
                                   double l2, ThresholdRule rule, double cutoff) {
  const LogisticModel base = logreg_fit(to_rows(accepted), l2);
  const std::vector<double> p = base.predict(rejected);
  return logreg_fit(reclassify(accepted, rejected, p, rule, cutoff), l2);
}

LogisticModel fit_fuzzy_parceling(const data::LabeledDataset& accepted, const Matrix& rejected,
                                  double l2) {
  const LogisticModel base = logreg_fit(to_rows(accepted), l2);
  const std::vector<double> p = base.predict(rejected);
  return logreg_fit(fuzzy_parcel(accepted, rejected, p), l2);
}

LogisticModel fit_augmentation(const data::LabeledDataset& accepted, const Matrix& rejected,
                               double l2) {
  if (rejected.rows > 0 && rejected.cols != accepted.features.cols)
    throw std::invalid_argument("fit_augmentation: feature width mismatch");
  // Accept/reject model: label 1 marks a rejected application.
  std::vector<WeightedRow> flag_rows;
  flag_rows.reserve(accepted.size() + rejected.rows);
  for (std::size_t i = 0; i < accepted.size(); ++i) {
    WeightedRow r;
    r.features.assign(accepted.features.row(i), accepted.features.row(i) + accepted.features.cols);
    r.label = 0;
    flag_rows.push_back(std::move(r));
  }
  for (std::size_t i = 0; i < rejected.rows; ++i) {
    WeightedRow r;
    r.features.assign(rejected.row(i), rejected.row(i) + rejected.cols);
    r.label = 1;
    flag_rows.push_back(std::move(r));
  }
  const LogisticModel flag_model = logreg_fit(flag_rows, l2);
  const std::vector<double> p_reject = flag_model.predict(accepted.features);
  return logreg_fit(to_rows(accepted, augment_weights(p_reject)), l2);
}

std::vector<double> MlpClassifier::predict(const Matrix& x) const {
  const auto out = nn::mlp_forward(net, x);
  const Matrix& probs = out.values[0];
  std::vector<double> p(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) p[i] = probs(i, 1);
  return p;
}

MlpClassifier supervised_mlp(const data::LabeledDataset& train, const MlpClassifierConfig& cfg) {
  if (train.size() == 0) throw std::invalid_argument("supervised_mlp: empty training set");
  if (train.labels.size() != train.size())
    throw std::invalid_argument("supervised_mlp: label count mismatch");
  for (int y : train.labels)
    if (y != 0 && y != 1) throw std::invalid_argument("supervised_mlp: labels must be 0 or 1");

  std::vector<std::size_t> dims{train.features.cols};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  Rng init_rng(mix_seed(cfg.seed, 0x41));
  MlpClassifier model;
  model.net = nn::glorot_init(dims, {{"probs", 2, nn::Activation::Softmax}}, init_rng);

  nn::AdamConfig acfg;
  acfg.lr = cfg.learning_rate;
  nn::AdamState adam = nn::adam_init(model.net, acfg);
  internal::BatchCycler cycler(train.size(), mix_seed(cfg.seed, 0x42));
  const std::size_t batch = std::min<std::size_t>(std::max<std::size_t>(cfg.batch_size, 1),
                                                  train.size());
  const std::size_t steps = (train.size() + batch - 1) / batch;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (std::size_t step = 0; step < steps; ++step) {
      const auto idx = cycler.next(batch);
      const Matrix xb = take_rows(train.features, idx);
      const std::size_t B = xb.rows;
      nn::GradientTape tape;
      const auto out = nn::mlp_forward(model.net, xb, &tape);
      const Matrix& probs = out.values[0];
      Matrix gp(B, 2);
      double ce = 0.0;
      for (std::size_t i = 0; i < B; ++i) {
        const std::size_t c = train.labels[idx[i]] == 0 ? 0 : 1;
        const double pt = probs(i, c);
        ce += -dists::log_prob(pt);
        if (pt > dists::kProbClampLo) gp(i, c) = -1.0 / (static_cast<double>(B) * pt);
      }
      ce /= static_cast<double>(B);
      if (!std::isfinite(ce))
        throw std::runtime_error("supervised_mlp: diverged at epoch " + std::to_string(epoch) +
                                 " step " + std::to_string(step));
      nn::adam_step(adam, model.net, nn::mlp_backward(model.net, tape, {gp}));
      epoch_loss += ce;
    }
    model.loss_trace.push_back(epoch_loss / static_cast<double>(steps));
  }
  return model;
}

SelfLearnResult self_learn(const data::LabeledDataset& accepted, const Matrix& rejected,
                           double confidence, std::size_t max_rounds,
                           const MlpClassifierConfig& cfg) {
  if (!(confidence > 0.5 && confidence < 1.0))
    throw std::invalid_argument("self_learn: confidence must lie in (0.5, 1)");
  if (rejected.rows > 0 && rejected.cols != accepted.features.cols)
    throw std::invalid_argument("self_learn: feature width mismatch");

  SelfLearnResult res;
  data::LabeledDataset pool = accepted;
  res.model = supervised_mlp(pool, cfg);

  std::vector<std::size_t> remaining(rejected.rows);
  std::iota(remaining.begin(), remaining.end(), 0);

  for (std::size_t round = 0; round < max_rounds && !remaining.empty(); ++round) {
    const Matrix xr = take_rows(rejected, remaining);
    const std::vector<double> p = res.model.predict(xr);
    std::vector<std::size_t> moved, still;
    std::vector<int> moved_labels;
    for (std::size_t k = 0; k < remaining.size(); ++k) {
      const double conf = std::max(p[k], 1.0 - p[k]);
      if (conf >= confidence) {
        moved.push_back(remaining[k]);
        moved_labels.push_back(p[k] >= 0.5 ? 1 : 0);
      } else {
        still.push_back(remaining[k]);
      }
    }
    if (moved.empty()) break;
    pool = append_rows(pool, rejected, moved, moved_labels);
    remaining = std::move(still);
    res.model = supervised_mlp(pool, cfg);
    res.rounds += 1;
    res.added_per_round.push_back(moved.size());
  }
  return res;
}

}  // namespace ri::baselines
