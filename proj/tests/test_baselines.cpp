#include <cmath>
#include <vector>

#include "doctest.h"
#include "ri/baselines.hpp"
#include "ri/rng.hpp"

using ri::Matrix;
using namespace ri::baselines;

namespace {

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

/// Test-local penalized objective and gradient, written independently of
/// the library's Newton solver.
double pen_nll(const std::vector<WeightedRow>& rows, std::span<const double> coef, double l2) {
  double nll = 0.0;
  for (const auto& r : rows) {
    double t = coef[0];
    for (std::size_t j = 0; j < r.features.size(); ++j) t += coef[j + 1] * r.features[j];
    // -log p(y|t) = log(1 + e^t) - y t, evaluated stably.
    const double lse = t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
    nll += r.weight * (lse - r.label * t);
  }
  double pen = 0.0;
  for (double c : coef) pen += c * c;
  return nll + 0.5 * l2 * pen;
}

std::vector<double> pen_grad(const std::vector<WeightedRow>& rows, std::span<const double> coef,
                             double l2) {
  std::vector<double> g(coef.size(), 0.0);
  for (const auto& r : rows) {
    double t = coef[0];
    for (std::size_t j = 0; j < r.features.size(); ++j) t += coef[j + 1] * r.features[j];
    const double resid = r.weight * (sigmoid(t) - r.label);
    g[0] += resid;
    for (std::size_t j = 0; j < r.features.size(); ++j) g[j + 1] += resid * r.features[j];
  }
  for (std::size_t j = 0; j < coef.size(); ++j) g[j] += l2 * coef[j];
  return g;
}

std::vector<WeightedRow> binary_cells(int n_pos_at_plus, int n_at_plus, int n_pos_at_minus,
                                      int n_at_minus) {
  std::vector<WeightedRow> rows;
  for (int i = 0; i < n_at_plus; ++i) rows.push_back({{1.0}, i < n_pos_at_plus ? 1 : 0, 1.0});
  for (int i = 0; i < n_at_minus; ++i) rows.push_back({{-1.0}, i < n_pos_at_minus ? 1 : 0, 1.0});
  return rows;
}

ri::data::LabeledDataset blob_data(std::size_t n, std::uint64_t seed) {
  ri::Rng rng(seed);
  ri::data::LabeledDataset ds;
  ds.names = {"f0", "f1"};
  ds.features = Matrix(n, 2);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    ds.labels[i] = y;
    ds.features(i, 0) = (y ? 1.0 : -1.0) + 0.6 * rng.normal();
    ds.features(i, 1) = (y ? -1.0 : 1.0) + 0.6 * rng.normal();
  }
  return ds;
}

}  // namespace

TEST_CASE("logistic fit recovers the closed-form saturated solution") {
  // x = +1 has 7/10 positives, x = -1 has 3/10: the unpenalized MLE is
  // intercept 0, slope logit(0.7).
  const auto rows = binary_cells(7, 10, 3, 10);
  const LogisticModel m = logreg_fit(rows, 0.0);
  CHECK(m.converged);
  CHECK(m.grad_norm < 1e-8);
  CHECK(m.coef[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(m.coef[1] == doctest::Approx(std::log(0.7 / 0.3)).epsilon(1e-9));
  CHECK(m.predict_one(std::vector<double>{1.0}) == doctest::Approx(0.7).epsilon(1e-9));
}

TEST_CASE("fit stationarity and optimality on random weighted data") {
  ri::Rng rng(41);
  for (double l2 : {0.0, 0.5, 3.0}) {
    std::vector<WeightedRow> rows;
    for (int i = 0; i < 40; ++i) {
      WeightedRow r;
      r.features = {rng.normal(), rng.normal(), rng.normal()};
      const double t = 0.8 * r.features[0] - 0.5 * r.features[1];
      r.label = rng.uniform() < sigmoid(t) ? 1 : 0;
      r.weight = rng.uniform(0.2, 3.0);
      rows.push_back(r);
    }
    const LogisticModel m = logreg_fit(rows, l2);
    const auto g = pen_grad(rows, m.coef, l2);
    for (double gj : g) CHECK(std::abs(gj) < 1e-7);
    const double at_fit = pen_nll(rows, m.coef, l2);
    for (int rep = 0; rep < 20; ++rep) {
      auto perturbed = m.coef;
      for (double& c : perturbed) c += rng.uniform(-0.3, 0.3);
      CHECK(at_fit <= pen_nll(rows, perturbed, l2) + 1e-12);
    }
  }
}

TEST_CASE("perfect separation is detected and cured by the penalty") {
  std::vector<WeightedRow> rows;
  for (int i = 0; i < 10; ++i) rows.push_back({{i < 5 ? -1.0 : 1.0}, i < 5 ? 0 : 1, 1.0});
  CHECK_THROWS_AS((void)logreg_fit(rows, 0.0), std::runtime_error);
  const LogisticModel m = logreg_fit(rows, 1.0);
  CHECK(m.converged);
  CHECK(std::abs(m.coef[1]) < 10.0);
}

TEST_CASE("input validation") {
  CHECK_THROWS_AS((void)logreg_fit({}, 1.0), std::invalid_argument);
  std::vector<WeightedRow> one{{{1.0}, 1, 1.0}};
  CHECK_THROWS_AS((void)logreg_fit(one, 1.0), std::invalid_argument);
  std::vector<WeightedRow> zero_w{{{1.0}, 1, 0.0}, {{-1.0}, 0, 1.0}};
  CHECK_THROWS_AS((void)logreg_fit(zero_w, 1.0), std::invalid_argument);
  std::vector<WeightedRow> ragged{{{1.0, 2.0}, 1, 1.0}, {{-1.0}, 0, 1.0}};
  CHECK_THROWS_AS((void)logreg_fit(ragged, 1.0), std::invalid_argument);
  std::vector<WeightedRow> one_class{{{1.0}, 1, 1.0}, {{-1.0}, 1, 1.0}};
  CHECK_THROWS_AS((void)logreg_fit(one_class, 1.0), std::invalid_argument);
  std::vector<WeightedRow> bad_label{{{1.0}, 2, 1.0}, {{-1.0}, 0, 1.0}};
  CHECK_THROWS_AS((void)logreg_fit(bad_label, 1.0), std::invalid_argument);
}

TEST_CASE("integer-weighted rows equal duplicated rows") {
  ri::Rng rng(43);
  std::vector<WeightedRow> weighted, duplicated;
  for (int i = 0; i < 12; ++i) {
    WeightedRow r;
    r.features = {rng.normal(), rng.normal()};
    r.label = rng.uniform() < 0.5 ? 0 : 1;
    const int reps = 1 + static_cast<int>(i % 3);
    r.weight = reps;
    weighted.push_back(r);
    WeightedRow unit = r;
    unit.weight = 1.0;
    for (int k = 0; k < reps; ++k) duplicated.push_back(unit);
  }
  const LogisticModel a = logreg_fit(weighted, 0.7);
  const LogisticModel b = logreg_fit(duplicated, 0.7);
  REQUIRE(a.coef.size() == b.coef.size());
  for (std::size_t j = 0; j < a.coef.size(); ++j)
    CHECK(a.coef[j] == doctest::Approx(b.coef[j]).epsilon(1e-10));
}

TEST_CASE("augmentation weights: worked value, cap, and validation") {
  const std::vector<double> p{0.8, 0.0, 0.5, 0.995};
  const auto w = augment_weights(p);
  CHECK(w[0] == doctest::Approx(5.0).epsilon(1e-15));  // 1 / (1 - 0.8)
  CHECK(w[1] == 1.0);
  CHECK(w[2] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(w[3] == kAugmentWeightCap);  // 1 / 0.005 = 200 exceeds the cap
  CHECK(augment_weights(std::vector<double>{0.999999})[0] == kAugmentWeightCap);
  CHECK(augment_weights(std::vector<double>{1.0})[0] == kAugmentWeightCap);
  CHECK_THROWS_AS((void)augment_weights(std::vector<double>{-0.1}), std::invalid_argument);
  CHECK_THROWS_AS((void)augment_weights(std::vector<double>{1.1}), std::invalid_argument);
}

TEST_CASE("reclassification thresholds rejects by quantile or cutoff") {
  ri::data::LabeledDataset acc;
  acc.names = {"f"};
  acc.features = Matrix(8, 1);
  acc.labels = {0, 0, 0, 0, 0, 0, 1, 1};  // accepted default rate 0.25
  for (std::size_t i = 0; i < 8; ++i) acc.features(i, 0) = static_cast<double>(i);

  Matrix rej(8, 1);
  for (std::size_t i = 0; i < 8; ++i) rej(i, 0) = 10.0 + static_cast<double>(i);
  const std::vector<double> p{0.9, 0.1, 0.8, 0.3, 0.2, 0.15, 0.05, 0.25};

  // Quantile: k = round(0.25 * 8) = 2 highest scores get label 1.
  const auto rows = reclassify(acc, rej, p, ThresholdRule::Quantile);
  REQUIRE(rows.size() == 16);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(rows[i].label == acc.labels[i]);
    CHECK(rows[i].weight == 1.0);
  }
  std::vector<int> want{1, 0, 1, 0, 0, 0, 0, 0};
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(rows[8 + i].label == want[i]);
    CHECK(rows[8 + i].weight == 1.0);
    CHECK(rows[8 + i].features[0] == rej(i, 0));
  }

  const auto cut = reclassify(acc, rej, p, ThresholdRule::FixedCutoff, 0.25);
  std::vector<int> want_cut{1, 0, 1, 1, 0, 0, 0, 1};
  for (std::size_t i = 0; i < 8; ++i) CHECK(cut[8 + i].label == want_cut[i]);

  // Ties at the k-th score resolve by original position (stable).
  const std::vector<double> tied{0.5, 0.5, 0.5, 0.1, 0.1, 0.1, 0.1, 0.1};
  const auto t = reclassify(acc, rej, tied, ThresholdRule::Quantile);
  CHECK(t[8].label == 1);
  CHECK(t[9].label == 1);
  CHECK(t[10].label == 0);
}

TEST_CASE("fuzzy parceling conserves weight and degenerates to hard labels") {
  ri::data::LabeledDataset acc = blob_data(10, 47);
  Matrix rej(5, 2);
  ri::Rng rng(48);
  for (double& v : rej.data) v = rng.normal();

  const std::vector<double> p{0.3, 0.7, 0.0, 1.0, 0.5};
  const auto rows = fuzzy_parcel(acc, rej, p);
  // 10 accepted + two copies per reject minus the two zero-weight copies.
  REQUIRE(rows.size() == 10 + 2 * 5 - 2);
  double reject_weight = 0.0;
  for (std::size_t i = 10; i < rows.size(); ++i) reject_weight += rows[i].weight;
  CHECK(reject_weight == doctest::Approx(5.0).epsilon(1e-12));

  // Hard base probabilities: fuzzy and reclassify produce the same fit.
  const std::vector<double> hard{1.0, 0.0, 1.0, 1.0, 0.0};
  const auto fz = logreg_fit(fuzzy_parcel(acc, rej, hard), 0.5);
  const auto rc = logreg_fit(reclassify(acc, rej, hard, ThresholdRule::FixedCutoff, 0.5), 0.5);
  REQUIRE(fz.coef.size() == rc.coef.size());
  for (std::size_t j = 0; j < fz.coef.size(); ++j)
    CHECK(fz.coef[j] == doctest::Approx(rc.coef[j]).epsilon(1e-8));

  std::vector<double> bad{0.5, 0.5, 0.5, 0.5, 1.5};
  CHECK_THROWS_AS((void)fuzzy_parcel(acc, rej, bad), std::invalid_argument);
}

TEST_CASE("full classical pipelines run and discriminate on easy data") {
  const ri::data::LabeledDataset acc = blob_data(60, 53);
  ri::Rng rng(54);
  Matrix rej(40, 2);
  for (std::size_t i = 0; i < rej.rows; ++i) {
    const int y = static_cast<int>(i % 2);
    rej(i, 0) = (y ? 1.0 : -1.0) + 0.6 * rng.normal();
    rej(i, 1) = (y ? -1.0 : 1.0) + 0.6 * rng.normal();
  }
  for (const auto& fit : {fit_reclassification(acc, rej, 1.0, ThresholdRule::Quantile, 0.5),
                          fit_fuzzy_parceling(acc, rej, 1.0), fit_augmentation(acc, rej, 1.0)}) {
    CHECK(fit.converged);
    // Class-1 blobs live at (+1, -1): the fitted scores must separate them.
    CHECK(fit.predict_one(std::vector<double>{1.0, -1.0}) >
          fit.predict_one(std::vector<double>{-1.0, 1.0}));
  }
  // Degenerate: no rejects at all still yields a usable accepted-only fit.
  const auto none = fit_reclassification(acc, Matrix(0, 2), 1.0, ThresholdRule::Quantile, 0.5);
  CHECK(none.converged);
}

TEST_CASE("supervised mlp learns blobs deterministically") {
  const ri::data::LabeledDataset train = blob_data(80, 59);
  MlpClassifierConfig cfg;
  cfg.hidden = {8};
  cfg.learning_rate = 5e-3;
  cfg.epochs = 60;
  cfg.batch_size = 32;
  cfg.seed = 5;
  const MlpClassifier m = supervised_mlp(train, cfg);
  REQUIRE(m.loss_trace.size() == cfg.epochs);
  CHECK(m.loss_trace.back() < m.loss_trace.front());
  const auto probs = m.predict(train.features);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < train.size(); ++i)
    correct += (probs[i] >= 0.5) == (train.labels[i] == 1) ? 1u : 0u;
  CHECK(static_cast<double>(correct) / static_cast<double>(train.size()) >= 0.9);

  const MlpClassifier m2 = supervised_mlp(train, cfg);
  CHECK(m2.loss_trace == m.loss_trace);
  CHECK(m2.net.weights[0].data == m.net.weights[0].data);
}

TEST_CASE("self-learning with zero rounds equals the supervised fit") {
  const ri::data::LabeledDataset acc = blob_data(40, 61);
  ri::Rng rng(62);
  Matrix rej(30, 2);
  for (double& v : rej.data) v = rng.normal();
  MlpClassifierConfig cfg;
  cfg.hidden = {6};
  cfg.epochs = 30;
  cfg.seed = 9;

  const SelfLearnResult zero = self_learn(acc, rej, 0.9, 0, cfg);
  const MlpClassifier plain = supervised_mlp(acc, cfg);
  CHECK(zero.rounds == 0);
  CHECK(zero.model.net.weights[0].data == plain.net.weights[0].data);
  CHECK(zero.model.loss_trace == plain.loss_trace);

  const SelfLearnResult r = self_learn(acc, rej, 0.8, 3, cfg);
  CHECK(r.added_per_round.size() <= 3);
  std::size_t total = 0;
  for (std::size_t a : r.added_per_round) total += a;
  CHECK(total <= rej.rows);

  CHECK_THROWS_AS((void)self_learn(acc, rej, 0.5, 2, cfg), std::invalid_argument);
  CHECK_THROWS_AS((void)self_learn(acc, rej, 1.0, 2, cfg), std::invalid_argument);
}

TEST_CASE("to_rows carries features, labels, and optional weights") {
  const ri::data::LabeledDataset ds = blob_data(6, 67);
  const auto plain = to_rows(ds);
  REQUIRE(plain.size() == 6);
  CHECK(plain[3].features[0] == ds.features(3, 0));
  CHECK(plain[3].label == ds.labels[3]);
  CHECK(plain[3].weight == 1.0);
  const std::vector<double> w{1, 2, 3, 4, 5, 6};
  const auto weighted = to_rows(ds, w);
  CHECK(weighted[4].weight == 5.0);
}
