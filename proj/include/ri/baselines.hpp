#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ri/data.hpp"
#include "ri/matrix.hpp"
#include "ri/nn.hpp"

namespace ri::baselines {

/// One training row for the weighted logistic-regression core.
struct WeightedRow {
  std::vector<double> features;
  int label = 0;      // 0 or 1
  double weight = 1;  // must be > 0
};

struct LogisticModel {
  std::vector<double> coef;  // intercept first, then one weight per feature
  std::size_t iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;

  std::size_t n_features() const { return coef.empty() ? 0 : coef.size() - 1; }
  /// P(y = 1 | x) under the fitted model.
  double predict_one(std::span<const double> x) const;
  std::vector<double> predict(const Matrix& x) const;
};

/// Maximizes the weighted log likelihood minus l2/2 * |coef|^2 (intercept
/// included in the penalty) by damped Newton steps; stops when the gradient
/// infinity norm drops below 1e-8 or after 100 iterations. Requires at
/// least two rows and positive total weight on both classes. Throws a
/// divergence error advising l2 > 0 when the unpenalized fit runs away
/// (perfectly separable data).
LogisticModel logreg_fit(const std::vector<WeightedRow>& rows, double l2);

/// Convenience wrappers building WeightedRow sets.
std::vector<WeightedRow> to_rows(const data::LabeledDataset& ds);
std::vector<WeightedRow> to_rows(const data::LabeledDataset& ds, std::span<const double> weights);

enum class ThresholdRule {
  Quantile,     // label the top-q fraction of rejects by score, q = accepted default rate
  FixedCutoff,  // label 1 where the score >= cutoff
};

/// Hard-labels every rejected row from its predicted default probability
/// and returns accepted + relabeled rejects, all at weight 1. With an
/// empty rejected set the accepted rows come back unchanged.
std::vector<WeightedRow> reclassify(const data::LabeledDataset& accepted, const Matrix& rejected,
                                    std::span<const double> p_default,
                                    ThresholdRule rule = ThresholdRule::Quantile,
                                    double cutoff = 0.5);

/// Each rejected row enters twice, once per label, weighted by the base
/// model's probabilities; zero-weight copies are dropped so degenerate
/// base probabilities reduce to hard labels. Accepted rows keep weight 1.
std::vector<WeightedRow> fuzzy_parcel(const data::LabeledDataset& accepted, const Matrix& rejected,
                                      std::span<const double> p_default);

/// Inverse-probability-of-acceptance weights for accepted rows:
/// 1 / (1 - p_reject), capped at kAugmentWeightCap.
inline constexpr double kAugmentWeightCap = 100.0;
std::vector<double> augment_weights(std::span<const double> p_reject);

/// Full classical pipelines (base fit on accepted, transform, refit).
LogisticModel fit_reclassification(const data::LabeledDataset& accepted, const Matrix& rejected,
                                   double l2, ThresholdRule rule = ThresholdRule::Quantile,
                                   double cutoff = 0.5);
LogisticModel fit_fuzzy_parceling(const data::LabeledDataset& accepted, const Matrix& rejected,
                                  double l2);
/// Fits an accept/reject classifier on the union (reject flag as label),
/// weights the accepted rows by 1/(1 - p_reject) and refits on them.
LogisticModel fit_augmentation(const data::LabeledDataset& accepted, const Matrix& rejected,
                               double l2);

struct MlpClassifierConfig {
  std::vector<std::size_t> hidden{32};
  double learning_rate = 1e-3;
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  std::uint64_t seed = 1;
};

struct MlpClassifier {
  nn::MlpParams net;  // softmax head "probs" over {0, 1}
  std::vector<double> loss_trace;

  std::vector<double> predict(const Matrix& x) const;  // P(y = 1) per row
};

/// Adam on mean cross entropy over shuffled mini-batches; deterministic
/// under a fixed config seed. Throws on divergence naming epoch and step.
MlpClassifier supervised_mlp(const data::LabeledDataset& train, const MlpClassifierConfig& cfg);

struct SelfLearnResult {
  MlpClassifier model;
  std::size_t rounds = 0;                     // rounds that moved at least one row
  std::vector<std::size_t> added_per_round;   // pseudo-labeled rows per round
};

/// Iterative pseudo-labeling: train, move rejects whose max-class
/// probability reaches confidence into the pool with their predicted
/// label, retrain, until nothing moves or max_rounds is hit. confidence
/// must lie in (0.5, 1). With max_rounds = 0 the result is exactly the
/// supervised fit on accepted rows alone.
SelfLearnResult self_learn(const data::LabeledDataset& accepted, const Matrix& rejected,
                           double confidence, std::size_t max_rounds,
                           const MlpClassifierConfig& cfg);

}  // namespace ri::baselines
