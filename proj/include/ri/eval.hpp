#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ri::eval {

/// Scores are predicted default probabilities P(y = 1); labels are the
/// realized outcomes.
struct ScoredSet {
  std::vector<double> scores;
  std::vector<int> labels;

  std::size_t size() const { return scores.size(); }
  std::size_t n_class(int y) const;
  /// Throws std::invalid_argument on length mismatch, non-finite scores,
  /// or labels outside {0, 1}.
  void validate() const;
};

/// Mann-Whitney statistic with ties counted 1/2; throws when only one
/// class is present.
double auc(const ScoredSet& s);

/// 2 * auc - 1.
double gini(const ScoredSet& s);

/// Cost-severity distribution for the H measure: Beta(a, b) over the
/// normalized misclassification-cost share c in (0, 1).
struct SeverityParams {
  double a = 2.0;
  double b = 2.0;
};

/// Hand's H: one minus the ratio of the severity-averaged minimum expected
/// misclassification loss to the trivial-classifier loss. 0 for
/// uninformative scores, 1 for perfect separation.
double h_measure(const ScoredSet& s, const SeverityParams& sev = {});

struct ThresholdMetrics {
  double recall = 0.0;
  double precision = 0.0;
  double threshold = 0.0;  // lowest score classified positive
  std::size_t k = 0;       // rows classified positive
};

/// Classifies the top-k scores positive, k = round(default_rate * n) with
/// the default rate taken from the labels; ties resolve by original row
/// order. With absolute_cutoff, classifies scores >= default_rate instead.
/// Throws an undefined-metric error when k = 0.
ThresholdMetrics recall_precision_at_default_rate(const ScoredSet& s,
                                                  bool absolute_cutoff = false);

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;    // sample standard deviation (n - 1)
  double skewness = 0.0;  // population central-moment ratio
  double kurtosis = 0.0;  // excess kurtosis: normal scores give 0
};

/// Requires n >= 2. Constant inputs report skewness and kurtosis as 0.
Moments score_moments(std::span<const double> scores);

/// A fitted probability-calibration map.
struct Calibration {
  enum class Kind { Identity, Platt, Beta };
  Kind kind = Kind::Identity;
  // Platt: sigmoid(a * s + b). Beta: sigmoid(c + a * log s - b * log(1 - s)).
  double a = 1.0, b = 0.0, c = 0.0;
  bool degenerate = false;  // fit failed and the identity map was kept

  double apply(double s) const;
  std::vector<double> apply(std::span<const double> s) const;
  /// Monotone nondecreasing in the score.
  bool monotone() const;
};

/// Sigmoid recalibration fitted by logistic likelihood on a validation
/// set. A degenerate fit falls back to the identity map with the flag set.
Calibration platt_fit(const ScoredSet& validation);

/// Three-parameter beta calibration: logistic regression on the features
/// (log s, -log(1 - s)) with scores clamped away from {0, 1}.
Calibration beta_calibrate_fit(const ScoredSet& validation);

struct MetricsReport {
  double auc = 0.0;
  double gini = 0.0;
  double h_measure = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
  double kurtosis = 0.0;
  double skewness = 0.0;
  double threshold = 0.0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;
};

/// Computes every metric in one pass over the scored set.
MetricsReport evaluate_scores(const ScoredSet& s, std::uint64_t seed,
                              bool absolute_cutoff = false);

/// Fixed-key "name = value" document, one key per line, 17 significant
/// digits; parse rejects unknown or missing keys.
std::string metrics_to_text(const MetricsReport& r);
MetricsReport metrics_from_text(const std::string& text);

}  // namespace ri::eval
