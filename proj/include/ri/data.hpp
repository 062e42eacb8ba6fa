#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ri/matrix.hpp"

namespace ri::data {

struct LabeledDataset {
  Matrix features;               // one row per application
  std::vector<int> labels;       // 0 = good, 1 = default
  std::vector<std::string> names;

  std::size_t size() const { return features.rows; }
  std::size_t n_class(int y) const;
};

struct UnlabeledDataset {
  Matrix features;
  std::vector<std::string> names;

  std::size_t size() const { return features.rows; }
};

struct CsvLoadStats {
  std::size_t kept = 0;
  std::size_t dropped_missing = 0;
};

/// Reads a CSV with a header row. Cells that are empty or "NA"/"nan" count
/// as missing and drop the whole row (tallied in stats); anything else that
/// fails to parse as a number is an error naming the line. label_column
/// must hold 0/1 values.
LabeledDataset load_labeled_csv(const std::string& path, const std::string& label_column,
                                CsvLoadStats* stats = nullptr);
UnlabeledDataset load_unlabeled_csv(const std::string& path, CsvLoadStats* stats = nullptr);

void write_labeled_csv(const std::string& path, const LabeledDataset& ds,
                       const std::string& label_column);
void write_unlabeled_csv(const std::string& path, const UnlabeledDataset& ds);

/// Column-wise location/scale transform fitted on training data. Columns
/// with zero variance are dropped and reported by name.
struct Standardizer {
  std::vector<std::string> names;          // retained columns, in order
  std::vector<std::size_t> kept;           // indices into the original columns
  std::vector<double> mean, stddev;        // per retained column
  std::vector<std::string> dropped;
};

Standardizer fit_standardizer(const Matrix& x, const std::vector<std::string>& names);

/// Applies the transform; output has one column per retained input column,
/// each with the training mean removed and training stddev divided out.
Matrix standardize_apply(const Standardizer& s, const Matrix& x);

/// How to carve model-ready training material out of the raw accepted and
/// rejected pools. Counts of -1 mean "no limit" / "use all".
struct DesignSpec {
  double train_frac = 0.7;          // labeled rows going to training
  long n_accepted = -1;             // cap on the balanced labeled training set
  long n_rejects = -1;              // rejects to include (-1 = all, subject to caps)
  double acceptance_ratio = -1.0;   // target accepted/(accepted+rejected) ratio
  long max_total = -1;              // cap on labeled + unlabeled training rows
  std::uint64_t seed = 0;
};

struct Design {
  LabeledDataset train;        // balanced via majority down-sampling
  UnlabeledDataset rejects;    // selected rejected applications
  LabeledDataset test;         // untouched class mix
  Standardizer standardizer;   // fitted on train.features plus rejects.features
  std::size_t dropped_labeled = 0;  // labeled rows removed by balancing/caps
};

/// Stratified train/test split of the accepted pool, majority class
/// down-sampled in training, reject subset chosen per spec, standardizer
/// fitted on the selected training rows. Features are returned raw; apply
/// the standardizer before fitting models. Throws if the spec is
/// infeasible (for instance a ratio that needs more rejects than exist).
Design make_design(const LabeledDataset& accepted, const UnlabeledDataset& rejected,
                   const DesignSpec& spec);

/// A continuous application feature: class-conditional Gaussian with a
/// shared per-dimension variance, plus its loading on the acceptance score.
struct GaussianCol {
  std::string name;
  double mu0 = 0.0;        // mean for non-defaulters
  double mu1 = 0.0;        // mean for defaulters
  double sigma = 1.0;      // within-class stddev
  double accept_coef = 0.0;  // loading on the acceptance score (standardized units)
};

/// A binary indicator feature, independent of the class label and of the
/// acceptance rule.
struct BernoulliCol {
  std::string name;
  double p = 0.5;
};

struct SynthSpec {
  std::vector<GaussianCol> gauss;
  std::vector<BernoulliCol> dummies;
  double default_rate = 0.2;     // population P(y = 1)
  double accept_noise = 1.0;     // stddev of the noise added to the accept score
  std::size_t n_accepted = 0;
  std::size_t n_rejected = 0;

  void validate() const;
};

/// Closed-form quantities implied by a SynthSpec.
struct SynthOracle {
  std::vector<double> w;   // posterior log-odds coefficients, one per column
  double b = 0.0;          // posterior log-odds intercept
  double bayes_auc = 0.5;  // population AUC of the true posterior

  double posterior(std::span<const double> x) const;  // P(y = 1 | x)
};

SynthOracle make_oracle(const SynthSpec& spec);

/// Expected default rate among accepted applications under the spec's
/// noisy score rule, from the truncated-Gaussian tail probabilities.
double analytic_accepted_default_rate(const SynthSpec& spec);

struct SynthResult {
  LabeledDataset accepted;
  UnlabeledDataset rejected;
  std::vector<int> rejected_labels;        // ground truth, withheld from models
  std::vector<double> posterior_accepted;  // true P(y=1|x) per row
  std::vector<double> posterior_rejected;
  SynthOracle oracle;
};

/// Draws n_accepted + n_rejected applications, scores each with the noisy
/// acceptance rule and accepts exactly the top n_accepted.
SynthResult synth_generate(const SynthSpec& spec, std::uint64_t seed);

}  // namespace ri::data
