#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ri/baselines.hpp"
#include "ri/data.hpp"
#include "ri/model1.hpp"
#include "ri/model2.hpp"

namespace ri::harness {

enum class ModelKind {
  Model1,
  Model2,
  Mlp,
  Reclassification,
  FuzzyParceling,
  Augmentation,
  SelfLearningMlp,
};

std::string to_string(ModelKind kind);
ModelKind model_kind_from(const std::string& name);

/// Grid declaration plus the hyperparameters each model family uses.
/// Config seeds inside cfg1/cfg2/mlp_cfg are ignored; every (cell, repeat)
/// derives its own seed from the base seed so parallel and serial runs
/// produce identical numbers.
struct BenchmarkSpec {
  std::vector<ModelKind> models;
  std::vector<std::size_t> n_accepted;  // balanced labeled training rows per cell
  std::vector<std::size_t> n_rejected;  // unlabeled training rows per cell
  std::size_t repeats = 5;
  double train_frac = 0.7;
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  model1::Model1Dims dims1;
  model2::Model2Dims dims2;
  model1::TrainConfig1 cfg1;
  model2::TrainConfig2 cfg2;
  baselines::MlpClassifierConfig mlp_cfg;
  double logreg_l2 = 1.0;
  double self_learn_confidence = 0.9;
  std::size_t self_learn_rounds = 3;
  std::size_t predict_mc = 100;  // posterior draws for Model 2 scoring
};

struct BenchmarkCell {
  ModelKind model = ModelKind::Model1;
  std::size_t n_accepted = 0;
  std::size_t n_rejected = 0;
  bool failed = false;
  std::string error;          // set when failed
  std::vector<double> aucs;   // one per repeat
  double mean_auc = 0.0;
};

struct BenchmarkResult {
  std::vector<BenchmarkCell> cells;  // models x n_accepted x n_rejected, in spec order
};

/// Repeated-random-split benchmark over the declared grid. Each repeat
/// makes a fresh design from the pools (split, balance, reject sampling),
/// standardizes, trains the cell's model and scores the held-out test
/// rows. A failing cell records its error and the run continues. Cells
/// may execute on spec.threads workers; results are identical either way.
BenchmarkResult run_benchmark(const data::LabeledDataset& accepted,
                              const data::UnlabeledDataset& rejected, const BenchmarkSpec& spec);

/// Deterministically ordered text table, one cell per line.
std::string benchmark_to_text(const BenchmarkResult& r);

/// Trains one model kind on an already-standardized design and returns
/// P(y = 1) for the test rows. The seed drives initialization, batching
/// and any scoring draws.
std::vector<double> train_and_score(ModelKind kind, const Matrix& x_labeled,
                                    const std::vector<int>& y_labeled, const Matrix& x_unlabeled,
                                    const Matrix& x_test, const BenchmarkSpec& spec,
                                    std::uint64_t seed);

}  // namespace ri::harness
