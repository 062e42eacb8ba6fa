#include "ri/harness.hpp"

#include <atomic>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "ri/eval.hpp"
#include "ri/rng.hpp"

namespace ri::harness {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Model1:
      return "model1";
    case ModelKind::Model2:
      return "model2";
    case ModelKind::Mlp:
      return "mlp";
    case ModelKind::Reclassification:
      return "reclassification";
    case ModelKind::FuzzyParceling:
      return "fuzzy_parceling";
    case ModelKind::Augmentation:
      return "augmentation";
    case ModelKind::SelfLearningMlp:
      return "self_learning_mlp";
  }
  return "model1";
}

ModelKind model_kind_from(const std::string& name) {
  if (name == "model1") return ModelKind::Model1;
  if (name == "model2") return ModelKind::Model2;
  if (name == "mlp") return ModelKind::Mlp;
  if (name == "reclassification") return ModelKind::Reclassification;
  if (name == "fuzzy_parceling") return ModelKind::FuzzyParceling;
  if (name == "augmentation") return ModelKind::Augmentation;
  if (name == "self_learning_mlp") return ModelKind::SelfLearningMlp;
  throw std::runtime_error("unknown model '" + name +
                           "' (expected model1, model2, mlp, reclassification, fuzzy_parceling, "
                           "augmentation or self_learning_mlp)");
}

std::vector<double> train_and_score(ModelKind kind, const Matrix& x_labeled,
                                    const std::vector<int>& y_labeled, const Matrix& x_unlabeled,
                                    const Matrix& x_test, const BenchmarkSpec& spec,
                                    std::uint64_t seed) {
  data::LabeledDataset train;
  train.features = x_labeled;
  train.labels = y_labeled;
  data::UnlabeledDataset unl;
  unl.features = x_unlabeled;

  switch (kind) {
    case ModelKind::Model1: {
      model1::TrainConfig1 cfg = spec.cfg1;
      cfg.seed = seed;
      const auto res = model1::train1(train, unl, spec.dims1, cfg);
      return model1::predict_proba1(res.params, x_test);
    }
    case ModelKind::Model2: {
      model2::TrainConfig2 cfg = spec.cfg2;
      cfg.seed = seed;
      const auto res = model2::train2(train, unl, spec.dims2, cfg);
      return model2::predict_proba2(res.params, x_test, spec.predict_mc, mix_seed(seed, 0x77));
    }
    case ModelKind::Mlp: {
      baselines::MlpClassifierConfig cfg = spec.mlp_cfg;
      cfg.seed = seed;
      return baselines::supervised_mlp(train, cfg).predict(x_test);
    }
    case ModelKind::Reclassification:
      return baselines::fit_reclassification(train, x_unlabeled, spec.logreg_l2).predict(x_test);
    case ModelKind::FuzzyParceling:
      return baselines::fit_fuzzy_parceling(train, x_unlabeled, spec.logreg_l2).predict(x_test);
    case ModelKind::Augmentation:
      return baselines::fit_augmentation(train, x_unlabeled, spec.logreg_l2).predict(x_test);
    case ModelKind::SelfLearningMlp: {
      baselines::MlpClassifierConfig cfg = spec.mlp_cfg;
      cfg.seed = seed;
      return baselines::self_learn(train, x_unlabeled, spec.self_learn_confidence,
                                   spec.self_learn_rounds, cfg)
          .model.predict(x_test);
    }
  }
  throw std::logic_error("train_and_score: unhandled model kind");
}

namespace {

void run_cell(const data::LabeledDataset& accepted, const data::UnlabeledDataset& rejected,
              const BenchmarkSpec& spec, std::size_t cell_id, BenchmarkCell& cell) {
  try {
    double sum = 0.0;
    for (std::size_t rep = 0; rep < spec.repeats; ++rep) {
      const std::uint64_t rep_seed = mix_seed(spec.seed, cell_id, rep);
      data::DesignSpec dspec;
      dspec.train_frac = spec.train_frac;
      dspec.n_accepted = static_cast<long>(cell.n_accepted);
      dspec.n_rejects = static_cast<long>(cell.n_rejected);
      dspec.seed = rep_seed;
      const data::Design design = data::make_design(accepted, rejected, dspec);

      const Matrix xl = data::standardize_apply(design.standardizer, design.train.features);
      const Matrix xu = data::standardize_apply(design.standardizer, design.rejects.features);
      const Matrix xt = data::standardize_apply(design.standardizer, design.test.features);

      const std::vector<double> scores = train_and_score(
          cell.model, xl, design.train.labels, xu, xt, spec, mix_seed(rep_seed, 0x88));
      eval::ScoredSet scored{scores, design.test.labels};
      const double a = eval::auc(scored);
      cell.aucs.push_back(a);
      sum += a;
    }
    cell.mean_auc = sum / static_cast<double>(spec.repeats);
  } catch (const std::exception& e) {
    cell.failed = true;
    cell.error = e.what();
    cell.aucs.clear();
    cell.mean_auc = 0.0;
  }
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

BenchmarkResult run_benchmark(const data::LabeledDataset& accepted,
                              const data::UnlabeledDataset& rejected, const BenchmarkSpec& spec) {
  if (spec.models.empty() || spec.n_accepted.empty() || spec.n_rejected.empty())
    throw std::invalid_argument("run_benchmark: empty grid");
  if (spec.repeats == 0) throw std::invalid_argument("run_benchmark: repeats must be positive");

  BenchmarkResult result;
  for (ModelKind m : spec.models)
    for (std::size_t na : spec.n_accepted)
      for (std::size_t nr : spec.n_rejected) {
        BenchmarkCell cell;
        cell.model = m;
        cell.n_accepted = na;
        cell.n_rejected = nr;
        result.cells.push_back(cell);
      }

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= result.cells.size()) break;
      run_cell(accepted, rejected, spec, i, result.cells[i]);
    }
  };

  const std::size_t nthreads =
      std::min(std::max<std::size_t>(spec.threads, 1), result.cells.size());
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return result;
}

std::string benchmark_to_text(const BenchmarkResult& r) {
  std::ostringstream out;
  out << "benchmark 1\n";
  out << "cells " << r.cells.size() << "\n";
  for (const auto& c : r.cells) {
    out << "cell " << to_string(c.model) << " " << c.n_accepted << " " << c.n_rejected;
    if (c.failed) {
      out << " failed " << c.error << "\n";
    } else {
      out << " ok " << fmt17(c.mean_auc);
      for (double a : c.aucs) out << " " << fmt17(a);
      out << "\n";
    }
  }
  return out.str();
}

}  // namespace ri::harness
