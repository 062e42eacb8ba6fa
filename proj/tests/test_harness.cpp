#include <string>
#include <vector>

#include "doctest.h"
#include "ri/harness.hpp"
#include "ri/rng.hpp"

using namespace ri::harness;
using ri::Matrix;

namespace {

// Two well-separated blobs split into an accepted pool and a reject pool.
struct Pools {
  ri::data::LabeledDataset accepted;
  ri::data::UnlabeledDataset rejected;
};

Pools blob_pools(std::size_t n_acc, std::size_t n_rej, std::uint64_t seed) {
  ri::Rng rng(seed);
  Pools p;
  p.accepted.names = {"f0", "f1"};
  p.accepted.features = Matrix(n_acc, 2);
  p.accepted.labels.resize(n_acc);
  for (std::size_t i = 0; i < n_acc; ++i) {
    const int y = static_cast<int>(i % 2);
    p.accepted.labels[i] = y;
    p.accepted.features(i, 0) = (y ? 1.2 : -1.2) + 0.5 * rng.normal();
    p.accepted.features(i, 1) = (y ? -1.2 : 1.2) + 0.5 * rng.normal();
  }
  p.rejected.names = p.accepted.names;
  p.rejected.features = Matrix(n_rej, 2);
  for (std::size_t i = 0; i < n_rej; ++i) {
    const int y = static_cast<int>(i % 2);
    p.rejected.features(i, 0) = (y ? 1.2 : -1.2) + 0.5 * rng.normal();
    p.rejected.features(i, 1) = (y ? -1.2 : 1.2) + 0.5 * rng.normal();
  }
  return p;
}

BenchmarkSpec small_spec() {
  BenchmarkSpec spec;
  spec.models = {ModelKind::Mlp, ModelKind::Reclassification, ModelKind::FuzzyParceling,
                 ModelKind::Augmentation};
  spec.n_accepted = {24};
  spec.n_rejected = {16};
  spec.repeats = 2;
  spec.seed = 31;
  spec.mlp_cfg.hidden = {4};
  spec.mlp_cfg.epochs = 10;
  spec.mlp_cfg.learning_rate = 5e-3;
  return spec;
}

}  // namespace

TEST_CASE("model kind names round trip and reject the unknown") {
  const ModelKind kinds[] = {ModelKind::Model1,       ModelKind::Model2,
                             ModelKind::Mlp,          ModelKind::Reclassification,
                             ModelKind::FuzzyParceling, ModelKind::Augmentation,
                             ModelKind::SelfLearningMlp};
  for (ModelKind k : kinds) CHECK(model_kind_from(to_string(k)) == k);
  CHECK(to_string(ModelKind::FuzzyParceling) == "fuzzy_parceling");
  CHECK_THROWS_AS((void)model_kind_from("boosted_trees"), std::runtime_error);
}

TEST_CASE("benchmark output is identical across worker counts") {
  const Pools p = blob_pools(60, 30, 201);
  BenchmarkSpec spec = small_spec();

  spec.threads = 1;
  const BenchmarkResult serial = run_benchmark(p.accepted, p.rejected, spec);
  spec.threads = 4;
  const BenchmarkResult parallel = run_benchmark(p.accepted, p.rejected, spec);
  spec.threads = 999;  // more workers than cells
  const BenchmarkResult oversub = run_benchmark(p.accepted, p.rejected, spec);

  const std::string text = benchmark_to_text(serial);
  CHECK(text == benchmark_to_text(parallel));
  CHECK(text == benchmark_to_text(oversub));

  REQUIRE(serial.cells.size() == 4);  // 4 models x 1 x 1
  for (const auto& c : serial.cells) {
    CHECK_FALSE(c.failed);
    REQUIRE(c.aucs.size() == 2);
    double sum = 0.0;
    for (double a : c.aucs) {
      CHECK(a >= 0.0);
      CHECK(a <= 1.0);
      sum += a;
    }
    CHECK(c.mean_auc == sum / 2.0);
    // Blobs this clean should separate well under every model.
    CHECK(c.mean_auc > 0.8);
  }
}

TEST_CASE("grid order is models by accepted by rejected") {
  const Pools p = blob_pools(60, 30, 211);
  BenchmarkSpec spec = small_spec();
  spec.models = {ModelKind::Reclassification, ModelKind::Augmentation};
  spec.n_accepted = {16, 24};
  spec.n_rejected = {8, 16};
  spec.repeats = 1;
  const BenchmarkResult r = run_benchmark(p.accepted, p.rejected, spec);
  REQUIRE(r.cells.size() == 8);
  CHECK(r.cells[0].model == ModelKind::Reclassification);
  CHECK(r.cells[0].n_accepted == 16);
  CHECK(r.cells[0].n_rejected == 8);
  CHECK(r.cells[1].n_rejected == 16);
  CHECK(r.cells[2].n_accepted == 24);
  CHECK(r.cells[4].model == ModelKind::Augmentation);

  const std::string text = benchmark_to_text(r);
  CHECK(text.find("benchmark 1\n") == 0);
  CHECK(text.find("cells 8\n") != std::string::npos);
  CHECK(text.find("cell reclassification 16 8 ok ") != std::string::npos);
  CHECK(text.find("cell augmentation 24 16 ok ") != std::string::npos);
}

TEST_CASE("a failing cell is recorded without sinking the run") {
  const Pools p = blob_pools(60, 30, 221);
  BenchmarkSpec spec = small_spec();
  spec.models = {ModelKind::Reclassification};
  spec.n_rejected = {16, 500};  // 500 rejects do not exist
  spec.repeats = 1;
  const BenchmarkResult r = run_benchmark(p.accepted, p.rejected, spec);
  REQUIRE(r.cells.size() == 2);
  CHECK_FALSE(r.cells[0].failed);
  CHECK(r.cells[1].failed);
  CHECK(r.cells[1].aucs.empty());
  CHECK(r.cells[1].error.find("rejects") != std::string::npos);
  CHECK(benchmark_to_text(r).find("failed") != std::string::npos);

  BenchmarkSpec bad = small_spec();
  bad.models.clear();
  CHECK_THROWS_AS((void)run_benchmark(p.accepted, p.rejected, bad), std::invalid_argument);
  bad = small_spec();
  bad.repeats = 0;
  CHECK_THROWS_AS((void)run_benchmark(p.accepted, p.rejected, bad), std::invalid_argument);
}

TEST_CASE("train_and_score covers the deep models deterministically") {
  const Pools p = blob_pools(40, 20, 231);
  const auto std_fit = ri::data::fit_standardizer(p.accepted.features, {});
  const Matrix xl = ri::data::standardize_apply(std_fit, p.accepted.features);
  const Matrix xu = ri::data::standardize_apply(std_fit, p.rejected.features);

  BenchmarkSpec spec;
  spec.dims1.lz = 2;
  spec.dims1.encoder_hidden = {4};
  spec.dims1.decoder_hidden = {4};
  spec.dims1.gmm_hidden = {3};
  spec.dims1.classifier_hidden = {4};
  spec.cfg1.epochs = 4;
  spec.cfg1.learning_rate = 1e-3;
  spec.dims2.lz = 2;
  spec.dims2.la = 2;
  spec.dims2.encoder_z_hidden = {4};
  spec.dims2.encoder_a_hidden = {3};
  spec.dims2.decoder_hidden = {4};
  spec.dims2.gmm_hidden = {3};
  spec.dims2.classifier_hidden = {4};
  spec.cfg2.epochs = 3;
  spec.cfg2.learning_rate = 1e-3;
  spec.predict_mc = 8;
  spec.mlp_cfg.hidden = {4};
  spec.mlp_cfg.epochs = 8;
  spec.self_learn_rounds = 1;

  for (ModelKind kind : {ModelKind::Model1, ModelKind::Model2, ModelKind::SelfLearningMlp}) {
    const auto a = train_and_score(kind, xl, p.accepted.labels, xu, xl, spec, 91);
    const auto b = train_and_score(kind, xl, p.accepted.labels, xu, xl, spec, 91);
    REQUIRE(a.size() == xl.rows);
    CHECK(a == b);
    const auto c = train_and_score(kind, xl, p.accepted.labels, xu, xl, spec, 92);
    CHECK(a != c);
    for (double v : a) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}
