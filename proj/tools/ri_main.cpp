// Command line front end: simulate / train / evaluate / benchmark.
//
// Every command reads one "key = value" config file, applies the --seed /
// --out / --model / --threads overrides, writes its artifacts into the
// output directory and records the effective configuration in
// manifest.txt. Nothing here depends on wall-clock time, so a rerun with
// the same config and seed reproduces every output byte for byte.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ri/baselines.hpp"
#include "ri/data.hpp"
#include "ri/eval.hpp"
#include "ri/harness.hpp"
#include "ri/io.hpp"
#include "ri/model1.hpp"
#include "ri/model2.hpp"
#include "ri/nn.hpp"
#include "ri/rng.hpp"

namespace {

using namespace ri;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::string model;  // train: family override; evaluate: model-file override
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::size_t threads = 0;
  bool threads_given = false;
};

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.size() > prefix.size() && s.compare(0, prefix.size(), prefix) == 0;
}

/// Like KvFile::require_known but with an extra set of allowed key
/// prefixes (for repeated keys such as gauss.<column name>).
void check_keys(const io::KvFile& kv, std::span<const std::string> exact,
                std::span<const std::string> prefixes) {
  for (const auto& [key, value] : kv.items) {
    (void)value;
    if (std::find(exact.begin(), exact.end(), key) != exact.end()) continue;
    bool ok = false;
    for (const auto& p : prefixes)
      if (starts_with(key, p)) {
        ok = true;
        break;
      }
    if (!ok) throw std::runtime_error("unknown config key '" + key + "'");
  }
}

/// Collects keys under `prefix` into a new KvFile with the prefix removed.
io::KvFile sub_config(const io::KvFile& kv, const std::string& prefix) {
  io::KvFile out;
  for (const auto& [key, value] : kv.items)
    if (starts_with(key, prefix)) out.items.emplace_back(key.substr(prefix.size()), value);
  return out;
}

std::vector<std::string> split_words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::vector<double> parse_doubles(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const std::string& tok : split_words(text)) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw std::runtime_error(what + ": cannot parse '" + tok + "' as a number");
    }
  }
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& text, const std::string& what) {
  std::vector<std::size_t> out;
  for (const std::string& tok : split_words(text)) {
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(tok, &pos);
      if (pos != tok.size() || v < 0) throw std::invalid_argument(tok);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw std::runtime_error(what + ": cannot parse '" + tok + "' as a nonnegative integer");
    }
  }
  return out;
}

std::size_t get_count(const io::KvFile& kv, const std::string& key, std::size_t dflt) {
  const long v = kv.get_long_or(key, static_cast<long>(dflt));
  if (v < 0) throw std::runtime_error("config key '" + key + "': must be nonnegative");
  return static_cast<std::size_t>(v);
}

const std::vector<std::string> kModel1Keys = {
    "lz",   "encoder_hidden", "decoder_hidden", "gmm_hidden",     "classifier_hidden",
    "learning_rate", "beta",  "n_draws",        "epochs",         "batch_size",
    "pretrain_epochs",        "strict_alternation",               "prior_pi"};

const std::vector<std::string> kModel2Keys = {
    "lz",      "la",          "encoder_z_hidden", "decoder_hidden", "gmm_hidden",
    "encoder_a_hidden",       "classifier_hidden", "learning_rate", "beta",
    "n_draws", "n_draws_a",   "epochs",           "batch_size",     "pretrain_epochs",
    "strict_alternation",     "prior_pi"};

const std::vector<std::string> kMlpKeys = {"hidden", "learning_rate", "epochs", "batch_size"};

const std::vector<std::string> kBaselineKeys = {"l2", "threshold_rule", "cutoff", "confidence",
                                                "max_rounds"};

model1::Model1Dims dims1_from(const io::KvFile& kv) {
  model1::Model1Dims d;
  d.lz = get_count(kv, "lz", d.lz);
  if (const auto* s = kv.find("encoder_hidden")) d.encoder_hidden = parse_sizes(*s, "encoder_hidden");
  if (const auto* s = kv.find("decoder_hidden")) d.decoder_hidden = parse_sizes(*s, "decoder_hidden");
  if (const auto* s = kv.find("gmm_hidden")) d.gmm_hidden = parse_sizes(*s, "gmm_hidden");
  if (const auto* s = kv.find("classifier_hidden"))
    d.classifier_hidden = parse_sizes(*s, "classifier_hidden");
  return d;  // lx stays 0 and is filled from the data at fit time
}

model1::TrainConfig1 cfg1_from(const io::KvFile& kv) {
  model1::TrainConfig1 c;
  c.learning_rate = kv.get_double_or("learning_rate", c.learning_rate);
  c.beta = kv.get_double_or("beta", c.beta);
  c.n_draws = get_count(kv, "n_draws", c.n_draws);
  c.epochs = get_count(kv, "epochs", c.epochs);
  c.batch_size = get_count(kv, "batch_size", c.batch_size);
  c.pretrain_epochs = get_count(kv, "pretrain_epochs", c.pretrain_epochs);
  c.strict_alternation = kv.get_bool_or("strict_alternation", c.strict_alternation);
  c.prior_pi = kv.get_double_or("prior_pi", c.prior_pi);
  return c;
}

model2::Model2Dims dims2_from(const io::KvFile& kv) {
  model2::Model2Dims d;
  d.lz = get_count(kv, "lz", d.lz);
  d.la = get_count(kv, "la", d.la);
  if (const auto* s = kv.find("encoder_z_hidden"))
    d.encoder_z_hidden = parse_sizes(*s, "encoder_z_hidden");
  if (const auto* s = kv.find("decoder_hidden")) d.decoder_hidden = parse_sizes(*s, "decoder_hidden");
  if (const auto* s = kv.find("gmm_hidden")) d.gmm_hidden = parse_sizes(*s, "gmm_hidden");
  if (const auto* s = kv.find("encoder_a_hidden"))
    d.encoder_a_hidden = parse_sizes(*s, "encoder_a_hidden");
  if (const auto* s = kv.find("classifier_hidden"))
    d.classifier_hidden = parse_sizes(*s, "classifier_hidden");
  return d;
}

model2::TrainConfig2 cfg2_from(const io::KvFile& kv) {
  model2::TrainConfig2 c;
  c.learning_rate = kv.get_double_or("learning_rate", c.learning_rate);
  c.beta = kv.get_double_or("beta", c.beta);
  c.n_draws = get_count(kv, "n_draws", c.n_draws);
  c.n_draws_a = get_count(kv, "n_draws_a", c.n_draws_a);
  c.epochs = get_count(kv, "epochs", c.epochs);
  c.batch_size = get_count(kv, "batch_size", c.batch_size);
  c.pretrain_epochs = get_count(kv, "pretrain_epochs", c.pretrain_epochs);
  c.strict_alternation = kv.get_bool_or("strict_alternation", c.strict_alternation);
  c.prior_pi = kv.get_double_or("prior_pi", c.prior_pi);
  return c;
}

baselines::MlpClassifierConfig mlp_cfg_from(const io::KvFile& kv) {
  baselines::MlpClassifierConfig c;
  if (const auto* s = kv.find("hidden")) c.hidden = parse_sizes(*s, "hidden");
  c.learning_rate = kv.get_double_or("learning_rate", c.learning_rate);
  c.epochs = get_count(kv, "epochs", c.epochs);
  c.batch_size = get_count(kv, "batch_size", c.batch_size);
  return c;
}

baselines::ThresholdRule rule_from(const std::string& name) {
  if (name == "quantile") return baselines::ThresholdRule::Quantile;
  if (name == "cutoff") return baselines::ThresholdRule::FixedCutoff;
  throw std::runtime_error("threshold_rule must be 'quantile' or 'cutoff', got '" + name + "'");
}

data::SynthSpec synth_from(const io::KvFile& kv) {
  data::SynthSpec s;
  s.default_rate = kv.get_double_or("default_rate", s.default_rate);
  s.accept_noise = kv.get_double_or("accept_noise", s.accept_noise);
  s.n_accepted = get_count(kv, "n_accepted", 0);
  s.n_rejected = get_count(kv, "n_rejected", 0);
  for (const auto& [key, value] : kv.items) {
    if (starts_with(key, "gauss.")) {
      const auto v = parse_doubles(value, key);
      if (v.size() != 4)
        throw std::runtime_error(key + ": expected 'mu0 mu1 sigma accept_coef', got '" + value +
                                 "'");
      s.gauss.push_back({key.substr(6), v[0], v[1], v[2], v[3]});
    } else if (starts_with(key, "dummy.")) {
      const auto v = parse_doubles(value, key);
      if (v.size() != 1) throw std::runtime_error(key + ": expected one probability");
      s.dummies.push_back({key.substr(6), v[0]});
    }
  }
  return s;
}

data::DesignSpec design_from(const io::KvFile& kv, std::uint64_t seed) {
  data::DesignSpec d;
  d.train_frac = kv.get_double_or("train_frac", d.train_frac);
  d.n_accepted = kv.get_long_or("n_accepted", d.n_accepted);
  d.n_rejects = kv.get_long_or("n_rejects", d.n_rejects);
  d.acceptance_ratio = kv.get_double_or("acceptance_ratio", d.acceptance_ratio);
  d.max_total = kv.get_long_or("max_total", d.max_total);
  d.seed = seed;
  return d;
}

std::uint64_t effective_seed(const CommonArgs& args, const io::KvFile& kv) {
  return args.seed_given ? args.seed : kv.get_u64_or("seed", 1);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("error writing '" + path + "'");
}

void write_trace(const std::string& path, std::span<const double> trace) {
  std::string text;
  for (double v : trace) {
    text += fmt17(v);
    text += '\n';
  }
  write_text_file(path, text);
}

void write_manifest(const CommonArgs& args, const std::string& command, io::KvFile kv,
                    std::uint64_t seed) {
  kv.set("seed", std::to_string(seed));
  io::KvFile m;
  m.set("command", command);
  for (const auto& [key, value] : kv.items) m.set(key, value);
  io::save_kv(join_path(args.out_dir, "manifest.txt"), m);
}

void write_scores_csv(const std::string& path, std::span<const double> scores,
                      const std::vector<int>* labels) {
  std::string text = labels ? "score,label\n" : "score\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    text += fmt17(scores[i]);
    if (labels) {
      text += ',';
      text += std::to_string((*labels)[i]);
    }
    text += '\n';
  }
  write_text_file(path, text);
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const CommonArgs& args) {
  io::KvFile kv = io::load_kv(args.config_path);
  const std::vector<std::string> exact = {"seed", "n_accepted", "n_rejected", "default_rate",
                                          "accept_noise"};
  const std::vector<std::string> prefixes = {"gauss.", "dummy."};
  check_keys(kv, exact, prefixes);

  const std::uint64_t seed = effective_seed(args, kv);
  const data::SynthSpec spec = synth_from(kv);
  const data::SynthResult result = data::synth_generate(spec, seed);

  data::write_labeled_csv(join_path(args.out_dir, "accepted.csv"), result.accepted, "default");
  data::write_unlabeled_csv(join_path(args.out_dir, "rejected.csv"), result.rejected);

  std::string oracle_csv = "set,row,label,posterior\n";
  for (std::size_t i = 0; i < result.accepted.size(); ++i)
    oracle_csv += "accepted," + std::to_string(i) + ',' +
                  std::to_string(result.accepted.labels[i]) + ',' +
                  fmt17(result.posterior_accepted[i]) + '\n';
  for (std::size_t i = 0; i < result.rejected.size(); ++i)
    oracle_csv += "rejected," + std::to_string(i) + ',' +
                  std::to_string(result.rejected_labels[i]) + ',' +
                  fmt17(result.posterior_rejected[i]) + '\n';
  write_text_file(join_path(args.out_dir, "oracle.csv"), oracle_csv);

  io::StoredModel om;
  om.type = "oracle";
  om.oracle = result.oracle;
  io::save_model(join_path(args.out_dir, "oracle.model"), om);

  write_manifest(args, "simulate", kv, seed);

  std::size_t defaults = 0;
  for (int y : result.accepted.labels) defaults += static_cast<std::size_t>(y);
  std::cout << "accepted " << result.accepted.size() << " rows, rejected "
            << result.rejected.size() << " rows\n"
            << "accepted default rate " << fmt17(static_cast<double>(defaults) /
                                                 static_cast<double>(result.accepted.size()))
            << " (analytic " << fmt17(data::analytic_accepted_default_rate(spec)) << ")\n"
            << "oracle auc " << fmt17(result.oracle.bayes_auc) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainedArtifacts {
  io::StoredModel model;
  std::vector<double> trace;
};

TrainedArtifacts fit_model(harness::ModelKind kind, const io::KvFile& kv,
                           const data::LabeledDataset& train, const data::UnlabeledDataset& unl,
                           std::uint64_t seed) {
  TrainedArtifacts out;
  const io::KvFile base = sub_config(kv, "baseline.");
  base.require_known(kBaselineKeys);
  const double l2 = base.get_double_or("l2", 1.0);
  switch (kind) {
    case harness::ModelKind::Model1: {
      const io::KvFile mk = sub_config(kv, "model1.");
      mk.require_known(kModel1Keys);
      model1::TrainConfig1 cfg = cfg1_from(mk);
      cfg.seed = seed;
      const auto res = model1::train1(train, unl, dims1_from(mk), cfg);
      out.model.type = "model1";
      out.model.m1 = res.params;
      out.trace = res.loss_trace;
      break;
    }
    case harness::ModelKind::Model2: {
      const io::KvFile mk = sub_config(kv, "model2.");
      mk.require_known(kModel2Keys);
      model2::TrainConfig2 cfg = cfg2_from(mk);
      cfg.seed = seed;
      const auto res = model2::train2(train, unl, dims2_from(mk), cfg);
      out.model.type = "model2";
      out.model.m2 = res.params;
      out.trace = res.loss_trace;
      break;
    }
    case harness::ModelKind::Mlp: {
      const io::KvFile mk = sub_config(kv, "mlp.");
      mk.require_known(kMlpKeys);
      baselines::MlpClassifierConfig cfg = mlp_cfg_from(mk);
      cfg.seed = seed;
      const auto res = baselines::supervised_mlp(train, cfg);
      out.model.type = "mlp";
      out.model.mlp = res.net;
      out.trace = res.loss_trace;
      break;
    }
    case harness::ModelKind::SelfLearningMlp: {
      const io::KvFile mk = sub_config(kv, "mlp.");
      mk.require_known(kMlpKeys);
      baselines::MlpClassifierConfig cfg = mlp_cfg_from(mk);
      cfg.seed = seed;
      const auto res =
          baselines::self_learn(train, unl.features, base.get_double_or("confidence", 0.9),
                                get_count(base, "max_rounds", 3), cfg);
      out.model.type = "mlp";
      out.model.mlp = res.model.net;
      out.trace = res.model.loss_trace;
      break;
    }
    case harness::ModelKind::Reclassification: {
      const auto rule = rule_from(base.get_string_or("threshold_rule", "quantile"));
      const double cutoff = base.get_double_or("cutoff", 0.5);
      out.model.type = "logistic";
      out.model.logistic = baselines::fit_reclassification(train, unl.features, l2, rule, cutoff);
      break;
    }
    case harness::ModelKind::FuzzyParceling: {
      out.model.type = "logistic";
      out.model.logistic = baselines::fit_fuzzy_parceling(train, unl.features, l2);
      break;
    }
    case harness::ModelKind::Augmentation: {
      out.model.type = "logistic";
      out.model.logistic = baselines::fit_augmentation(train, unl.features, l2);
      break;
    }
  }
  return out;
}

int cmd_train(const CommonArgs& args) {
  io::KvFile kv = io::load_kv(args.config_path);
  const std::vector<std::string> exact = {"model",      "accepted",  "rejected",
                                          "label_column", "seed",    "train_frac",
                                          "n_accepted", "n_rejects", "acceptance_ratio",
                                          "max_total"};
  const std::vector<std::string> prefixes = {"model1.", "model2.", "mlp.", "baseline."};
  check_keys(kv, exact, prefixes);

  const std::uint64_t seed = effective_seed(args, kv);
  const std::string model_name = args.model.empty() ? kv.get_string("model") : args.model;
  const harness::ModelKind kind = harness::model_kind_from(model_name);
  const std::string label_column = kv.get_string_or("label_column", "default");

  data::CsvLoadStats astats, rstats;
  const data::LabeledDataset accepted =
      data::load_labeled_csv(kv.get_string("accepted"), label_column, &astats);
  data::UnlabeledDataset rejected;
  if (kv.has("rejected")) {
    rejected = data::load_unlabeled_csv(kv.get_string("rejected"), &rstats);
  } else {
    rejected.features = Matrix(0, accepted.features.cols);
    rejected.names = accepted.names;
  }

  const data::Design design = data::make_design(accepted, rejected, design_from(kv, seed));
  data::LabeledDataset train{data::standardize_apply(design.standardizer, design.train.features),
                             design.train.labels, design.standardizer.names};
  data::UnlabeledDataset unl{data::standardize_apply(design.standardizer, design.rejects.features),
                             design.standardizer.names};

  TrainedArtifacts fitted = fit_model(kind, kv, train, unl, mix_seed(seed, 0x88));
  fitted.model.standardizer = design.standardizer;

  io::save_model(join_path(args.out_dir, "model.txt"), fitted.model);
  write_trace(join_path(args.out_dir, "loss.txt"), fitted.trace);
  data::write_labeled_csv(join_path(args.out_dir, "test.csv"), design.test, label_column);
  kv.set("model", model_name);
  write_manifest(args, "train", kv, seed);

  std::cout << "trained " << harness::to_string(kind) << " on " << train.size() << " labeled + "
            << unl.size() << " unlabeled rows (" << design.test.size() << " held out)\n";
  if (astats.dropped_missing + rstats.dropped_missing > 0)
    std::cout << "dropped " << (astats.dropped_missing + rstats.dropped_missing)
              << " rows with missing cells\n";
  if (!fitted.trace.empty()) std::cout << "final loss " << fmt17(fitted.trace.back()) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

std::vector<double> score_model(const io::StoredModel& m, const Matrix& x, std::size_t predict_mc,
                                std::uint64_t seed) {
  if (m.type == "model1") return model1::predict_proba1(*m.m1, x);
  if (m.type == "model2") return model2::predict_proba2(*m.m2, x, predict_mc, seed);
  if (m.type == "logistic") return m.logistic->predict(x);
  if (m.type == "mlp") {
    const auto heads = nn::mlp_forward(*m.mlp, x);
    const Matrix& probs = heads.at(*m.mlp, "probs");
    std::vector<double> out(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) out[i] = probs(i, 1);
    return out;
  }
  if (m.type == "oracle") {
    std::vector<double> out(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i)
      out[i] = m.oracle->posterior(std::span<const double>(x.row(i), x.cols));
    return out;
  }
  throw std::runtime_error("cannot score model type '" + m.type + "'");
}

int cmd_evaluate(const CommonArgs& args) {
  io::KvFile kv = io::load_kv(args.config_path);
  const std::vector<std::string> exact = {"model",           "test", "label_column",
                                          "seed",            "absolute_cutoff",
                                          "predict_mc"};
  check_keys(kv, exact, {});

  const std::uint64_t seed = effective_seed(args, kv);
  const std::string model_path = args.model.empty() ? kv.get_string("model") : args.model;
  const io::StoredModel model = io::load_model(model_path);
  const std::string label_column = kv.get_string_or("label_column", "default");
  const data::LabeledDataset test = data::load_labeled_csv(kv.get_string("test"), label_column);

  const Matrix x = model.standardizer
                       ? data::standardize_apply(*model.standardizer, test.features)
                       : test.features;
  const std::vector<double> scores =
      score_model(model, x, get_count(kv, "predict_mc", 100), mix_seed(seed, 0x77));

  eval::ScoredSet set{scores, test.labels};
  const eval::MetricsReport report =
      eval::evaluate_scores(set, seed, kv.get_bool_or("absolute_cutoff", false));
  const std::string text = eval::metrics_to_text(report);

  write_text_file(join_path(args.out_dir, "metrics.txt"), text);
  write_scores_csv(join_path(args.out_dir, "scores.csv"), scores, &test.labels);
  kv.set("model", model_path);
  write_manifest(args, "evaluate", kv, seed);

  std::cout << text;
  return 0;
}

// ---------------------------------------------------------------------------
// benchmark

int cmd_benchmark(const CommonArgs& args) {
  io::KvFile kv = io::load_kv(args.config_path);
  const std::vector<std::string> exact = {
      "accepted",   "rejected",     "label_column", "seed",       "models",
      "grid_accepted", "grid_rejected", "repeats",  "train_frac", "threads",
      "predict_mc", "n_accepted",   "n_rejected",   "default_rate", "accept_noise"};
  const std::vector<std::string> prefixes = {"gauss.", "dummy.", "model1.", "model2.", "mlp.",
                                             "baseline."};
  check_keys(kv, exact, prefixes);

  const std::uint64_t seed = effective_seed(args, kv);

  data::LabeledDataset accepted;
  data::UnlabeledDataset rejected;
  if (kv.has("accepted")) {
    const std::string label_column = kv.get_string_or("label_column", "default");
    accepted = data::load_labeled_csv(kv.get_string("accepted"), label_column);
    if (kv.has("rejected")) {
      rejected = data::load_unlabeled_csv(kv.get_string("rejected"));
    } else {
      rejected.features = Matrix(0, accepted.features.cols);
      rejected.names = accepted.names;
    }
  } else {
    const data::SynthSpec spec = synth_from(kv);
    if (spec.gauss.empty())
      throw std::runtime_error(
          "benchmark config needs either dataset paths or generator columns (gauss.*)");
    const data::SynthResult sim = data::synth_generate(spec, mix_seed(seed, 0xda7a));
    accepted = sim.accepted;
    rejected = sim.rejected;
  }

  harness::BenchmarkSpec spec;
  for (const std::string& name : split_words(kv.get_string("models")))
    spec.models.push_back(harness::model_kind_from(name));
  spec.n_accepted = parse_sizes(kv.get_string("grid_accepted"), "grid_accepted");
  spec.n_rejected = parse_sizes(kv.get_string("grid_rejected"), "grid_rejected");
  spec.repeats = get_count(kv, "repeats", spec.repeats);
  spec.train_frac = kv.get_double_or("train_frac", spec.train_frac);
  spec.seed = seed;
  spec.threads = args.threads_given ? args.threads : get_count(kv, "threads", spec.threads);
  spec.predict_mc = get_count(kv, "predict_mc", spec.predict_mc);

  const io::KvFile m1 = sub_config(kv, "model1.");
  m1.require_known(kModel1Keys);
  spec.dims1 = dims1_from(m1);
  spec.cfg1 = cfg1_from(m1);
  const io::KvFile m2 = sub_config(kv, "model2.");
  m2.require_known(kModel2Keys);
  spec.dims2 = dims2_from(m2);
  spec.cfg2 = cfg2_from(m2);
  const io::KvFile mlp = sub_config(kv, "mlp.");
  mlp.require_known(kMlpKeys);
  spec.mlp_cfg = mlp_cfg_from(mlp);
  const io::KvFile base = sub_config(kv, "baseline.");
  base.require_known(kBaselineKeys);
  spec.logreg_l2 = base.get_double_or("l2", spec.logreg_l2);
  spec.self_learn_confidence = base.get_double_or("confidence", spec.self_learn_confidence);
  spec.self_learn_rounds = get_count(base, "max_rounds", spec.self_learn_rounds);

  const harness::BenchmarkResult result = harness::run_benchmark(accepted, rejected, spec);
  const std::string table = harness::benchmark_to_text(result);
  write_text_file(join_path(args.out_dir, "benchmark.txt"), table);
  write_manifest(args, "benchmark", kv, seed);
  std::cout << table;

  int failures = 0;
  for (const auto& cell : result.cells)
    if (cell.failed) {
      ++failures;
      std::cerr << "cell " << harness::to_string(cell.model) << ' ' << cell.n_accepted << ' '
                << cell.n_rejected << " failed: " << cell.error << "\n";
    }
  return failures > 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semi-supervised reject inference: data, models, benchmarks"};
  app.require_subcommand(1);

  CommonArgs args;
  auto add_common = [&args](CLI::App* sub, bool with_model, bool with_threads) {
    sub->add_option("--config", args.config_path, "key = value config file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", args.seed, "override the config seed");
    sub->add_option("--out", args.out_dir, "output directory (created if missing)");
    if (with_model) sub->add_option("--model", args.model, "override the config model");
    if (with_threads) sub->add_option("--threads", args.threads, "worker threads");
  };

  CLI::App* sim = app.add_subcommand("simulate", "draw a synthetic accept/reject data set");
  add_common(sim, false, false);
  CLI::App* train = app.add_subcommand("train", "fit a model and persist it");
  add_common(train, true, false);
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "score a test set with a stored model");
  add_common(eval_cmd, true, false);
  CLI::App* bench = app.add_subcommand("benchmark", "repeated-split grid benchmark");
  add_common(bench, false, true);

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* sub = app.get_subcommands().front();
    args.seed_given = sub->count("--seed") > 0;
    const CLI::Option* threads_opt = sub->get_option_no_throw("--threads");
    args.threads_given = threads_opt != nullptr && threads_opt->count() > 0;
    std::filesystem::create_directories(args.out_dir);
    if (sub == sim) return cmd_simulate(args);
    if (sub == train) return cmd_train(args);
    if (sub == eval_cmd) return cmd_evaluate(args);
    return cmd_benchmark(args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
