#include "ri/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ri/rng.hpp"

namespace ri::data {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

double phi_cdf(double t) { return 0.5 * std::erfc(-t * kInvSqrt2); }
double phi_tail(double t) { return 0.5 * std::erfc(t * kInvSqrt2); }

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.push_back(trim(cur));
  return cells;
}

bool is_missing(const std::string& cell) {
  if (cell.empty()) return true;
  std::string low;
  for (char c : cell) low.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return low == "na" || low == "nan";
}

struct RawCsv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  CsvLoadStats stats;
};

RawCsv load_raw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  RawCsv raw;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      raw.header = split_line(line);
      if (raw.header.empty() || raw.header.front().empty())
        throw std::runtime_error(path + ": missing header row");
      continue;
    }
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != raw.header.size())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(raw.header.size()) + " cells, found " +
                               std::to_string(cells.size()));
    bool missing = false;
    for (const auto& c : cells)
      if (is_missing(c)) {
        missing = true;
        break;
      }
    if (missing) {
      ++raw.stats.dropped_missing;
      continue;
    }
    std::vector<double> parsed(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      std::size_t used = 0;
      try {
        parsed[j] = std::stod(cells[j], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != cells[j].size())
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": cannot parse '" +
                                 cells[j] + "' in column '" + raw.header[j] + "'");
    }
    raw.rows.push_back(std::move(parsed));
  }
  raw.stats.kept = raw.rows.size();
  return raw;
}

Matrix rows_to_matrix(const std::vector<std::vector<double>>& rows, std::size_t cols) {
  Matrix m(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i].begin(), rows[i].end(), m.row(i));
  return m;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Matrix& features, const std::vector<int>* labels,
               const std::string& label_column) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  if (labels) out << (header.empty() ? "" : ",") << label_column;
  out << "\n";
  for (std::size_t i = 0; i < features.rows; ++i) {
    for (std::size_t j = 0; j < features.cols; ++j)
      out << (j ? "," : "") << fmt17(features(i, j));
    if (labels) out << "," << (*labels)[i];
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace

std::size_t LabeledDataset::n_class(int y) const {
  std::size_t n = 0;
  for (int v : labels) n += (v == y) ? 1 : 0;
  return n;
}

LabeledDataset load_labeled_csv(const std::string& path, const std::string& label_column,
                                CsvLoadStats* stats) {
  RawCsv raw = load_raw(path);
  if (stats) *stats = raw.stats;
  const auto it = std::find(raw.header.begin(), raw.header.end(), label_column);
  if (it == raw.header.end())
    throw std::runtime_error(path + ": label column '" + label_column + "' not found");
  const std::size_t lcol = static_cast<std::size_t>(it - raw.header.begin());

  LabeledDataset ds;
  for (std::size_t j = 0; j < raw.header.size(); ++j)
    if (j != lcol) ds.names.push_back(raw.header[j]);
  ds.features = Matrix(raw.rows.size(), raw.header.size() - 1);
  ds.labels.resize(raw.rows.size());
  for (std::size_t i = 0; i < raw.rows.size(); ++i) {
    const double lv = raw.rows[i][lcol];
    if (lv != 0.0 && lv != 1.0)
      throw std::runtime_error(path + ": label column '" + label_column +
                               "' must hold 0/1 values, found " + fmt17(lv));
    ds.labels[i] = lv == 1.0 ? 1 : 0;
    std::size_t k = 0;
    for (std::size_t j = 0; j < raw.header.size(); ++j)
      if (j != lcol) ds.features(i, k++) = raw.rows[i][j];
  }
  return ds;
}

UnlabeledDataset load_unlabeled_csv(const std::string& path, CsvLoadStats* stats) {
  RawCsv raw = load_raw(path);
  if (stats) *stats = raw.stats;
  UnlabeledDataset ds;
  ds.names = raw.header;
  ds.features = rows_to_matrix(raw.rows, raw.header.size());
  return ds;
}

void write_labeled_csv(const std::string& path, const LabeledDataset& ds,
                       const std::string& label_column) {
  if (ds.labels.size() != ds.size())
    throw std::invalid_argument("write_labeled_csv: label count mismatch");
  write_csv(path, ds.names, ds.features, &ds.labels, label_column);
}

void write_unlabeled_csv(const std::string& path, const UnlabeledDataset& ds) {
  write_csv(path, ds.names, ds.features, nullptr, "");
}

Standardizer fit_standardizer(const Matrix& x, const std::vector<std::string>& names) {
  if (x.rows < 2) throw std::invalid_argument("fit_standardizer: need at least two rows");
  if (!names.empty() && names.size() != x.cols)
    throw std::invalid_argument("fit_standardizer: name count mismatch");
  Standardizer s;
  const double n = static_cast<double>(x.rows);
  for (std::size_t j = 0; j < x.cols; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) mean += x(i, j);
    mean /= n;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
      const double d = x(i, j) - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / (n - 1.0));
    const std::string name = names.empty() ? "col" + std::to_string(j) : names[j];
    if (sd > 0.0) {
      s.kept.push_back(j);
      s.names.push_back(name);
      s.mean.push_back(mean);
      s.stddev.push_back(sd);
    } else {
      s.dropped.push_back(name);
    }
  }
  if (s.kept.empty()) throw std::invalid_argument("fit_standardizer: every column is constant");
  return s;
}

Matrix standardize_apply(const Standardizer& s, const Matrix& x) {
  const std::size_t want = s.kept.size() + s.dropped.size();
  if (x.cols != want)
    throw std::invalid_argument("standardize_apply: expected " + std::to_string(want) +
                                " columns, got " + std::to_string(x.cols));
  Matrix out(x.rows, s.kept.size());
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t k = 0; k < s.kept.size(); ++k)
      out(i, k) = (x(i, s.kept[k]) - s.mean[k]) / s.stddev[k];
  return out;
}

Design make_design(const LabeledDataset& accepted, const UnlabeledDataset& rejected,
                   const DesignSpec& spec) {
  if (!(spec.train_frac > 0.0 && spec.train_frac < 1.0))
    throw std::invalid_argument("make_design: train_frac must lie in (0, 1)");
  if (accepted.size() == 0) throw std::invalid_argument("make_design: empty accepted pool");
  if (accepted.labels.size() != accepted.size())
    throw std::invalid_argument("make_design: label count mismatch");
  if (rejected.size() > 0 && rejected.features.cols != accepted.features.cols)
    throw std::invalid_argument("make_design: feature width mismatch");
  if (spec.n_rejects >= 0 && spec.acceptance_ratio > 0.0)
    throw std::invalid_argument("make_design: set n_rejects or acceptance_ratio, not both");

  // Stratified split: shuffle within each class, send train_frac of each to
  // training. Membership depends only on the seed.
  std::vector<std::size_t> idx[2];
  for (std::size_t i = 0; i < accepted.size(); ++i)
    idx[accepted.labels[i] == 1 ? 1 : 0].push_back(i);
  Rng split_rng(mix_seed(spec.seed, 0x51));
  std::vector<std::size_t> train_idx[2], test_idx;
  for (int c = 0; c < 2; ++c) {
    split_rng.shuffle(idx[c]);
    const std::size_t ntr = static_cast<std::size_t>(
        std::llround(spec.train_frac * static_cast<double>(idx[c].size())));
    train_idx[c].assign(idx[c].begin(), idx[c].begin() + static_cast<std::ptrdiff_t>(ntr));
    test_idx.insert(test_idx.end(), idx[c].begin() + static_cast<std::ptrdiff_t>(ntr),
                    idx[c].end());
  }

  // Balance by down-sampling the majority class, then apply the optional
  // cap on the balanced labeled set.
  std::size_t per_class = std::min(train_idx[0].size(), train_idx[1].size());
  if (spec.n_accepted >= 0)
    per_class = std::min(per_class, static_cast<std::size_t>(spec.n_accepted) / 2);
  if (per_class == 0) throw std::invalid_argument("make_design: a training class is empty");
  const std::size_t before = train_idx[0].size() + train_idx[1].size();

  std::vector<std::size_t> selected;
  for (int c = 0; c < 2; ++c)
    selected.insert(selected.end(), train_idx[c].begin(),
                    train_idx[c].begin() + static_cast<std::ptrdiff_t>(per_class));
  std::sort(selected.begin(), selected.end());
  std::sort(test_idx.begin(), test_idx.end());

  Design out;
  out.dropped_labeled = before - selected.size();
  out.train.names = accepted.names;
  out.train.features = take_rows(accepted.features, selected);
  for (std::size_t i : selected) out.train.labels.push_back(accepted.labels[i]);
  out.test.names = accepted.names;
  out.test.features = take_rows(accepted.features, test_idx);
  for (std::size_t i : test_idx) out.test.labels.push_back(accepted.labels[i]);

  // Reject selection: an explicit count, or a count implied by the target
  // acceptance ratio, defaulting to the whole pool; max_total caps the sum.
  const std::size_t n_lab = out.train.size();
  const std::size_t m_avail = rejected.size();
  std::size_t want_rejects;
  if (spec.n_rejects >= 0) {
    want_rejects = static_cast<std::size_t>(spec.n_rejects);
    if (want_rejects > m_avail)
      throw std::invalid_argument("make_design: n_rejects = " + std::to_string(want_rejects) +
                                  " but only " + std::to_string(m_avail) + " rejects exist");
  } else if (spec.acceptance_ratio > 0.0) {
    if (spec.acceptance_ratio >= 1.0)
      throw std::invalid_argument("make_design: acceptance_ratio must lie in (0, 1)");
    want_rejects = static_cast<std::size_t>(std::llround(
        static_cast<double>(n_lab) * (1.0 - spec.acceptance_ratio) / spec.acceptance_ratio));
    if (want_rejects > m_avail)
      throw std::invalid_argument(
          "make_design: acceptance_ratio " + std::to_string(spec.acceptance_ratio) + " needs " +
          std::to_string(want_rejects) + " rejects but only " + std::to_string(m_avail) +
          " exist");
  } else {
    want_rejects = m_avail;
  }
  if (spec.max_total >= 0) {
    const std::size_t cap = static_cast<std::size_t>(spec.max_total);
    if (n_lab > cap)
      throw std::invalid_argument("make_design: max_total smaller than the labeled training set");
    if (spec.acceptance_ratio > 0.0 && n_lab + want_rejects > cap)
      throw std::invalid_argument(
          "make_design: acceptance_ratio and max_total are jointly infeasible");
    want_rejects = std::min(want_rejects, cap - n_lab);
  }

  std::vector<std::size_t> rej_idx(m_avail);
  std::iota(rej_idx.begin(), rej_idx.end(), 0);
  Rng rej_rng(mix_seed(spec.seed, 0x52));
  rej_rng.shuffle(rej_idx);
  rej_idx.resize(want_rejects);
  std::sort(rej_idx.begin(), rej_idx.end());
  out.rejects.names = rejected.names;
  out.rejects.features = take_rows(rejected.features, rej_idx);

  // The unlabeled features feed the models too, so the scaling is fitted on
  // the union of selected training rows.
  Matrix all(n_lab + want_rejects, accepted.features.cols);
  for (std::size_t i = 0; i < n_lab; ++i)
    std::copy(out.train.features.row(i), out.train.features.row(i) + all.cols, all.row(i));
  for (std::size_t i = 0; i < want_rejects; ++i)
    std::copy(out.rejects.features.row(i), out.rejects.features.row(i) + all.cols,
              all.row(n_lab + i));
  out.standardizer = fit_standardizer(all, accepted.names);
  return out;
}

void SynthSpec::validate() const {
  if (gauss.empty() && dummies.empty())
    throw std::invalid_argument("SynthSpec: at least one column required");
  for (const auto& c : gauss)
    if (!(c.sigma > 0.0))
      throw std::invalid_argument("SynthSpec: column '" + c.name + "' needs sigma > 0");
  for (const auto& c : dummies)
    if (!(c.p >= 0.0 && c.p <= 1.0))
      throw std::invalid_argument("SynthSpec: dummy '" + c.name + "' needs p in [0, 1]");
  if (!(default_rate > 0.0 && default_rate < 1.0))
    throw std::invalid_argument("SynthSpec: default_rate must lie in (0, 1)");
  if (accept_noise < 0.0) throw std::invalid_argument("SynthSpec: accept_noise must be >= 0");
  if (n_accepted == 0) throw std::invalid_argument("SynthSpec: n_accepted must be positive");
}

namespace {

// Population mean and stddev of each Gaussian column under the label mixture.
void population_moments(const SynthSpec& spec, std::vector<double>& mean,
                        std::vector<double>& sd) {
  const double pi1 = spec.default_rate;
  mean.resize(spec.gauss.size());
  sd.resize(spec.gauss.size());
  for (std::size_t j = 0; j < spec.gauss.size(); ++j) {
    const auto& c = spec.gauss[j];
    mean[j] = (1.0 - pi1) * c.mu0 + pi1 * c.mu1;
    const double between = pi1 * (1.0 - pi1) * (c.mu1 - c.mu0) * (c.mu1 - c.mu0);
    sd[j] = std::sqrt(c.sigma * c.sigma + between);
  }
}

// Class-conditional moments of the acceptance score (linear in the
// standardized Gaussian columns plus independent noise).
struct ScoreLaw {
  double mu[2];
  double sigma;
};

ScoreLaw score_law(const SynthSpec& spec) {
  std::vector<double> mean, sd;
  population_moments(spec, mean, sd);
  ScoreLaw law{{0.0, 0.0}, 0.0};
  double var = spec.accept_noise * spec.accept_noise;
  for (std::size_t j = 0; j < spec.gauss.size(); ++j) {
    const auto& c = spec.gauss[j];
    law.mu[0] += c.accept_coef * (c.mu0 - mean[j]) / sd[j];
    law.mu[1] += c.accept_coef * (c.mu1 - mean[j]) / sd[j];
    var += c.accept_coef * c.accept_coef * (c.sigma / sd[j]) * (c.sigma / sd[j]);
  }
  law.sigma = std::sqrt(var);
  return law;
}

}  // namespace

double SynthOracle::posterior(std::span<const double> x) const {
  if (x.size() != w.size()) throw std::invalid_argument("SynthOracle: feature width mismatch");
  double t = b;
  for (std::size_t j = 0; j < w.size(); ++j) t += w[j] * x[j];
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

SynthOracle make_oracle(const SynthSpec& spec) {
  spec.validate();
  SynthOracle o;
  const double pi1 = spec.default_rate;
  o.b = std::log(pi1 / (1.0 - pi1));
  double delta2 = 0.0;  // squared Mahalanobis distance between class means
  for (const auto& c : spec.gauss) {
    const double v = c.sigma * c.sigma;
    o.w.push_back((c.mu1 - c.mu0) / v);
    o.b += (c.mu0 * c.mu0 - c.mu1 * c.mu1) / (2.0 * v);
    delta2 += (c.mu1 - c.mu0) * (c.mu1 - c.mu0) / v;
  }
  for (std::size_t j = 0; j < spec.dummies.size(); ++j) o.w.push_back(0.0);
  o.bayes_auc = phi_cdf(std::sqrt(delta2) * kInvSqrt2);
  return o;
}

double analytic_accepted_default_rate(const SynthSpec& spec) {
  spec.validate();
  if (spec.n_rejected == 0) return spec.default_rate;
  const ScoreLaw law = score_law(spec);
  const double pi1 = spec.default_rate;
  const double rate =
      static_cast<double>(spec.n_accepted) / static_cast<double>(spec.n_accepted + spec.n_rejected);
  if (law.sigma == 0.0) return pi1;  // score carries no information

  auto accept_prob = [&](double tau) {
    return (1.0 - pi1) * phi_tail((tau - law.mu[0]) / law.sigma) +
           pi1 * phi_tail((tau - law.mu[1]) / law.sigma);
  };
  // Threshold solving P(score >= tau) = acceptance rate, by bisection.
  double lo = std::min(law.mu[0], law.mu[1]) - 12.0 * law.sigma;
  double hi = std::max(law.mu[0], law.mu[1]) + 12.0 * law.sigma;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (accept_prob(mid) > rate)
      lo = mid;
    else
      hi = mid;
  }
  const double tau = 0.5 * (lo + hi);
  return pi1 * phi_tail((tau - law.mu[1]) / law.sigma) / rate;
}

SynthResult synth_generate(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t n = spec.n_accepted + spec.n_rejected;
  const std::size_t d = spec.gauss.size() + spec.dummies.size();

  std::vector<double> pop_mean, pop_sd;
  population_moments(spec, pop_mean, pop_sd);

  Rng rng(mix_seed(seed, 0x61));
  Matrix x(n, d);
  std::vector<int> y(n);
  std::vector<double> score(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = rng.uniform() < spec.default_rate ? 1 : 0;
    double s = 0.0;
    for (std::size_t j = 0; j < spec.gauss.size(); ++j) {
      const auto& c = spec.gauss[j];
      const double v = (y[i] == 1 ? c.mu1 : c.mu0) + c.sigma * rng.normal();
      x(i, j) = v;
      s += c.accept_coef * (v - pop_mean[j]) / pop_sd[j];
    }
    for (std::size_t j = 0; j < spec.dummies.size(); ++j)
      x(i, spec.gauss.size() + j) = rng.uniform() < spec.dummies[j].p ? 1.0 : 0.0;
    score[i] = s + spec.accept_noise * rng.normal();
  }

  // Accept exactly the n_accepted best noisy scores; ties resolve by row
  // order so the outcome is deterministic.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  std::vector<bool> accepted(n, false);
  for (std::size_t k = 0; k < spec.n_accepted; ++k) accepted[order[k]] = true;

  SynthResult res;
  res.oracle = make_oracle(spec);
  for (const auto& c : spec.gauss) res.accepted.names.push_back(c.name);
  for (const auto& c : spec.dummies) res.accepted.names.push_back(c.name);
  res.rejected.names = res.accepted.names;

  res.accepted.features = Matrix(spec.n_accepted, d);
  res.rejected.features = Matrix(spec.n_rejected, d);
  std::size_t ia = 0, ir = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const double> row(x.row(i), d);
    const double post = res.oracle.posterior(row);
    if (accepted[i]) {
      std::copy(row.begin(), row.end(), res.accepted.features.row(ia));
      res.accepted.labels.push_back(y[i]);
      res.posterior_accepted.push_back(post);
      ++ia;
    } else {
      std::copy(row.begin(), row.end(), res.rejected.features.row(ir));
      res.rejected_labels.push_back(y[i]);
      res.posterior_rejected.push_back(post);
      ++ir;
    }
  }
  return res;
}

}  // namespace ri::data
