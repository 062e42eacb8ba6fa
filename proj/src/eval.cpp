#include "ri/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ri/baselines.hpp"
#include "ri/dists.hpp"

namespace ri::eval {

namespace {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// 32-node Gauss-Legendre rule on [-1, 1], nodes found by Newton iteration
// on the Legendre recurrence.
struct QuadRule {
  std::vector<double> x, w;
};

QuadRule legendre_rule(int n) {
  QuadRule q;
  q.x.resize(n);
  q.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double t = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (t * p1 - p0) / (t * t - 1.0);
      const double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - t * t) * dp * dp);
    q.x[i] = -t;
    q.x[n - 1 - i] = t;
    q.w[i] = w;
    q.w[n - 1 - i] = w;
  }
  return q;
}

const QuadRule& rule32() {
  static const QuadRule q = legendre_rule(32);
  return q;
}

template <typename F>
double integrate(F f, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  const QuadRule& q = rule32();
  const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  double acc = 0.0;
  for (std::size_t i = 0; i < q.x.size(); ++i) acc += q.w[i] * f(mid + half * q.x[i]);
  return acc * half;
}

struct RocPoint {
  double f0, f1;  // P(score <= t | class) per class
};

// Cumulative class distributions at each distinct score, ascending, with
// (0, 0) prepended, then the lower convex hull: the thresholds that are
// optimal for some cost share.
std::vector<RocPoint> roc_lower_hull(const ScoredSet& s, std::size_t n0, std::size_t n1) {
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });

  std::vector<RocPoint> pts;
  pts.push_back({0.0, 0.0});
  std::size_t c0 = 0, c1 = 0, i = 0;
  while (i < order.size()) {
    const double v = s.scores[order[i]];
    while (i < order.size() && s.scores[order[i]] == v) {
      (s.labels[order[i]] == 1 ? c1 : c0) += 1;
      ++i;
    }
    pts.push_back({static_cast<double>(c0) / static_cast<double>(n0),
                   static_cast<double>(c1) / static_cast<double>(n1)});
  }

  std::vector<RocPoint> hull;
  for (const RocPoint& p : pts) {
    while (hull.size() >= 2) {
      const RocPoint& o = hull[hull.size() - 2];
      const RocPoint& a = hull.back();
      const double cross = (a.f0 - o.f0) * (p.f1 - o.f1) - (a.f1 - o.f1) * (p.f0 - o.f0);
      if (cross <= 0.0)
        hull.pop_back();
      else
        break;
    }
    hull.push_back(p);
  }
  return hull;
}

void require_both_classes(const ScoredSet& s, const char* what) {
  if (s.n_class(0) == 0 || s.n_class(1) == 0)
    throw std::runtime_error(std::string(what) + ": undefined with a single class present");
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::size_t ScoredSet::n_class(int y) const {
  std::size_t n = 0;
  for (int v : labels) n += (v == y) ? 1 : 0;
  return n;
}

void ScoredSet::validate() const {
  if (scores.size() != labels.size())
    throw std::invalid_argument("ScoredSet: scores and labels lengths differ");
  if (scores.empty()) throw std::invalid_argument("ScoredSet: empty");
  for (double v : scores)
    if (!std::isfinite(v)) throw std::invalid_argument("ScoredSet: non-finite score");
  for (int y : labels)
    if (y != 0 && y != 1) throw std::invalid_argument("ScoredSet: labels must be 0 or 1");
}

double auc(const ScoredSet& s) {
  s.validate();
  require_both_classes(s, "auc");
  const std::size_t n = s.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });

  // Midranks handle ties, which is exactly the 1/2 tie convention.
  double rank_sum_1 = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && s.scores[order[j]] == s.scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (s.labels[order[k]] == 1) rank_sum_1 += midrank;
    i = j;
  }
  const double n1 = static_cast<double>(s.n_class(1));
  const double n0 = static_cast<double>(s.n_class(0));
  return (rank_sum_1 - n1 * (n1 + 1.0) / 2.0) / (n1 * n0);
}

double gini(const ScoredSet& s) { return 2.0 * auc(s) - 1.0; }

double h_measure(const ScoredSet& s, const SeverityParams& sev) {
  s.validate();
  require_both_classes(s, "h_measure");
  if (!(sev.a > 0.0 && sev.b > 0.0))
    throw std::invalid_argument("h_measure: severity parameters must be positive");

  const std::size_t n0 = s.n_class(0), n1 = s.n_class(1);
  const double pi0 = static_cast<double>(n0) / static_cast<double>(s.size());
  const double pi1 = static_cast<double>(n1) / static_cast<double>(s.size());

  const double norm = 1.0 / std::beta(sev.a, sev.b);
  auto density = [&](double c) {
    return norm * std::pow(c, sev.a - 1.0) * std::pow(1.0 - c, sev.b - 1.0);
  };

  // Expected loss of the threshold that is optimal for cost share c,
  // averaged over the severity distribution. Hull vertex i is optimal on
  // the cost segment between its breakpoints.
  const std::vector<RocPoint> hull = roc_lower_hull(s, n0, n1);
  std::vector<double> breaks{0.0};
  for (std::size_t i = 1; i < hull.size(); ++i) {
    const double d0 = hull[i].f0 - hull[i - 1].f0;
    const double d1 = hull[i].f1 - hull[i - 1].f1;
    breaks.push_back(pi1 * d1 / (pi0 * d0 + pi1 * d1));
  }
  breaks.push_back(1.0);

  double loss = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const double lo = breaks[i], hi = breaks[i + 1];
    const double miss0 = pi0 * (1.0 - hull[i].f0);  // class-0 rows called positive
    const double miss1 = pi1 * hull[i].f1;          // class-1 rows called negative
    loss += integrate([&](double c) { return (c * miss0 + (1.0 - c) * miss1) * density(c); },
                      lo, hi);
  }

  // The best trivial classifier: everything positive below c = pi1,
  // everything negative above.
  const double lmax = integrate([&](double c) { return c * pi0 * density(c); }, 0.0, pi1) +
                      integrate([&](double c) { return (1.0 - c) * pi1 * density(c); }, pi1, 1.0);
  return 1.0 - loss / lmax;
}

ThresholdMetrics recall_precision_at_default_rate(const ScoredSet& s, bool absolute_cutoff) {
  s.validate();
  require_both_classes(s, "recall_precision_at_default_rate");
  const std::size_t n = s.size(), n1 = s.n_class(1);
  const double rate = static_cast<double>(n1) / static_cast<double>(n);

  ThresholdMetrics out;
  std::size_t tp = 0;
  if (absolute_cutoff) {
    out.threshold = rate;
    for (std::size_t i = 0; i < n; ++i)
      if (s.scores[i] >= rate) {
        out.k += 1;
        tp += s.labels[i] == 1 ? 1 : 0;
      }
    if (out.k == 0)
      throw std::runtime_error(
          "recall_precision_at_default_rate: no score reaches the cutoff; precision undefined");
  } else {
    out.k = static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
    if (out.k == 0)
      throw std::runtime_error(
          "recall_precision_at_default_rate: zero positives at the default rate; "
          "precision undefined");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return s.scores[a] > s.scores[b]; });
    for (std::size_t i = 0; i < out.k; ++i) tp += s.labels[order[i]] == 1 ? 1 : 0;
    out.threshold = s.scores[order[out.k - 1]];
  }
  out.recall = static_cast<double>(tp) / static_cast<double>(n1);
  out.precision = static_cast<double>(tp) / static_cast<double>(out.k);
  return out;
}

Moments score_moments(std::span<const double> scores) {
  if (scores.size() < 2) throw std::invalid_argument("score_moments: need at least two values");
  const double n = static_cast<double>(scores.size());
  Moments m;
  for (double v : scores) m.mean += v;
  m.mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : scores) {
    const double d = v - m.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m.stddev = std::sqrt(m2 / (n - 1.0));
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (m2 > 0.0) {
    m.skewness = m3 / std::pow(m2, 1.5);
    m.kurtosis = m4 / (m2 * m2) - 3.0;
  }
  return m;
}

double Calibration::apply(double s) const {
  switch (kind) {
    case Kind::Identity:
      return s;
    case Kind::Platt:
      return sigmoid(a * s + b);
    case Kind::Beta: {
      const double sc = dists::clamp_prob(s);
      return sigmoid(c + a * std::log(sc) - b * std::log(1.0 - sc));
    }
  }
  return s;
}

std::vector<double> Calibration::apply(std::span<const double> s) const {
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = apply(s[i]);
  return out;
}

bool Calibration::monotone() const {
  switch (kind) {
    case Kind::Identity:
      return true;
    case Kind::Platt:
      return a >= 0.0;
    case Kind::Beta:
      return a >= 0.0 && b >= 0.0;
  }
  return true;
}

namespace {

Calibration fit_map(const ScoredSet& v, Calibration::Kind kind) {
  v.validate();
  require_both_classes(v, kind == Calibration::Kind::Platt ? "platt_fit" : "beta_calibrate_fit");
  std::vector<baselines::WeightedRow> rows(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (kind == Calibration::Kind::Platt) {
      rows[i].features = {v.scores[i]};
    } else {
      const double sc = dists::clamp_prob(v.scores[i]);
      rows[i].features = {std::log(sc), -std::log(1.0 - sc)};
    }
    rows[i].label = v.labels[i];
  }
  Calibration cal;
  try {
    const baselines::LogisticModel m = baselines::logreg_fit(rows, 0.0);
    cal.kind = kind;
    if (kind == Calibration::Kind::Platt) {
      cal.a = m.coef[1];
      cal.b = m.coef[0];
      cal.c = 0.0;
    } else {
      cal.c = m.coef[0];
      cal.a = m.coef[1];
      cal.b = m.coef[2];
    }
  } catch (const std::runtime_error&) {
    cal = Calibration{};  // identity fallback
    cal.degenerate = true;
  }
  return cal;
}

}  // namespace

Calibration platt_fit(const ScoredSet& validation) {
  return fit_map(validation, Calibration::Kind::Platt);
}

Calibration beta_calibrate_fit(const ScoredSet& validation) {
  return fit_map(validation, Calibration::Kind::Beta);
}

MetricsReport evaluate_scores(const ScoredSet& s, std::uint64_t seed, bool absolute_cutoff) {
  MetricsReport r;
  r.auc = auc(s);
  r.gini = 2.0 * r.auc - 1.0;
  r.h_measure = h_measure(s);
  const ThresholdMetrics t = recall_precision_at_default_rate(s, absolute_cutoff);
  r.recall = t.recall;
  r.precision = t.precision;
  r.threshold = t.threshold;
  const Moments m = score_moments(s.scores);
  r.mean = m.mean;
  r.stddev = m.stddev;
  r.kurtosis = m.kurtosis;
  r.skewness = m.skewness;
  r.n_test = s.size();
  r.seed = seed;
  return r;
}

std::string metrics_to_text(const MetricsReport& r) {
  std::ostringstream out;
  out << "auc = " << fmt17(r.auc) << "\n";
  out << "gini = " << fmt17(r.gini) << "\n";
  out << "h_measure = " << fmt17(r.h_measure) << "\n";
  out << "recall = " << fmt17(r.recall) << "\n";
  out << "precision = " << fmt17(r.precision) << "\n";
  out << "mean = " << fmt17(r.mean) << "\n";
  out << "std = " << fmt17(r.stddev) << "\n";
  out << "kurtosis = " << fmt17(r.kurtosis) << "\n";
  out << "skewness = " << fmt17(r.skewness) << "\n";
  out << "threshold = " << fmt17(r.threshold) << "\n";
  out << "n_test = " << r.n_test << "\n";
  out << "seed = " << r.seed << "\n";
  return out.str();
}

MetricsReport metrics_from_text(const std::string& text) {
  MetricsReport r;
  std::istringstream in(text);
  std::string line;
  std::size_t seen = 0;
  bool found[12] = {};
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("metrics_from_text: malformed line '" + line + "'");
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    auto strip = [](std::string& t) {
      while (!t.empty() && std::isspace(static_cast<unsigned char>(t.front()))) t.erase(t.begin());
      while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back()))) t.pop_back();
    };
    strip(key);
    strip(val);
    int slot;
    if (key == "auc") {
      r.auc = std::stod(val);
      slot = 0;
    } else if (key == "gini") {
      r.gini = std::stod(val);
      slot = 1;
    } else if (key == "h_measure") {
      r.h_measure = std::stod(val);
      slot = 2;
    } else if (key == "recall") {
      r.recall = std::stod(val);
      slot = 3;
    } else if (key == "precision") {
      r.precision = std::stod(val);
      slot = 4;
    } else if (key == "mean") {
      r.mean = std::stod(val);
      slot = 5;
    } else if (key == "std") {
      r.stddev = std::stod(val);
      slot = 6;
    } else if (key == "kurtosis") {
      r.kurtosis = std::stod(val);
      slot = 7;
    } else if (key == "skewness") {
      r.skewness = std::stod(val);
      slot = 8;
    } else if (key == "threshold") {
      r.threshold = std::stod(val);
      slot = 9;
    } else if (key == "n_test") {
      r.n_test = std::stoull(val);
      slot = 10;
    } else if (key == "seed") {
      r.seed = std::stoull(val);
      slot = 11;
    } else {
      throw std::runtime_error("metrics_from_text: unknown key '" + key + "'");
    }
    if (!found[slot]) {
      found[slot] = true;
      ++seen;
    }
  }
  if (seen != 12) throw std::runtime_error("metrics_from_text: missing keys");
  return r;
}

}  // namespace ri::eval
