#include "ri/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ri::io {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& val) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(val, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != val.size())
    throw std::runtime_error("config key '" + key + "': cannot parse '" + val + "' as a number");
  return out;
}

long parse_long(const std::string& key, const std::string& val) {
  std::size_t used = 0;
  long out = 0;
  try {
    out = std::stol(val, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != val.size())
    throw std::runtime_error("config key '" + key + "': cannot parse '" + val + "' as an integer");
  return out;
}

}  // namespace

const std::string* KvFile::find(const std::string& key) const {
  for (const auto& [k, v] : items)
    if (k == key) return &v;
  return nullptr;
}

std::string KvFile::get_string(const std::string& key) const {
  const std::string* v = find(key);
  if (!v) throw std::runtime_error("config key '" + key + "' is required");
  return *v;
}

std::string KvFile::get_string_or(const std::string& key, const std::string& dflt) const {
  const std::string* v = find(key);
  return v ? *v : dflt;
}

double KvFile::get_double(const std::string& key) const {
  return parse_double(key, get_string(key));
}

double KvFile::get_double_or(const std::string& key, double dflt) const {
  const std::string* v = find(key);
  return v ? parse_double(key, *v) : dflt;
}

long KvFile::get_long(const std::string& key) const { return parse_long(key, get_string(key)); }

long KvFile::get_long_or(const std::string& key, long dflt) const {
  const std::string* v = find(key);
  return v ? parse_long(key, *v) : dflt;
}

std::uint64_t KvFile::get_u64_or(const std::string& key, std::uint64_t dflt) const {
  const std::string* v = find(key);
  if (!v) return dflt;
  std::size_t used = 0;
  std::uint64_t out = 0;
  try {
    out = std::stoull(*v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v->size())
    throw std::runtime_error("config key '" + key + "': cannot parse '" + *v + "' as an integer");
  return out;
}

bool KvFile::get_bool_or(const std::string& key, bool dflt) const {
  const std::string* v = find(key);
  if (!v) return dflt;
  if (*v == "true" || *v == "1") return true;
  if (*v == "false" || *v == "0") return false;
  throw std::runtime_error("config key '" + key + "': expected true/false, got '" + *v + "'");
}

void KvFile::require_known(std::span<const std::string> allowed) const {
  for (const auto& [k, v] : items)
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw std::runtime_error("unknown config key '" + k + "'");
}

void KvFile::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : items)
    if (k == key) {
      v = value;
      return;
    }
  items.emplace_back(key, value);
}

KvFile parse_kv(const std::string& text) {
  KvFile kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error("config line " + std::to_string(lineno) + ": empty key");
    if (kv.has(key))
      throw std::runtime_error("config line " + std::to_string(lineno) + ": duplicate key '" +
                               key + "'");
    kv.items.emplace_back(key, val);
  }
  return kv;
}

KvFile load_kv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_kv(buf.str());
}

std::string kv_to_text(const KvFile& kv) {
  std::ostringstream out;
  for (const auto& [k, v] : kv.items) out << k << " = " << v << "\n";
  return out.str();
}

void save_kv(const std::string& path, const KvFile& kv) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << kv_to_text(kv);
  if (!out) throw std::runtime_error("write failed for " + path);
}

namespace {

constexpr int kFormatVersion = 1;

const char* act_name(nn::Activation a) {
  switch (a) {
    case nn::Activation::Linear:
      return "linear";
    case nn::Activation::Softmax:
      return "softmax";
    case nn::Activation::ExpLinear:
      return "explinear";
  }
  return "linear";
}

nn::Activation act_from(const std::string& s) {
  if (s == "linear") return nn::Activation::Linear;
  if (s == "softmax") return nn::Activation::Softmax;
  if (s == "explinear") return nn::Activation::ExpLinear;
  throw std::runtime_error("model file: unknown activation '" + s + "'");
}

void write_net(std::ostream& out, const std::string& name, const nn::MlpParams& p) {
  out << "net " << name << "\n";
  out << "dims " << p.layer_dims.size();
  for (std::size_t d : p.layer_dims) out << " " << d;
  out << "\n";
  out << "heads " << p.heads.size() << "\n";
  for (const auto& h : p.heads)
    out << "head " << h.name << " " << h.dim << " " << act_name(h.act) << "\n";
  out << "values " << nn::param_count(p) << "\n";
  std::size_t col = 0;
  nn::for_each_block(const_cast<nn::MlpParams&>(p), [&](std::vector<double>& block) {
    for (double v : block) {
      out << fmt17(v);
      col = (col + 1) % 8;
      out << (col == 0 ? "\n" : " ");
    }
  });
  if (col != 0) out << "\n";
}

class TokenReader {
 public:
  explicit TokenReader(std::istream& in) : in_(in) {}

  std::string word(const char* what) {
    std::string t;
    if (!(in_ >> t)) throw std::runtime_error(std::string("model file: missing ") + what);
    return t;
  }

  void expect(const std::string& token) {
    const std::string t = word(token.c_str());
    if (t != token)
      throw std::runtime_error("model file: expected '" + token + "', found '" + t + "'");
  }

  std::size_t count(const char* what) {
    const std::string t = word(what);
    try {
      return std::stoull(t);
    } catch (const std::exception&) {
      throw std::runtime_error(std::string("model file: bad count for ") + what);
    }
  }

  double number(const char* what) {
    const std::string t = word(what);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != t.size())
      throw std::runtime_error(std::string("model file: bad number for ") + what);
    return v;
  }

  /// The rest of the current line, trimmed; used for free-form names.
  std::string rest_of_line(const char* what) {
    std::string t;
    std::getline(in_, t);
    t = trim(t);
    if (t.empty()) {
      std::getline(in_, t);
      t = trim(t);
    }
    if (t.empty()) throw std::runtime_error(std::string("model file: missing ") + what);
    return t;
  }

 private:
  std::istream& in_;
};

nn::MlpParams read_net(TokenReader& r, const std::string& name) {
  r.expect("net");
  r.expect(name);
  r.expect("dims");
  const std::size_t nd = r.count("layer count");
  std::vector<std::size_t> dims(nd);
  for (auto& d : dims) d = r.count("layer width");
  r.expect("heads");
  const std::size_t nh = r.count("head count");
  std::vector<nn::HeadSpec> heads(nh);
  for (auto& h : heads) {
    r.expect("head");
    h.name = r.word("head name");
    h.dim = r.count("head width");
    h.act = act_from(r.word("head activation"));
  }
  nn::MlpParams p = nn::make_mlp(dims, heads);
  r.expect("values");
  const std::size_t nv = r.count("value count");
  if (nv != nn::param_count(p))
    throw std::runtime_error("model file: value count mismatch for net " + name);
  nn::for_each_block(p, [&](std::vector<double>& block) {
    for (double& v : block) v = r.number("parameter value");
  });
  return p;
}

void write_standardizer(std::ostream& out, const data::Standardizer& s) {
  out << "standardizer 1\n";
  out << "input_cols " << s.kept.size() + s.dropped.size() << "\n";
  out << "kept " << s.kept.size() << "\n";
  for (std::size_t k = 0; k < s.kept.size(); ++k) {
    out << s.kept[k] << " " << fmt17(s.mean[k]) << " " << fmt17(s.stddev[k]) << "\n";
    out << s.names[k] << "\n";
  }
  out << "dropped " << s.dropped.size() << "\n";
  for (const auto& n : s.dropped) out << n << "\n";
}

data::Standardizer read_standardizer(TokenReader& r) {
  data::Standardizer s;
  r.expect("input_cols");
  r.count("input column count");
  r.expect("kept");
  const std::size_t k = r.count("kept count");
  for (std::size_t i = 0; i < k; ++i) {
    s.kept.push_back(r.count("kept index"));
    s.mean.push_back(r.number("column mean"));
    s.stddev.push_back(r.number("column stddev"));
    s.names.push_back(r.rest_of_line("column name"));
  }
  r.expect("dropped");
  const std::size_t d = r.count("dropped count");
  for (std::size_t i = 0; i < d; ++i) s.dropped.push_back(r.rest_of_line("dropped column name"));
  return s;
}

}  // namespace

std::string model_to_text(const StoredModel& m) {
  std::ostringstream out;
  out << "ri-model " << kFormatVersion << "\n";
  out << "type " << m.type << "\n";
  if (m.standardizer)
    write_standardizer(out, *m.standardizer);
  else
    out << "standardizer 0\n";

  if (m.type == "model1") {
    if (!m.m1) throw std::invalid_argument("model_to_text: model1 payload missing");
    const auto& p = *m.m1;
    out << "lx " << p.lx << "\nlz " << p.lz << "\nprior_pi " << fmt17(p.prior_pi) << "\n";
    write_net(out, "gmm_net", p.gmm_net);
    write_net(out, "decoder_net", p.decoder_net);
    write_net(out, "encoder_net", p.encoder_net);
    write_net(out, "classifier_net", p.classifier_net);
  } else if (m.type == "model2") {
    if (!m.m2) throw std::invalid_argument("model_to_text: model2 payload missing");
    const auto& p = *m.m2;
    out << "lx " << p.lx << "\nlz " << p.lz << "\nla " << p.la << "\nprior_pi "
        << fmt17(p.prior_pi) << "\n";
    write_net(out, "gmm_net", p.gmm_net);
    write_net(out, "decoder_net", p.decoder_net);
    write_net(out, "encoder_z_net", p.encoder_z_net);
    write_net(out, "encoder_a_net", p.encoder_a_net);
    write_net(out, "classifier_net", p.classifier_net);
  } else if (m.type == "logistic") {
    if (!m.logistic) throw std::invalid_argument("model_to_text: logistic payload missing");
    const auto& p = *m.logistic;
    out << "coef " << p.coef.size() << "\n";
    for (double c : p.coef) out << fmt17(c) << "\n";
    out << "iterations " << p.iterations << "\n";
    out << "grad_norm " << fmt17(p.grad_norm) << "\n";
    out << "converged " << (p.converged ? 1 : 0) << "\n";
  } else if (m.type == "mlp") {
    if (!m.mlp) throw std::invalid_argument("model_to_text: mlp payload missing");
    write_net(out, "classifier_net", *m.mlp);
  } else if (m.type == "oracle") {
    if (!m.oracle) throw std::invalid_argument("model_to_text: oracle payload missing");
    const auto& p = *m.oracle;
    out << "weights " << p.w.size() << "\n";
    for (double w : p.w) out << fmt17(w) << "\n";
    out << "bias " << fmt17(p.b) << "\n";
    out << "bayes_auc " << fmt17(p.bayes_auc) << "\n";
  } else {
    throw std::invalid_argument("model_to_text: unknown model type '" + m.type + "'");
  }
  return out.str();
}

StoredModel model_from_text(const std::string& text) {
  std::istringstream in(text);
  TokenReader r(in);
  r.expect("ri-model");
  const std::size_t version = r.count("format version");
  if (version != kFormatVersion)
    throw std::runtime_error("model file: unsupported format version " + std::to_string(version));
  r.expect("type");

  StoredModel m;
  m.type = r.word("model type");
  r.expect("standardizer");
  if (r.count("standardizer flag") == 1) m.standardizer = read_standardizer(r);

  if (m.type == "model1") {
    model1::Model1Params p;
    r.expect("lx");
    p.lx = r.count("lx");
    r.expect("lz");
    p.lz = r.count("lz");
    r.expect("prior_pi");
    p.prior_pi = r.number("prior_pi");
    p.gmm_net = read_net(r, "gmm_net");
    p.decoder_net = read_net(r, "decoder_net");
    p.encoder_net = read_net(r, "encoder_net");
    p.classifier_net = read_net(r, "classifier_net");
    p.validate();
    m.m1 = std::move(p);
  } else if (m.type == "model2") {
    model2::Model2Params p;
    r.expect("lx");
    p.lx = r.count("lx");
    r.expect("lz");
    p.lz = r.count("lz");
    r.expect("la");
    p.la = r.count("la");
    r.expect("prior_pi");
    p.prior_pi = r.number("prior_pi");
    p.gmm_net = read_net(r, "gmm_net");
    p.decoder_net = read_net(r, "decoder_net");
    p.encoder_z_net = read_net(r, "encoder_z_net");
    p.encoder_a_net = read_net(r, "encoder_a_net");
    p.classifier_net = read_net(r, "classifier_net");
    p.validate();
    m.m2 = std::move(p);
  } else if (m.type == "logistic") {
    baselines::LogisticModel p;
    r.expect("coef");
    const std::size_t n = r.count("coefficient count");
    p.coef.resize(n);
    for (auto& c : p.coef) c = r.number("coefficient");
    r.expect("iterations");
    p.iterations = r.count("iterations");
    r.expect("grad_norm");
    p.grad_norm = r.number("grad_norm");
    r.expect("converged");
    p.converged = r.count("converged flag") == 1;
    m.logistic = std::move(p);
  } else if (m.type == "mlp") {
    m.mlp = read_net(r, "classifier_net");
  } else if (m.type == "oracle") {
    data::SynthOracle p;
    r.expect("weights");
    const std::size_t n = r.count("weight count");
    p.w.resize(n);
    for (auto& w : p.w) w = r.number("weight");
    r.expect("bias");
    p.b = r.number("bias");
    r.expect("bayes_auc");
    p.bayes_auc = r.number("bayes_auc");
    m.oracle = std::move(p);
  } else {
    throw std::runtime_error("model file: unknown model type '" + m.type + "'");
  }
  return m;
}

void save_model(const std::string& path, const StoredModel& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << model_to_text(m);
  if (!out) throw std::runtime_error("write failed for " + path);
}

StoredModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_text(buf.str());
}

}  // namespace ri::io
