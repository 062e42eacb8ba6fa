#include "ri/nn.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace ri::nn {

int MlpParams::head_index(std::string_view name) const {
  for (std::size_t h = 0; h < heads.size(); ++h)
    if (heads[h].name == name) return static_cast<int>(h);
  return -1;
}

void MlpParams::validate() const {
  if (layer_dims.empty()) throw std::invalid_argument("MlpParams: layer_dims is empty");
  for (std::size_t d : layer_dims)
    if (d == 0) throw std::invalid_argument("MlpParams: zero layer width");
  if (weights.size() != layer_dims.size() - 1 || biases.size() != weights.size())
    throw std::invalid_argument("MlpParams: trunk block count does not match layer_dims");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i].rows != layer_dims[i + 1] || weights[i].cols != layer_dims[i])
      throw std::invalid_argument("MlpParams: trunk weight " + std::to_string(i) +
                                  " has the wrong shape");
    if (biases[i].size() != layer_dims[i + 1])
      throw std::invalid_argument("MlpParams: trunk bias " + std::to_string(i) +
                                  " has the wrong length");
  }
  if (heads.empty()) throw std::invalid_argument("MlpParams: at least one head required");
  if (head_weights.size() != heads.size() || head_biases.size() != heads.size())
    throw std::invalid_argument("MlpParams: head block count does not match heads");
  std::set<std::string> names;
  for (std::size_t h = 0; h < heads.size(); ++h) {
    if (heads[h].name.empty()) throw std::invalid_argument("MlpParams: unnamed head");
    if (!names.insert(heads[h].name).second)
      throw std::invalid_argument("MlpParams: duplicate head name " + heads[h].name);
    if (heads[h].dim == 0) throw std::invalid_argument("MlpParams: zero-width head");
    if (heads[h].act == Activation::Softmax && heads[h].dim < 2)
      throw std::invalid_argument("MlpParams: softmax head needs at least two classes");
    if (head_weights[h].rows != heads[h].dim || head_weights[h].cols != trunk_out_dim())
      throw std::invalid_argument("MlpParams: head weight " + heads[h].name +
                                  " has the wrong shape");
    if (head_biases[h].size() != heads[h].dim)
      throw std::invalid_argument("MlpParams: head bias " + heads[h].name +
                                  " has the wrong length");
  }
}

const Matrix& HeadOutputs::at(const MlpParams& p, std::string_view name) const {
  const int h = p.head_index(name);
  if (h < 0) throw std::invalid_argument("no head named " + std::string(name));
  return values[static_cast<std::size_t>(h)];
}

double softplus(double x) {
  return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
}

double softplus_prime(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void softmax_rows_inplace(Matrix& m) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    double* r = m.row(i);
    double mx = r[0];
    for (std::size_t j = 1; j < m.cols; ++j) mx = std::max(mx, r[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) {
      r[j] = std::exp(r[j] - mx);
      sum += r[j];
    }
    for (std::size_t j = 0; j < m.cols; ++j) r[j] /= sum;
  }
}

// x (B x in) * W^T (in x out) + b, one row per batch row.
static Matrix affine(const Matrix& x, const Matrix& w, const std::vector<double>& b) {
  Matrix out = kernels::matmul_a_bt(x, w);
  for (std::size_t i = 0; i < out.rows; ++i) {
    double* r = out.row(i);
    for (std::size_t j = 0; j < out.cols; ++j) r[j] += b[j];
  }
  return out;
}

HeadOutputs mlp_forward(const MlpParams& p, const Matrix& input, GradientTape* tape) {
  if (input.cols != p.input_dim())
    throw std::invalid_argument("mlp_forward: input has " + std::to_string(input.cols) +
                                " columns, expected " + std::to_string(p.input_dim()));
  if (tape) {
    tape->input = input;
    tape->pre.clear();
    tape->act.clear();
    tape->head_out.clear();
  }
  Matrix h = input;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    Matrix pre = affine(h, p.weights[l], p.biases[l]);
    Matrix act(pre.rows, pre.cols);
    for (std::size_t i = 0; i < pre.size(); ++i) act.data[i] = softplus(pre.data[i]);
    if (tape) {
      tape->pre.push_back(pre);
      tape->act.push_back(act);
    }
    h = std::move(act);
  }
  HeadOutputs out;
  out.values.reserve(p.heads.size());
  for (std::size_t hd = 0; hd < p.heads.size(); ++hd) {
    Matrix y = affine(h, p.head_weights[hd], p.head_biases[hd]);
    switch (p.heads[hd].act) {
      case Activation::Linear:
        break;
      case Activation::Softmax:
        softmax_rows_inplace(y);
        break;
      case Activation::ExpLinear:
        for (double& v : y.data) v = std::max(std::exp(v), kVarFloor);
        break;
    }
    if (tape) tape->head_out.push_back(y);
    out.values.push_back(std::move(y));
  }
  return out;
}

MlpParams zeros_like(const MlpParams& p) {
  MlpParams z;
  z.layer_dims = p.layer_dims;
  z.heads = p.heads;
  z.weights.reserve(p.weights.size());
  z.biases.reserve(p.biases.size());
  for (const auto& w : p.weights) z.weights.emplace_back(w.rows, w.cols);
  for (const auto& b : p.biases) z.biases.emplace_back(b.size(), 0.0);
  for (const auto& w : p.head_weights) z.head_weights.emplace_back(w.rows, w.cols);
  for (const auto& b : p.head_biases) z.head_biases.emplace_back(b.size(), 0.0);
  return z;
}

void accumulate(MlpParams& into, const MlpParams& g, double scale) {
  auto add = [scale](std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += scale * b[i];
  };
  for (std::size_t i = 0; i < into.weights.size(); ++i) add(into.weights[i].data, g.weights[i].data);
  for (std::size_t i = 0; i < into.biases.size(); ++i) add(into.biases[i], g.biases[i]);
  for (std::size_t i = 0; i < into.head_weights.size(); ++i)
    add(into.head_weights[i].data, g.head_weights[i].data);
  for (std::size_t i = 0; i < into.head_biases.size(); ++i) add(into.head_biases[i], g.head_biases[i]);
}

std::size_t param_count(const MlpParams& p) {
  std::size_t n = 0;
  for_each_block(p, [&n](const std::vector<double>& b) { n += b.size(); });
  return n;
}

MlpParams mlp_backward(const MlpParams& p, const GradientTape& tape,
                       const std::vector<Matrix>& head_grads, Matrix* input_grad) {
  if (head_grads.size() != p.heads.size())
    throw std::invalid_argument("mlp_backward: expected " + std::to_string(p.heads.size()) +
                                " head gradients, got " + std::to_string(head_grads.size()));
  const std::size_t batch = tape.input.rows;
  MlpParams g = zeros_like(p);

  const Matrix& last_act = p.weights.empty() ? tape.input : tape.act.back();
  Matrix delta(batch, p.trunk_out_dim());

  for (std::size_t hd = 0; hd < p.heads.size(); ++hd) {
    const Matrix& hg = head_grads[hd];
    if (hg.rows != batch || hg.cols != p.heads[hd].dim)
      throw std::invalid_argument("mlp_backward: head gradient " + p.heads[hd].name +
                                  " is missing or has the wrong shape");
    const Matrix& out = tape.head_out[hd];
    // dLoss/d(head preactivation)
    Matrix dpre(batch, p.heads[hd].dim);
    switch (p.heads[hd].act) {
      case Activation::Linear:
        dpre = hg;
        break;
      case Activation::Softmax:
        for (std::size_t i = 0; i < batch; ++i) {
          const double* pr = out.row(i);
          const double* gr = hg.row(i);
          double dot = 0.0;
          for (std::size_t j = 0; j < out.cols; ++j) dot += gr[j] * pr[j];
          double* dr = dpre.row(i);
          for (std::size_t j = 0; j < out.cols; ++j) dr[j] = pr[j] * (gr[j] - dot);
        }
        break;
      case Activation::ExpLinear:
        for (std::size_t i = 0; i < dpre.size(); ++i)
          dpre.data[i] = out.data[i] > kVarFloor ? hg.data[i] * out.data[i] : 0.0;
        break;
    }
    g.head_weights[hd] = kernels::matmul_at_b(dpre, last_act);
    for (std::size_t i = 0; i < batch; ++i) {
      const double* dr = dpre.row(i);
      for (std::size_t j = 0; j < dpre.cols; ++j) g.head_biases[hd][j] += dr[j];
    }
    Matrix back = kernels::matmul(dpre, p.head_weights[hd]);
    for (std::size_t i = 0; i < delta.size(); ++i) delta.data[i] += back.data[i];
  }

  for (std::size_t l = p.weights.size(); l-- > 0;) {
    const Matrix& pre = tape.pre[l];
    Matrix dpre(batch, pre.cols);
    for (std::size_t i = 0; i < dpre.size(); ++i)
      dpre.data[i] = delta.data[i] * softplus_prime(pre.data[i]);
    const Matrix& below = (l == 0) ? tape.input : tape.act[l - 1];
    g.weights[l] = kernels::matmul_at_b(dpre, below);
    for (std::size_t i = 0; i < batch; ++i) {
      const double* dr = dpre.row(i);
      for (std::size_t j = 0; j < dpre.cols; ++j) g.biases[l][j] += dr[j];
    }
    delta = kernels::matmul(dpre, p.weights[l]);
  }

  if (input_grad) *input_grad = std::move(delta);
  return g;
}

MlpParams make_mlp(const std::vector<std::size_t>& layer_dims,
                   const std::vector<HeadSpec>& heads) {
  if (layer_dims.empty()) throw std::invalid_argument("MlpParams: layer_dims is empty");
  MlpParams p;
  p.layer_dims = layer_dims;
  p.heads = heads;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    p.weights.emplace_back(layer_dims[l + 1], layer_dims[l]);
    p.biases.emplace_back(layer_dims[l + 1], 0.0);
  }
  for (const HeadSpec& h : heads) {
    p.head_weights.emplace_back(h.dim, p.trunk_out_dim());
    p.head_biases.emplace_back(h.dim, 0.0);
  }
  p.validate();
  return p;
}

MlpParams glorot_init(const std::vector<std::size_t>& layer_dims,
                      const std::vector<HeadSpec>& heads, Rng& rng) {
  MlpParams p = make_mlp(layer_dims, heads);
  auto draw = [&rng](Matrix& w) {
    const double bound = std::sqrt(6.0 / static_cast<double>(w.rows + w.cols));
    for (double& v : w.data) v = rng.uniform(-bound, bound);
  };
  for (Matrix& w : p.weights) draw(w);
  for (Matrix& w : p.head_weights) draw(w);
  return p;
}

namespace {
std::vector<std::vector<double>*> block_ptrs(MlpParams& p) {
  std::vector<std::vector<double>*> out;
  for (auto& w : p.weights) out.push_back(&w.data);
  for (auto& b : p.biases) out.push_back(&b);
  for (auto& w : p.head_weights) out.push_back(&w.data);
  for (auto& b : p.head_biases) out.push_back(&b);
  return out;
}
}  // namespace

AdamState adam_init(const MlpParams& shape, const AdamConfig& cfg) {
  AdamState st;
  st.cfg = cfg;
  st.m = zeros_like(shape);
  st.v = zeros_like(shape);
  return st;
}

void adam_step(AdamState& st, MlpParams& params, const MlpParams& grads) {
  st.step += 1;
  const double t = static_cast<double>(st.step);
  const double c1 = 1.0 - std::pow(st.cfg.beta1, t);
  const double c2 = 1.0 - std::pow(st.cfg.beta2, t);
  auto pb = block_ptrs(params);
  auto gb = block_ptrs(const_cast<MlpParams&>(grads));
  auto mb = block_ptrs(st.m);
  auto vb = block_ptrs(st.v);
  if (pb.size() != gb.size())
    throw std::invalid_argument("adam_step: gradient does not match parameter layout");
  for (std::size_t b = 0; b < pb.size(); ++b) {
    std::vector<double>& pv = *pb[b];
    const std::vector<double>& gv = *gb[b];
    std::vector<double>& mv = *mb[b];
    std::vector<double>& vv = *vb[b];
    if (gv.size() != pv.size())
      throw std::invalid_argument("adam_step: gradient block size mismatch");
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const double g = gv[i];
      if (!std::isfinite(g))
        throw std::runtime_error("adam_step: non-finite gradient at step " +
                                 std::to_string(st.step));
      mv[i] = st.cfg.beta1 * mv[i] + (1.0 - st.cfg.beta1) * g;
      vv[i] = st.cfg.beta2 * vv[i] + (1.0 - st.cfg.beta2) * g * g;
      const double mhat = mv[i] / c1;
      const double vhat = vv[i] / c2;
      pv[i] -= st.cfg.lr * mhat / (std::sqrt(vhat) + st.cfg.eps);
    }
  }
}

}  // namespace ri::nn
