#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "ri/matrix.hpp"
#include "ri/rng.hpp"

namespace ri::nn {

/// Head activations. Hidden layers always use softplus; output heads pick
/// one of these: Linear for means, Softmax for class probabilities,
/// ExpLinear (exp of a linear preactivation, floored) for variances.
enum class Activation { Linear, Softmax, ExpLinear };

/// Variance heads never report less than this, which keeps downstream
/// log-density arithmetic finite.
inline constexpr double kVarFloor = 1e-6;

struct HeadSpec {
  std::string name;
  std::size_t dim = 0;
  Activation act = Activation::Linear;
};

/// A multilayer perceptron trunk with one or more named output heads.
/// layer_dims holds the input width followed by the hidden widths;
/// weights[i] maps layer i to layer i+1 and has shape
/// layer_dims[i+1] x layer_dims[i]. Every head reads the last hidden
/// layer (the input itself when there are no hidden layers).
struct MlpParams {
  std::vector<std::size_t> layer_dims;
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
  std::vector<HeadSpec> heads;
  std::vector<Matrix> head_weights;
  std::vector<std::vector<double>> head_biases;

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t trunk_out_dim() const { return layer_dims.back(); }
  std::size_t hidden_layers() const { return layer_dims.size() - 1; }

  /// Index of the head with the given name, or -1.
  int head_index(std::string_view name) const;

  /// Throws std::invalid_argument on any shape or tag inconsistency.
  void validate() const;
};

/// Everything the backward pass needs from a forward pass: the input and
/// each hidden layer's preactivation/activation plus head outputs, all
/// with one row per batch row.
struct GradientTape {
  Matrix input;
  std::vector<Matrix> pre;
  std::vector<Matrix> act;
  std::vector<Matrix> head_out;
};

/// Head outputs aligned with MlpParams::heads.
struct HeadOutputs {
  std::vector<Matrix> values;
  const Matrix& at(const MlpParams& p, std::string_view name) const;
};

/// Batched forward pass; input is batch x input_dim. When tape is given it
/// is filled for a later mlp_backward.
HeadOutputs mlp_forward(const MlpParams& p, const Matrix& input, GradientTape* tape = nullptr);

/// Backward pass. head_grads[h] is dLoss/d(head h output), one row per
/// batch row; every head must be present with matching shape. Returns
/// parameter gradients in an MlpParams-shaped container and, if requested,
/// dLoss/d(input).
MlpParams mlp_backward(const MlpParams& p, const GradientTape& tape,
                       const std::vector<Matrix>& head_grads, Matrix* input_grad = nullptr);

/// Zero-filled parameters with the given shape.
MlpParams make_mlp(const std::vector<std::size_t>& layer_dims,
                   const std::vector<HeadSpec>& heads);

/// Fresh parameters: Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))),
/// zero biases. Draw order is fixed, so a seed pins the init exactly.
MlpParams glorot_init(const std::vector<std::size_t>& layer_dims,
                      const std::vector<HeadSpec>& heads, Rng& rng);

/// Zero gradients (or Adam moments) shaped like p.
MlpParams zeros_like(const MlpParams& p);

/// into += scale * g, blockwise.
void accumulate(MlpParams& into, const MlpParams& g, double scale = 1.0);

std::size_t param_count(const MlpParams& p);

/// Visits every parameter block (trunk weights, trunk biases, head weights,
/// head biases) in a fixed order. Used by Adam, serialization and the
/// finite-difference tests.
template <class P, class F>
void for_each_block(P& p, F&& f) {
  for (auto& w : p.weights) f(w.data);
  for (auto& b : p.biases) f(b);
  for (auto& w : p.head_weights) f(w.data);
  for (auto& b : p.head_biases) f(b);
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  std::size_t step = 0;
  MlpParams m, v;
};

AdamState adam_init(const MlpParams& shape, const AdamConfig& cfg);

/// One bias-corrected Adam update of params in place. Throws on non-finite
/// gradients.
void adam_step(AdamState& st, MlpParams& params, const MlpParams& grads);

/// Numerically safe softplus: exact for |x| up to at least 500.
double softplus(double x);
/// d softplus / dx, the logistic function.
double softplus_prime(double x);

/// Row-wise softmax with max subtraction; rows sum to 1.
void softmax_rows_inplace(Matrix& m);

}  // namespace ri::nn
