#pragma once

#include <vector>

#include "ri/matrix.hpp"
#include "ri/nn.hpp"

namespace ri::internal {

// One-hot label code: [1 0] for y = 0, [0 1] for y = 1.
Matrix onehot_append(const Matrix& x, const std::vector<int>& y);
Matrix onehot_row(int y);

struct BranchGrads {
  nn::MlpParams* encoder = nullptr;
  nn::MlpParams* gmm = nullptr;
  nn::MlpParams* decoder = nullptr;
};

struct BranchOut {
  std::vector<double> bound;  // per row: -KL(q(z|x,y) || p(z|y)) + reconstruction
};

// Label-conditional core of the supervised bound, shared by both deep
// models: encode q(z|x,y), fetch the matching mixture component from
// gmm_net, penalize their KL and score the decoder reconstruction over the
// given eps draws. When decoder_sees_label, the decoder input is z with
// the one-hot label appended (and the label columns carry no gradient of
// interest). When g is set, accumulates the gradient of
//   sum_i w[i] * (KL_i - recon_i)
// into the nets it points at.
BranchOut accept_branch(const nn::MlpParams& encoder_net, const nn::MlpParams& gmm_net,
                        const nn::MlpParams& decoder_net, bool decoder_sees_label,
                        std::size_t lx, std::size_t lz, const Matrix& x,
                        const std::vector<int>& y, const std::vector<Matrix>& eps,
                        const std::vector<double>& w, BranchGrads* g);

}  // namespace ri::internal
