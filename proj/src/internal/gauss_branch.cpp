#include "internal/gauss_branch.hpp"

#include <cmath>

namespace ri::internal {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

Matrix onehot_append(const Matrix& x, const std::vector<int>& y) {
  Matrix out(x.rows, x.cols + 2);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double* src = x.row(i);
    double* dst = out.row(i);
    for (std::size_t j = 0; j < x.cols; ++j) dst[j] = src[j];
    dst[x.cols + (y[i] == 0 ? 0 : 1)] = 1.0;
  }
  return out;
}

Matrix onehot_row(int y) {
  Matrix m(1, 2);
  m(0, y == 0 ? 0 : 1) = 1.0;
  return m;
}

BranchOut accept_branch(const nn::MlpParams& encoder_net, const nn::MlpParams& gmm_net,
                        const nn::MlpParams& decoder_net, bool decoder_sees_label,
                        std::size_t lx, std::size_t lz, const Matrix& x,
                        const std::vector<int>& y, const std::vector<Matrix>& eps,
                        const std::vector<double>& w, BranchGrads* g) {
  const std::size_t B = x.rows;
  const std::size_t L = eps.size();
  BranchOut out;
  if (B == 0) return out;

  nn::GradientTape enc_tape;
  const Matrix enc_in = onehot_append(x, y);
  const auto enc = nn::mlp_forward(encoder_net, enc_in, g ? &enc_tape : nullptr);
  const Matrix& mq = enc.values[0];
  const Matrix& vq = enc.values[1];

  nn::GradientTape gmm_tape[2];
  Matrix mp[2], vp[2];
  for (int k = 0; k < 2; ++k) {
    const auto pr = nn::mlp_forward(gmm_net, onehot_row(k), g ? &gmm_tape[k] : nullptr);
    mp[k] = pr.values[0];
    vp[k] = pr.values[1];
  }

  std::vector<double> kl(B, 0.0);
  Matrix dmq, dvq, dmp[2], dvp[2];
  if (g) {
    dmq = Matrix(B, lz);
    dvq = Matrix(B, lz);
    for (int k = 0; k < 2; ++k) {
      dmp[k] = Matrix(1, lz);
      dvp[k] = Matrix(1, lz);
    }
  }

  for (std::size_t i = 0; i < B; ++i) {
    const int k = y[i] == 0 ? 0 : 1;
    for (std::size_t j = 0; j < lz; ++j) {
      const double m2 = mq(i, j), v2 = vq(i, j);
      const double m1 = mp[k](0, j), v1 = vp[k](0, j);
      const double d = m2 - m1;
      kl[i] += 0.5 * std::log(v1 / v2) + (v2 + d * d) / (2.0 * v1) - 0.5;
      if (g) {
        dmq(i, j) += w[i] * d / v1;
        dvq(i, j) += w[i] * 0.5 * (1.0 / v1 - 1.0 / v2);
        dmp[k](0, j) -= w[i] * d / v1;
        dvp[k](0, j) += w[i] * (0.5 / v1 - (v2 + d * d) / (2.0 * v1 * v1));
      }
    }
  }

  std::vector<double> recon(B, 0.0);
  const double inv_l = 1.0 / static_cast<double>(L);
  for (std::size_t l = 0; l < L; ++l) {
    Matrix z(B, lz);
    for (std::size_t i = 0; i < B * lz; ++i)
      z.data[i] = mq.data[i] + std::sqrt(vq.data[i]) * eps[l].data[i];
    const Matrix dec_in = decoder_sees_label ? onehot_append(z, y) : z;
    nn::GradientTape dec_tape;
    const auto dec = nn::mlp_forward(decoder_net, dec_in, g ? &dec_tape : nullptr);
    const Matrix& mx = dec.values[0];
    const Matrix& vx = dec.values[1];
    Matrix gmx, gvx;
    if (g) {
      gmx = Matrix(B, lx);
      gvx = Matrix(B, lx);
    }
    for (std::size_t i = 0; i < B; ++i) {
      for (std::size_t d = 0; d < lx; ++d) {
        const double v = vx(i, d);
        const double diff = x(i, d) - mx(i, d);
        recon[i] += inv_l * (-0.5 * (kLog2Pi + std::log(v)) - diff * diff / (2.0 * v));
        if (g) {
          gmx(i, d) = -w[i] * inv_l * diff / v;
          gvx(i, d) = -w[i] * inv_l * (-0.5 / v + diff * diff / (2.0 * v * v));
        }
      }
    }
    if (g) {
      Matrix din;
      nn::accumulate(*g->decoder, nn::mlp_backward(decoder_net, dec_tape, {gmx, gvx}, &din));
      // dLoss/dz sits in the first lz input columns; label columns are constants.
      for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < lz; ++j) {
          const double dz = din(i, j);
          dmq(i, j) += dz;
          dvq(i, j) += dz * eps[l](i, j) / (2.0 * std::sqrt(vq(i, j)));
        }
    }
  }

  if (g) {
    nn::accumulate(*g->encoder, nn::mlp_backward(encoder_net, enc_tape, {dmq, dvq}));
    for (int k = 0; k < 2; ++k)
      nn::accumulate(*g->gmm, nn::mlp_backward(gmm_net, gmm_tape[k], {dmp[k], dvp[k]}));
  }

  out.bound.resize(B);
  for (std::size_t i = 0; i < B; ++i) out.bound[i] = -kl[i] + recon[i];
  return out;
}

}  // namespace ri::internal
