#pragma once

#include <cmath>
#include <vector>

#include "dvq/bottleneck.hpp"

// Independent reference computations for the autoencoder bottleneck.
namespace dvq::testing {

inline constexpr BottleneckKind kKinds[] = {BottleneckKind::DVQ, BottleneckKind::VQ, BottleneckKind::SVQ};

// Tiny model for exhaustive finite differences: 4x4 images, 2x2 patches.
inline BottleneckConfig tiny_config(BottleneckKind kind) {
  BottleneckConfig c;
  c.kind = kind;
  c.image_height = 4;
  c.image_width = 4;
  c.patch = 2;
  c.encoder_hidden = {2};
  c.decoder_hidden = {2};
  c.latent_dim = 2;
  c.codes = 3;
  c.slices = 2;
  c.batch = 4;
  c.seed = 11;
  return c;
}

inline std::size_t parameter_count(const BottleneckState& s) {
  std::size_t n = 0;
  for (const auto* p : parameter_tensors(s)) n += p->size();
  return n;
}

// Independent forward pass: tanh on hidden layers, affine output.
inline Matrix oracle_mlp(const Matrix& x, const std::vector<DenseLayer>& layers) {
  Matrix h = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& W = layers[l].weight;
    Matrix out(h.rows(), W.cols());
    for (std::size_t i = 0; i < h.rows(); ++i) {
      for (std::size_t j = 0; j < W.cols(); ++j) {
        double acc = layers[l].bias(0, j);
        for (std::size_t k = 0; k < W.rows(); ++k) acc += h(i, k) * W(k, j);
        out(i, j) = l + 1 < layers.size() ? std::tanh(acc) : acc;
      }
    }
    h = std::move(out);
  }
  return h;
}

// Rebuilds z_q from frozen (book, code) picks, concatenating slots column-wise.
inline Matrix oracle_lookup(const BottleneckQuantization& q, const std::vector<Matrix>& books) {
  const std::size_t rows = q.codes.front().size();
  std::size_t cols = 0;
  for (std::size_t s = 0; s < q.codes.size(); ++s) cols += books[q.books[s][0]].cols();
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t c0 = 0;
    for (std::size_t s = 0; s < q.codes.size(); ++s) {
      const auto& cb = books[q.books[s][r]];
      for (std::size_t j = 0; j < cb.cols(); ++j) out(r, c0 + j) = cb(q.codes[s][r], j);
      c0 += cb.cols();
    }
  }
  return out;
}

inline double sq_sum(const Matrix& a, const Matrix& b) {
  double t = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) t += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
  return t;
}

/**
 * Surrogate objective whose exact derivative the straight-through graph
 * computes. Assignments and the straight-through offset (z_q - z_e at the
 * base point) are frozen; each penalty sees the other side as a constant.
 */
inline double oracle_surrogate(const BottleneckState& s, const Matrix& x, const BottleneckQuantization& q,
                        const Matrix& z_e0, const Matrix& z_q0) {
  const Matrix z_e = oracle_mlp(x, s.nets.encoder);
  const Matrix z_q = oracle_lookup(q, s.codebooks);
  Matrix dec_in = z_e;
  for (std::size_t i = 0; i < dec_in.size(); ++i) dec_in.data()[i] += z_q0.data()[i] - z_e0.data()[i];
  const Matrix x_hat = oracle_mlp(dec_in, s.nets.decoder);
  const double rows = static_cast<double>(x.rows());
  return sq_sum(x_hat, x) / static_cast<double>(x.size()) + s.config.beta * sq_sum(z_e, z_q0) / rows +
         sq_sum(z_e0, z_q) / rows;
}

}  // namespace dvq::testing
