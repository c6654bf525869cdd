#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dvq/matrix.hpp"

namespace dvq {

/// Per-step decomposition of the bottleneck objective.
struct LossBreakdown {
  double reconstruction = 0.0;
  double commitment = 0.0;
  double vq = 0.0;
  double total = 0.0;  // reconstruction + beta * commitment + vq
  double beta = 0.0;

  friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

/// nll_nats_total / (num_dims * ln 2). Throws ShapeError when num_dims == 0.
double bits_per_dim(double nll_nats_total, std::size_t num_dims);

/**
 * Total negative log-likelihood (nats) of 8-bit images under a per-pixel
 * Gaussian with mean `mean` and std `sigma`, discretized to 256 bins.
 *
 * Targets are in [0, 1] and snapped to the nearest of the 256 levels k/255.
 * Bin k covers [k/255 - 1/510, k/255 + 1/510]; the outermost bins extend
 * to -inf and +inf, so the 256 probabilities sum to one. Each bin probability
 * is floored at 1e-300 so the total stays finite.
 */
double discretized_gaussian_nll(const Matrix& targets, const Matrix& mean, double sigma);

/**
 * Scale used for reported bits/dim: the maximum-likelihood Gaussian std
 * sqrt(MSE), floored at one quantization step (1/255) so a perfect
 * reconstruction still yields a proper distribution.
 */
double reporting_sigma(double mse);

struct UsageStats {
  std::vector<std::size_t> counts;
  double perplexity = 1.0;  // exp(entropy of counts / total)
};

/// Histogram of code indices in [0, codes). Throws ShapeError on out-of-range entries.
UsageStats codebook_usage(std::span<const std::size_t> indices, std::size_t codes);

/// One row of the training metrics stream.
struct MetricsRecord {
  std::size_t step = 0;
  std::string split;  // "train" or "eval"
  LossBreakdown loss;
  double bits_per_dim = 0.0;
  std::vector<std::vector<std::size_t>> usage;  // per codebook, K counts each
  std::vector<double> perplexity;               // per codebook

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

/**
 * Published bits/dim for reference only. These come from full-size VQVAE
 * architectures trained for ~100k large-batch steps and are not comparable
 * to the desk-scale numbers produced here.
 */
namespace published_bits_per_dim {
inline constexpr double kCifar10Vqvae = 4.67;
inline constexpr double kCifar10Dvq = 3.15;
inline constexpr double kCifar10Svq = 5.85;
inline constexpr double kCifar10GatedPixelCnn = 3.03;
inline constexpr double kImagenet32Vqvae = 4.92;
inline constexpr double kImagenet32Dvq = 3.76;
inline constexpr double kImagenet32GatedPixelCnn = 3.83;
inline constexpr double kImagenet64Vqvae = 4.66;
inline constexpr double kImagenet64Dvq = 3.50;
inline constexpr double kImagenet64GatedPixelCnn = 3.57;
}  // namespace published_bits_per_dim

}  // namespace dvq
