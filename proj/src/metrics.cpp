#include "dvq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace dvq {

double bits_per_dim(double nll_nats_total, std::size_t num_dims) {
  if (num_dims == 0) throw ShapeError("bits_per_dim: num_dims must be >= 1");
  return nll_nats_total / (static_cast<double>(num_dims) * std::numbers::ln2);
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

double discretized_gaussian_nll(const Matrix& targets, const Matrix& mean, double sigma) {
  if (!targets.same_shape(mean)) throw ShapeError("discretized_gaussian_nll: shape mismatch");
  if (!(sigma > 0.0)) throw ShapeError("discretized_gaussian_nll: sigma must be > 0");
  constexpr double kHalfBin = 1.0 / 510.0;
  double nll = 0.0;
  const auto& x = targets.data();
  const auto& mu = mean.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long level = std::clamp(std::lround(x[i] * 255.0), 0L, 255L);
    const double centre = static_cast<double>(level) / 255.0;
    const double upper = level == 255 ? 1.0 : normal_cdf((centre + kHalfBin - mu[i]) / sigma);
    const double lower = level == 0 ? 0.0 : normal_cdf((centre - kHalfBin - mu[i]) / sigma);
    nll -= std::log(std::max(upper - lower, 1e-300));
  }
  return nll;
}

double reporting_sigma(double mse) { return std::max(std::sqrt(std::max(mse, 0.0)), 1.0 / 255.0); }

UsageStats codebook_usage(std::span<const std::size_t> indices, std::size_t codes) {
  if (codes == 0) throw ShapeError("codebook_usage: codes must be >= 1");
  UsageStats stats{std::vector<std::size_t>(codes, 0), 1.0};
  for (auto i : indices) {
    if (i >= codes) {
      throw ShapeError("codebook_usage: index " + std::to_string(i) + " outside [0, " +
                       std::to_string(codes) + ")");
    }
    ++stats.counts[i];
  }
  if (indices.empty()) return stats;
  const double total = static_cast<double>(indices.size());
  double entropy = 0.0;
  for (auto c : stats.counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    entropy -= p * std::log(p);
  }
  stats.perplexity = std::exp(entropy);
  return stats;
}

}  // namespace dvq
