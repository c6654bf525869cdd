#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dvq/codebook.hpp"
#include "dvq/depthwise.hpp"
#include "dvq/matrix.hpp"

namespace dvq {

/// Gaussian-mixture ("blob") dataset with a known number of components.
struct BlobSpec {
  std::size_t components = 70;  // N_G
  std::size_t dim = 64;
  double center_low = -1.0;
  double center_high = 1.0;
  double sigma = 0.01;
  std::size_t samples = 10000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct BlobDataset {
  Matrix samples;                   // samples x dim
  std::vector<std::size_t> labels;  // generating component per sample
  Matrix means;                     // components x dim
};

/**
 * Draws component means uniformly from [center_low, center_high]^dim, then
 * each sample as a uniformly chosen mean plus isotropic N(0, sigma^2) noise.
 * Bit-reproducible for a given seed.
 */
BlobDataset generate_blobs(const BlobSpec& spec);

/// K x D codebook with i.i.d. standard normal entries.
Codebook init_codebook(std::size_t codes, std::size_t dim, std::uint64_t seed);

enum class StaticModel { DVQ, VQ, VQ_KPLUS, SVQ, RANDOM };

std::string to_string(StaticModel m);
StaticModel parse_static_model(const std::string& name);

struct StaticExperimentConfig {
  StaticModel model = StaticModel::VQ;
  std::size_t codes = 20;  // K per codebook
  std::size_t slices = 1;  // L; DVQ feature slices, SVQ sample groups
  std::size_t steps = 5000;
  double lr = 1e-2;
  std::size_t batch = 128;
  std::size_t repetitions = 10;
  std::uint64_t seed = 0;
  double test_fraction = 0.2;

  /// Number of codebooks the model trains.
  std::size_t codebook_count() const;
  void validate(std::size_t dim) const;
};

struct LossCurve {
  std::vector<std::pair<std::size_t, double>> train;  // (step, batch objective before the step)
  double initial_test_loss = 0.0;
  double final_test_loss = 0.0;
};

/**
 * Quantizer state for the static experiments. DVQ keeps one codebook per
 * feature slice. SVQ keeps `slices` full-depth codebooks and routes sample
 * i to codebook i mod L, the static-data analogue of giving each spatial
 * region its own codebook. The other models use a single codebook.
 */
struct StaticModelState {
  StaticModel model;
  std::vector<Codebook> codebooks;
  std::optional<FeatureSplitSpec> split;

  /// Mean over rows of the squared distance to the model's reconstruction.
  double objective(const Matrix& rows) const;
};

StaticModelState init_static_model(const StaticExperimentConfig& config, std::size_t dim,
                                   std::uint64_t init_seed);

struct StaticRun {
  LossCurve curve;
  StaticModelState model;
};

/**
 * Minibatch gradient descent on the mean quantization objective (summed
 * over slices for DVQ). Batches are drawn from reshuffled passes over the
 * training rows. RANDOM models and steps == 0 skip training entirely.
 * Throws DivergenceError if any batch objective becomes non-finite.
 */
StaticRun train_static(const Matrix& train, const Matrix& test,
                       const StaticExperimentConfig& config, std::uint64_t init_seed,
                       std::uint64_t shuffle_seed);

/// As above, starting from a caller-provided model instead of a random init.
StaticRun train_static(const Matrix& train, const Matrix& test,
                       const StaticExperimentConfig& config, StaticModelState initial,
                       std::uint64_t shuffle_seed);

/// Objective of an untrained init_codebook on `data`.
double random_baseline(const Matrix& data, std::size_t codes, std::uint64_t seed);

/// Deterministic per-repetition seed: splitmix64 finalizer of base ^ golden*(r+1).
std::uint64_t child_seed(std::uint64_t base, std::uint64_t repetition);

struct RepetitionSeeds {
  std::uint64_t data;
  std::uint64_t init;
  std::uint64_t shuffle;
};

RepetitionSeeds repetition_seeds(std::uint64_t base, std::size_t repetition);

/// Splits rows [0, n_train) / [n_train, n) with n_train = round(n * (1 - test_fraction)).
std::pair<Matrix, Matrix> train_test_split(const Matrix& samples, double test_fraction);

struct RepetitionResult {
  std::size_t repetition = 0;
  double final_test_loss = 0.0;
  double initial_test_loss = 0.0;
  double random_baseline = 0.0;
};

/// One Monte-Carlo repetition: regenerate data, init, train, evaluate.
RepetitionResult run_repetition(const StaticExperimentConfig& config, const BlobSpec& data_spec,
                                std::size_t repetition);

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample std; 0 for a single value
  std::size_t count = 0;
};

Summary summarize(const std::vector<double>& values);

struct MonteCarloResult {
  std::vector<RepetitionResult> repetitions;  // ordered by repetition index
  Summary test_loss;
  Summary random;
};

MonteCarloResult monte_carlo(const StaticExperimentConfig& config, const BlobSpec& data_spec,
                             unsigned workers = 1);

struct SweepCell {
  std::size_t codes = 0;
  std::size_t dim = 0;
  Summary test_loss;
  Summary random;
};

/**
 * Monte-Carlo over the full K x D grid (K outer, D inner). Every cell and
 * repetition is an independent job; cells are returned in grid order.
 */
std::vector<SweepCell> sweep_k_vs_d(const std::vector<std::size_t>& code_counts,
                                    const std::vector<std::size_t>& dims,
                                    const BlobSpec& data_template,
                                    const StaticExperimentConfig& config_template,
                                    unsigned workers = 1);

}  // namespace dvq
