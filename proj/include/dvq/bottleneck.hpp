#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "dvq/autograd.hpp"
#include "dvq/depthwise.hpp"
#include "dvq/images.hpp"
#include "dvq/matrix.hpp"
#include "dvq/metrics.hpp"

namespace dvq {

enum class BottleneckKind { DVQ, VQ, SVQ };

std::string to_string(BottleneckKind k);
BottleneckKind parse_bottleneck(const std::string& name);

enum class OptimizerKind { SGD, Adam };

/**
 * Architecture and training settings for the autoencoder.
 *
 * The encoder maps each patch x patch tile to a `latent_dim` vector, so the
 * latent grid is (width / patch) x (height / patch) x latent_dim. Code
 * budgets are matched across bottlenecks: DVQ uses `slices` codebooks of
 * `codes` entries over latent_dim / slices features, SVQ uses `slices`
 * full-depth codebooks of `codes` entries over horizontal bands of the grid,
 * and VQ uses a single full-depth codebook of codes * slices entries.
 */
struct BottleneckConfig {
  BottleneckKind kind = BottleneckKind::DVQ;
  std::size_t image_height = 8;
  std::size_t image_width = 8;
  std::size_t channels = 1;
  std::size_t patch = 2;
  std::vector<std::size_t> encoder_hidden{32};
  std::vector<std::size_t> decoder_hidden{32};
  std::size_t latent_dim = 16;
  std::size_t codes = 32;
  std::size_t slices = 4;
  double beta = 0.25;
  double codebook_init_scale = 1.0;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double lr = 2e-3;
  std::size_t batch = 32;
  std::size_t steps = 2000;
  std::uint64_t seed = 0;
  std::size_t eval_every = 100;
  std::size_t checkpoint_every = 0;  // 0 disables periodic checkpoints
  unsigned workers = 1;

  std::size_t grid_width() const { return image_width / patch; }
  std::size_t grid_height() const { return image_height / patch; }
  std::size_t positions() const { return grid_width() * grid_height(); }
  std::size_t patch_dims() const { return patch * patch * channels; }
  std::size_t codebook_count() const { return kind == BottleneckKind::VQ ? 1 : slices; }
  std::size_t codes_per_book() const { return kind == BottleneckKind::VQ ? codes * slices : codes; }
  std::size_t codebook_dim() const {
    return kind == BottleneckKind::DVQ ? latent_dim / slices : latent_dim;
  }

  void validate() const;
};

struct DenseLayer {
  Matrix weight;  // in x out
  Matrix bias;    // 1 x out

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Encoder and decoder stacks: affine layers with tanh between them, linear output.
struct EncoderDecoderParams {
  std::vector<DenseLayer> encoder;
  std::vector<DenseLayer> decoder;

  friend bool operator==(const EncoderDecoderParams&, const EncoderDecoderParams&) = default;
};

struct AdamState {
  std::size_t t = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// Everything needed to resume training bit-exactly.
struct BottleneckState {
  BottleneckConfig config;
  EncoderDecoderParams nets;
  std::vector<Matrix> codebooks;
  AdamState adam;
  std::size_t step = 0;
  std::mt19937_64 batch_rng;

  CodebookBank bank() const;  // DVQ only
  std::vector<Codebook> codebook_list() const;
};

/// Xavier-style N(0, 1/fan_in) weights, zero biases, N(0, scale^2) codebooks.
BottleneckState init_bottleneck(const BottleneckConfig& config);

/// Forward pass of the encoder on patch rows (one row per latent position).
Matrix encode_patches(const Matrix& patches, const EncoderDecoderParams& nets);

/// Encodes a single image (HWC row vector) into its latent grid.
LatentGrid encode(std::span<const double> image, const BottleneckState& state);

/// Decodes latent rows back to patch rows.
Matrix decode_latents(const Matrix& latents, const EncoderDecoderParams& nets);

/// Mean squared error over all elements.
double reconstruction_loss(const Matrix& x, const Matrix& x_hat);

/// Quantizer output for a batch of latent rows, grouped per codebook.
/**
 * Quantizer output for a batch of latent rows. A slot is one codebook lookup
 * per row: DVQ has one slot per slice, VQ and SVQ a single slot. For slot s
 * and row r, books[s][r] names the codebook used and codes[s][r] the entry.
 */
struct BottleneckQuantization {
  Matrix z_q;
  std::vector<std::vector<std::size_t>> codes;
  std::vector<std::vector<std::size_t>> books;
};

BottleneckQuantization quantize_latents(const Matrix& z_e, const BottleneckState& state);

/// Straight-through estimator: forward value exactly z_q, gradient copied to z_e only.
ag::Var straight_through(ag::Tape& tape, ag::Var z_e, ag::Var z_q);

/// Tape handles for every trainable tensor, in parameter order.
struct ParameterHandles {
  std::vector<ag::Var> encoder;   // W0, b0, W1, b1, ...
  std::vector<ag::Var> decoder;
  std::vector<ag::Var> codebooks;

  std::vector<ag::Var> all() const;
};

/// The recorded forward graph for one batch.
struct ForwardGraph {
  ag::Tape tape;
  ParameterHandles params;
  ag::Var input;
  ag::Var z_e;
  ag::Var z_q;
  ag::Var decoder_input;
  ag::Var reconstruction;
  ag::Var commitment;
  ag::Var vq;
  ag::Var total;
  BottleneckQuantization quantization;
};

/**
 * Records encode -> quantize -> straight-through -> decode on a tape.
 *
 * reconstruction = MSE(x_hat, x); commitment = mean_rows ||z_e - sg(z_q)||^2
 * (reaches the encoder only); vq = mean_rows ||sg(z_e) - z_q||^2 (reaches
 * the codebooks only); total = reconstruction + beta * commitment + vq. For
 * DVQ the row distance is the sum of the per-slice distances, so the two
 * penalties equal the per-slice sums. When `frozen` is non-null its
 * assignments are reused instead of running nearest-code search.
 */
ForwardGraph build_forward(const Matrix& patches, const BottleneckState& state,
                           const BottleneckQuantization* frozen = nullptr);

LossBreakdown total_loss(const Matrix& patches, const BottleneckState& state);

/// Flat list of parameter tensors in the same order as ParameterHandles::all().
std::vector<Matrix*> parameter_tensors(BottleneckState& state);
std::vector<const Matrix*> parameter_tensors(const BottleneckState& state);

struct StepOptions {
  bool update_networks = true;
  bool update_codebooks = true;
};

/**
 * One optimization step on the given patch rows. Gradients of the total loss
 * are applied with the configured optimizer; non-finite gradients raise
 * DivergenceError. Returns the loss measured before the update.
 */
LossBreakdown backward_and_step(BottleneckState& state, const Matrix& patches,
                                StepOptions options = {});

/// Reconstruction, penalties, bits/dim and code usage on a fixed image set.
MetricsRecord evaluate(const BottleneckState& state, const ImageSet& images);

/// Called after every evaluation; return value is ignored.
using MetricsSink = std::function<void(const MetricsRecord&)>;
/// Called with the state whenever a periodic checkpoint is due.
using CheckpointSink = std::function<void(const BottleneckState&)>;

struct TrainResult {
  std::vector<MetricsRecord> eval;  // step 0 plus every eval_every steps and the final step
  LossBreakdown last_train;
};

/**
 * Minibatch training on `train`, evaluating on `eval`. Continues from
 * state.step up to config.steps, so a reloaded checkpoint resumes where it
 * left off.
 */
TrainResult train_autoencoder(BottleneckState& state, const ImageSet& train,
                              const ImageSet& eval, const MetricsSink& on_metrics = {},
                              const CheckpointSink& on_checkpoint = {});

/// Draws the next batch of image indices from the state's RNG.
std::vector<std::size_t> next_batch(BottleneckState& state, std::size_t dataset_size);

// Versioned checkpoint container, see README for the layout.
void write_checkpoint(std::ostream& out, const BottleneckState& state);
BottleneckState read_checkpoint(std::istream& in);

class KeyValueConfig;

/// Reads the bottleneck keys of a config; unspecified keys keep their defaults.
BottleneckConfig bottleneck_config_from(const KeyValueConfig& kv);

/// Key-value text form of a config (one "key = value" per line, all keys).
std::string config_to_text(const BottleneckConfig& config);

}  // namespace dvq
