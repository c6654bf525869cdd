#include "dvq/bottleneck.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "dvq/binary_io.hpp"
#include "dvq/config.hpp"
#include "dvq/errors.hpp"

namespace dvq {

namespace {
constexpr std::string_view kCheckpointMagic = "DVQCK001";
constexpr std::uint64_t kCheckpointVersion = 1;
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr std::uint64_t kBatchStream = 0x5851F42D4C957F2DULL;
}  // namespace

std::string to_string(BottleneckKind k) {
  switch (k) {
    case BottleneckKind::DVQ: return "DVQ";
    case BottleneckKind::VQ: return "VQ";
    case BottleneckKind::SVQ: return "SVQ";
  }
  return "?";
}

BottleneckKind parse_bottleneck(const std::string& name) {
  for (auto k : {BottleneckKind::DVQ, BottleneckKind::VQ, BottleneckKind::SVQ}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown bottleneck '" + name + "' (DVQ, VQ, SVQ)");
}

void BottleneckConfig::validate() const {
  if (image_height == 0 || image_width == 0 || channels == 0) {
    throw ConfigError("bottleneck: image shape must be positive");
  }
  if (patch == 0 || image_height % patch != 0 || image_width % patch != 0) {
    throw ConfigError("bottleneck: image sides must be multiples of patch");
  }
  if (latent_dim == 0 || codes == 0 || slices == 0) {
    throw ConfigError("bottleneck: latent_dim, codes and slices must be >= 1");
  }
  if (kind == BottleneckKind::DVQ && latent_dim % slices != 0) {
    throw ConfigError("bottleneck: DVQ needs latent_dim divisible by slices");
  }
  if (kind == BottleneckKind::SVQ && slices > grid_height()) {
    throw ConfigError("bottleneck: SVQ needs slices <= latent grid height");
  }
  for (auto h : encoder_hidden) {
    if (h == 0) throw ConfigError("bottleneck: hidden layer widths must be >= 1");
  }
  for (auto h : decoder_hidden) {
    if (h == 0) throw ConfigError("bottleneck: hidden layer widths must be >= 1");
  }
  if (!(beta >= 0.0)) throw ConfigError("bottleneck: beta must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("bottleneck: lr must be > 0");
  if (!(codebook_init_scale > 0.0)) throw ConfigError("bottleneck: codebook_init_scale must be > 0");
  if (batch == 0) throw ConfigError("bottleneck: batch must be >= 1");
  if (eval_every == 0) throw ConfigError("bottleneck: eval_every must be >= 1");
}

CodebookBank BottleneckState::bank() const {
  if (config.kind != BottleneckKind::DVQ) throw ConfigError("bank(): only DVQ has a feature split");
  return CodebookBank(codebook_list(), FeatureSplitSpec::equal(config.latent_dim, config.slices));
}

std::vector<Codebook> BottleneckState::codebook_list() const {
  std::vector<Codebook> out;
  out.reserve(codebooks.size());
  for (const auto& m : codebooks) out.emplace_back(m);
  return out;
}

namespace {

std::vector<DenseLayer> init_stack(std::size_t in, const std::vector<std::size_t>& hidden,
                                   std::size_t out, std::mt19937_64& rng) {
  std::vector<std::size_t> widths{in};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(out);
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(widths[l])));
    DenseLayer layer{Matrix(widths[l], widths[l + 1]), Matrix(1, widths[l + 1])};
    for (auto& w : layer.weight.data()) w = dist(rng);
    layers.push_back(std::move(layer));
  }
  return layers;
}

Matrix forward_stack(Matrix h, const std::vector<DenseLayer>& layers) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& W = layers[l].weight;
    if (h.cols() != W.rows()) throw ShapeError("forward: input width does not match layer");
    Matrix next(h.rows(), W.cols());
    for (std::size_t i = 0; i < h.rows(); ++i) {
      auto o = next.row(i);
      std::ranges::copy(layers[l].bias.row(0), o.begin());
      for (std::size_t k = 0; k < W.rows(); ++k) {
        const double hik = h(i, k);
        auto wrow = W.row(k);
        for (std::size_t j = 0; j < W.cols(); ++j) o[j] += hik * wrow[j];
      }
      if (l + 1 < layers.size()) {
        for (auto& v : o) v = std::tanh(v);
      }
    }
    h = std::move(next);
  }
  return h;
}

ag::Var record_stack(ag::Tape& tape, ag::Var h, std::span<const ag::Var> handles) {
  const std::size_t layers = handles.size() / 2;
  for (std::size_t l = 0; l < layers; ++l) {
    h = tape.add_row_bias(tape.matmul(h, handles[2 * l]), handles[2 * l + 1]);
    if (l + 1 < layers) h = tape.tanh(h);
  }
  return h;
}

SpatialPartition svq_partition(const BottleneckConfig& c) {
  return SpatialPartition::row_bands(c.grid_width(), c.grid_height(), c.slices);
}

}  // namespace

BottleneckState init_bottleneck(const BottleneckConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  BottleneckState state{config, {}, {}, {}, 0, std::mt19937_64(config.seed ^ kBatchStream)};
  state.nets.encoder = init_stack(config.patch_dims(), config.encoder_hidden, config.latent_dim, rng);
  state.nets.decoder = init_stack(config.latent_dim, config.decoder_hidden, config.patch_dims(), rng);
  std::normal_distribution<double> code_dist(0.0, config.codebook_init_scale);
  for (std::size_t b = 0; b < config.codebook_count(); ++b) {
    Matrix cb(config.codes_per_book(), config.codebook_dim());
    for (auto& v : cb.data()) v = code_dist(rng);
    state.codebooks.push_back(std::move(cb));
  }
  return state;
}

Matrix encode_patches(const Matrix& patches, const EncoderDecoderParams& nets) {
  return forward_stack(patches, nets.encoder);
}

Matrix decode_latents(const Matrix& latents, const EncoderDecoderParams& nets) {
  return forward_stack(latents, nets.decoder);
}

LatentGrid encode(std::span<const double> image, const BottleneckState& state) {
  const auto& c = state.config;
  if (image.size() != c.image_height * c.image_width * c.channels) {
    throw ShapeError("encode: image size does not match the configured input shape");
  }
  Matrix one(1, image.size(), std::vector<double>(image.begin(), image.end()));
  const Matrix patches = patchify(one, c.image_height, c.image_width, c.channels, c.patch);
  return LatentGrid(c.grid_width(), c.grid_height(), encode_patches(patches, state.nets));
}

double reconstruction_loss(const Matrix& x, const Matrix& x_hat) {
  if (!x.same_shape(x_hat)) throw ShapeError("reconstruction_loss: shape mismatch");
  if (x.empty()) throw ShapeError("reconstruction_loss: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x.data()[i] - x_hat.data()[i];
    total += d * d;
  }
  return total / static_cast<double>(x.size());
}

BottleneckQuantization quantize_latents(const Matrix& z_e, const BottleneckState& state) {
  const auto& c = state.config;
  if (z_e.cols() != c.latent_dim) throw ShapeError("quantize_latents: latent depth mismatch");
  const std::size_t n = z_e.rows();
  BottleneckQuantization q;
  switch (c.kind) {
    case BottleneckKind::DVQ: {
      const auto r = dvq_quantize(z_e, state.bank(), c.workers);
      q.z_q = r.z_q;
      q.codes.assign(c.slices, std::vector<std::size_t>(n));
      q.books.assign(c.slices, std::vector<std::size_t>(n));
      for (std::size_t s = 0; s < c.slices; ++s) {
        for (std::size_t p = 0; p < n; ++p) {
          q.codes[s][p] = r.index(p, s);
          q.books[s][p] = s;
        }
      }
      break;
    }
    case BottleneckKind::VQ: {
      auto r = quantize_batch(z_e, Codebook(state.codebooks.front()), c.workers);
      q.z_q = std::move(r.codes);
      q.codes.push_back(std::move(r.indices));
      q.books.emplace_back(n, 0);
      break;
    }
    case BottleneckKind::SVQ: {
      const auto part = svq_partition(c);
      const auto books = state.codebook_list();
      const auto r = svq_quantize(z_e, books, part);
      q.z_q = r.z_q;
      q.codes.push_back(r.indices);
      q.books.emplace_back(n);
      for (std::size_t p = 0; p < n; ++p) q.books[0][p] = part.cell_of[p % c.positions()];
      break;
    }
  }
  return q;
}

ag::Var straight_through(ag::Tape& tape, ag::Var z_e, ag::Var z_q) {
  if (!tape.value(z_e).same_shape(tape.value(z_q))) {
    throw ShapeError("straight_through: z_e and z_q shapes differ");
  }
  // Same gradient as z_e + sg(z_q - z_e), but the forward value is exactly z_q.
  return tape.add(tape.stop_gradient(z_q), tape.sub(z_e, tape.stop_gradient(z_e)));
}

std::vector<ag::Var> ParameterHandles::all() const {
  std::vector<ag::Var> out(encoder);
  out.insert(out.end(), decoder.begin(), decoder.end());
  out.insert(out.end(), codebooks.begin(), codebooks.end());
  return out;
}

ForwardGraph build_forward(const Matrix& patches, const BottleneckState& state,
                           const BottleneckQuantization* frozen) {
  const auto& c = state.config;
  if (patches.cols() != c.patch_dims() || patches.rows() == 0 ||
      patches.rows() % c.positions() != 0) {
    throw ShapeError("build_forward: patch rows do not match the configured input shape");
  }
  ForwardGraph g;
  auto& t = g.tape;
  g.input = t.constant(patches);
  for (const auto& layer : state.nets.encoder) {
    g.params.encoder.push_back(t.variable(layer.weight));
    g.params.encoder.push_back(t.variable(layer.bias));
  }
  for (const auto& layer : state.nets.decoder) {
    g.params.decoder.push_back(t.variable(layer.weight));
    g.params.decoder.push_back(t.variable(layer.bias));
  }
  for (const auto& cb : state.codebooks) g.params.codebooks.push_back(t.variable(cb));

  g.z_e = record_stack(t, g.input, g.params.encoder);
  g.quantization = frozen ? *frozen : quantize_latents(t.value(g.z_e), state);
  const auto& q = g.quantization;
  if (q.codes.empty() || q.codes.front().size() != patches.rows()) {
    throw ShapeError("build_forward: quantization does not match the batch");
  }

  std::vector<ag::Var> slot_values;
  for (std::size_t s = 0; s < q.codes.size(); ++s) {
    std::vector<std::pair<std::size_t, std::size_t>> picks(patches.rows());
    for (std::size_t r = 0; r < picks.size(); ++r) picks[r] = {q.books[s][r], q.codes[s][r]};
    slot_values.push_back(t.gather_rows(g.params.codebooks, std::move(picks)));
  }
  g.z_q = slot_values.size() == 1 ? slot_values.front() : t.concat_cols(slot_values);

  g.decoder_input = straight_through(t, g.z_e, g.z_q);
  const ag::Var x_hat = record_stack(t, g.decoder_input, g.params.decoder);
  g.reconstruction = t.mean_squared_error(x_hat, g.input);
  g.commitment = t.mean_row_sq_distance(g.z_e, t.stop_gradient(g.z_q));
  g.vq = t.mean_row_sq_distance(t.stop_gradient(g.z_e), g.z_q);
  g.total = t.add(t.add(g.reconstruction, t.scale(g.commitment, c.beta)), g.vq);
  return g;
}

namespace {

LossBreakdown breakdown_of(const ForwardGraph& g, double beta) {
  return {g.tape.scalar(g.reconstruction), g.tape.scalar(g.commitment), g.tape.scalar(g.vq),
          g.tape.scalar(g.total), beta};
}

}  // namespace

LossBreakdown total_loss(const Matrix& patches, const BottleneckState& state) {
  return breakdown_of(build_forward(patches, state), state.config.beta);
}

std::vector<Matrix*> parameter_tensors(BottleneckState& state) {
  std::vector<Matrix*> out;
  for (auto& l : state.nets.encoder) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  for (auto& l : state.nets.decoder) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  for (auto& cb : state.codebooks) out.push_back(&cb);
  return out;
}

std::vector<const Matrix*> parameter_tensors(const BottleneckState& state) {
  auto mut = parameter_tensors(const_cast<BottleneckState&>(state));
  return {mut.begin(), mut.end()};
}

LossBreakdown backward_and_step(BottleneckState& state, const Matrix& patches,
                                StepOptions options) {
  auto g = build_forward(patches, state);
  const auto loss = breakdown_of(g, state.config.beta);
  const long step = static_cast<long>(state.step);
  if (!std::isfinite(loss.total)) throw DivergenceError("backward_and_step: non-finite loss", step);
  g.tape.backward(g.total);

  const auto handles = g.params.all();
  auto tensors = parameter_tensors(state);
  const std::size_t network_tensors = g.params.encoder.size() + g.params.decoder.size();
  for (auto h : handles) {
    if (!g.tape.grad(h).all_finite()) {
      throw DivergenceError("backward_and_step: non-finite gradient", step);
    }
  }

  auto& adam = state.adam;
  if (state.config.optimizer == OptimizerKind::Adam) {
    if (adam.m.empty()) {
      for (auto* p : tensors) {
        adam.m.emplace_back(p->rows(), p->cols());
        adam.v.emplace_back(p->rows(), p->cols());
      }
    }
    ++adam.t;
  }
  const double lr = state.config.lr;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(adam.t));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(adam.t));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const bool is_network = i < network_tensors;
    if ((is_network && !options.update_networks) || (!is_network && !options.update_codebooks)) {
      continue;
    }
    auto& p = tensors[i]->data();
    const auto& grad = g.tape.grad(handles[i]).data();
    if (state.config.optimizer == OptimizerKind::SGD) {
      for (std::size_t j = 0; j < p.size(); ++j) p[j] -= lr * grad[j];
      continue;
    }
    auto& m = adam.m[i].data();
    auto& v = adam.v[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = kAdamBeta1 * m[j] + (1.0 - kAdamBeta1) * grad[j];
      v[j] = kAdamBeta2 * v[j] + (1.0 - kAdamBeta2) * grad[j] * grad[j];
      p[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + kAdamEps);
    }
  }
  ++state.step;
  return loss;
}

MetricsRecord evaluate(const BottleneckState& state, const ImageSet& images) {
  const auto& c = state.config;
  images.validate();
  if (images.height != c.image_height || images.width != c.image_width ||
      images.channels != c.channels) {
    throw ShapeError("evaluate: image shape does not match the model");
  }
  if (images.count() == 0) throw ShapeError("evaluate: empty image set");
  const Matrix patches = patchify(images.pixels, c.image_height, c.image_width, c.channels, c.patch);
  const Matrix z_e = encode_patches(patches, state.nets);
  const auto q = quantize_latents(z_e, state);
  const Matrix x_hat = decode_latents(q.z_q, state.nets);

  MetricsRecord rec;
  rec.step = state.step;
  rec.split = "eval";
  rec.loss.beta = c.beta;
  rec.loss.reconstruction = reconstruction_loss(patches, x_hat);
  double dist = 0.0;
  for (std::size_t i = 0; i < z_e.size(); ++i) {
    const double d = z_e.data()[i] - q.z_q.data()[i];
    dist += d * d;
  }
  rec.loss.commitment = rec.loss.vq = dist / static_cast<double>(z_e.rows());
  rec.loss.total = rec.loss.reconstruction + c.beta * rec.loss.commitment + rec.loss.vq;

  // Bits/dim are measured on the 8-bit scale, so map the pixel range onto [0, 1].
  const double span = images.value_max - images.value_min;
  Matrix unit_x = patches, unit_mean = x_hat;
  for (auto& v : unit_x.data()) v = (v - images.value_min) / span;
  for (auto& v : unit_mean.data()) v = (v - images.value_min) / span;
  const double sigma = reporting_sigma(rec.loss.reconstruction / (span * span));
  rec.bits_per_dim = bits_per_dim(discretized_gaussian_nll(unit_x, unit_mean, sigma), unit_x.size());

  std::vector<std::vector<std::size_t>> per_book(c.codebook_count());
  for (std::size_t s = 0; s < q.codes.size(); ++s) {
    for (std::size_t r = 0; r < q.codes[s].size(); ++r) per_book[q.books[s][r]].push_back(q.codes[s][r]);
  }
  for (const auto& idx : per_book) {
    auto usage = codebook_usage(idx, c.codes_per_book());
    rec.usage.push_back(std::move(usage.counts));
    rec.perplexity.push_back(usage.perplexity);
  }
  return rec;
}

std::vector<std::size_t> next_batch(BottleneckState& state, std::size_t dataset_size) {
  if (dataset_size == 0) throw DataError("next_batch: empty dataset");
  std::uniform_int_distribution<std::size_t> pick(0, dataset_size - 1);
  std::vector<std::size_t> ids(state.config.batch);
  for (auto& i : ids) i = pick(state.batch_rng);
  return ids;
}

TrainResult train_autoencoder(BottleneckState& state, const ImageSet& train, const ImageSet& eval,
                              const MetricsSink& on_metrics, const CheckpointSink& on_checkpoint) {
  const auto& c = state.config;
  c.validate();
  train.validate();
  if (train.height != c.image_height || train.width != c.image_width ||
      train.channels != c.channels) {
    throw DataError("train_autoencoder: dataset shape does not match the configured input");
  }
  TrainResult result;
  auto emit = [&] {
    result.eval.push_back(evaluate(state, eval));
    if (on_metrics) on_metrics(result.eval.back());
  };
  if (state.step == 0) emit();
  while (state.step < c.steps) {
    const auto ids = next_batch(state, train.count());
    const Matrix images = gather_rows(train.pixels, ids);
    const Matrix patches = patchify(images, c.image_height, c.image_width, c.channels, c.patch);
    result.last_train = backward_and_step(state, patches);
    if (state.step % c.eval_every == 0 || state.step == c.steps) emit();
    if (on_checkpoint && c.checkpoint_every > 0 && state.step % c.checkpoint_every == 0) {
      on_checkpoint(state);
    }
  }
  return result;
}

BottleneckConfig bottleneck_config_from(const KeyValueConfig& kv) {
  BottleneckConfig c;
  c.kind = parse_bottleneck(kv.get_string("bottleneck", to_string(c.kind)));
  c.image_height = kv.get_size("image_height", c.image_height);
  c.image_width = kv.get_size("image_width", c.image_width);
  c.channels = kv.get_size("channels", c.channels);
  c.patch = kv.get_size("patch", c.patch);
  c.encoder_hidden = kv.get_size_list("encoder_hidden", c.encoder_hidden);
  c.decoder_hidden = kv.get_size_list("decoder_hidden", c.decoder_hidden);
  c.latent_dim = kv.get_size("latent_dim", c.latent_dim);
  c.codes = kv.get_size("codes", c.codes);
  c.slices = kv.get_size("slices", c.slices);
  c.beta = kv.get_double("beta", c.beta);
  c.codebook_init_scale = kv.get_double("codebook_init_scale", c.codebook_init_scale);
  const auto opt = kv.get_string("optimizer", c.optimizer == OptimizerKind::Adam ? "adam" : "sgd");
  if (opt == "adam") {
    c.optimizer = OptimizerKind::Adam;
  } else if (opt == "sgd") {
    c.optimizer = OptimizerKind::SGD;
  } else {
    throw ConfigError("unknown optimizer '" + opt + "' (adam, sgd)");
  }
  c.lr = kv.get_double("lr", c.lr);
  c.batch = kv.get_size("batch", c.batch);
  c.steps = kv.get_size("steps", c.steps);
  c.seed = kv.get_u64("seed", c.seed);
  c.eval_every = kv.get_size("eval_every", c.eval_every);
  c.checkpoint_every = kv.get_size("checkpoint_every", c.checkpoint_every);
  return c;
}

std::string config_to_text(const BottleneckConfig& c) {
  KeyValueConfig kv;
  kv.set("bottleneck", to_string(c.kind));
  kv.set("image_height", std::to_string(c.image_height));
  kv.set("image_width", std::to_string(c.image_width));
  kv.set("channels", std::to_string(c.channels));
  kv.set("patch", std::to_string(c.patch));
  kv.set("encoder_hidden", join_sizes(c.encoder_hidden));
  kv.set("decoder_hidden", join_sizes(c.decoder_hidden));
  kv.set("latent_dim", std::to_string(c.latent_dim));
  kv.set("codes", std::to_string(c.codes));
  kv.set("slices", std::to_string(c.slices));
  kv.set("beta", format_double(c.beta));
  kv.set("codebook_init_scale", format_double(c.codebook_init_scale));
  kv.set("optimizer", c.optimizer == OptimizerKind::Adam ? "adam" : "sgd");
  kv.set("lr", format_double(c.lr));
  kv.set("batch", std::to_string(c.batch));
  kv.set("steps", std::to_string(c.steps));
  kv.set("seed", std::to_string(c.seed));
  kv.set("eval_every", std::to_string(c.eval_every));
  kv.set("checkpoint_every", std::to_string(c.checkpoint_every));
  return kv.to_text();
}

void write_checkpoint(std::ostream& out, const BottleneckState& state) {
  binio::write_magic(out, kCheckpointMagic);
  binio::write_u64(out, kCheckpointVersion);
  binio::write_string(out, config_to_text(state.config));
  binio::write_u64(out, state.step);
  for (const auto* stack : {&state.nets.encoder, &state.nets.decoder}) {
    binio::write_u64(out, stack->size());
    for (const auto& l : *stack) {
      binio::write_matrix(out, l.weight);
      binio::write_matrix(out, l.bias);
    }
  }
  binio::write_u64(out, state.codebooks.size());
  for (const auto& cb : state.codebooks) binio::write_matrix(out, cb);
  binio::write_u64(out, state.adam.t);
  binio::write_u64(out, state.adam.m.size());
  for (const auto& m : state.adam.m) binio::write_matrix(out, m);
  for (const auto& v : state.adam.v) binio::write_matrix(out, v);
  std::ostringstream rng;
  rng << state.batch_rng;
  binio::write_string(out, rng.str());
  if (!out) throw DataError("write_checkpoint: stream failure");
}

BottleneckState read_checkpoint(std::istream& in) {
  binio::expect_magic(in, kCheckpointMagic);
  const auto version = binio::read_u64(in);
  if (version != kCheckpointVersion) {
    throw DataError("read_checkpoint: unsupported version " + std::to_string(version));
  }
  const auto config = bottleneck_config_from(KeyValueConfig::parse_string(binio::read_string(in)));
  BottleneckState state = init_bottleneck(config);
  state.step = binio::read_u64(in);
  for (auto* stack : {&state.nets.encoder, &state.nets.decoder}) {
    const auto layers = binio::read_u64(in);
    if (layers != stack->size()) throw DataError("read_checkpoint: layer count differs from config");
    for (auto& l : *stack) {
      auto w = binio::read_matrix(in);
      auto b = binio::read_matrix(in);
      if (!w.same_shape(l.weight) || !b.same_shape(l.bias)) {
        throw DataError("read_checkpoint: layer shape differs from config");
      }
      l = {std::move(w), std::move(b)};
    }
  }
  if (binio::read_u64(in) != state.codebooks.size()) {
    throw DataError("read_checkpoint: codebook count differs from config");
  }
  for (auto& cb : state.codebooks) {
    auto m = binio::read_matrix(in);
    if (!m.same_shape(cb)) throw DataError("read_checkpoint: codebook shape differs from config");
    cb = std::move(m);
  }
  state.adam.t = binio::read_u64(in);
  const auto moments = binio::read_u64(in);
  if (moments != 0 && moments != parameter_tensors(state).size()) {
    throw DataError("read_checkpoint: optimizer state does not match parameters");
  }
  for (std::size_t i = 0; i < moments; ++i) state.adam.m.push_back(binio::read_matrix(in));
  for (std::size_t i = 0; i < moments; ++i) state.adam.v.push_back(binio::read_matrix(in));
  std::istringstream rng(binio::read_string(in));
  rng >> state.batch_rng;
  if (!rng) throw DataError("read_checkpoint: corrupt RNG state");
  return state;
}

}  // namespace dvq
