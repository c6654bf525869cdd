#include "dvq/static_lab.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dvq/errors.hpp"
#include "dvq/parallel.hpp"

namespace dvq {

void BlobSpec::validate() const {
  if (components == 0) throw ConfigError("blobs: components (N_G) must be >= 1");
  if (dim == 0) throw ConfigError("blobs: dim must be >= 1");
  if (!(sigma > 0.0)) throw ConfigError("blobs: sigma must be > 0");
  if (!(center_high > center_low)) throw ConfigError("blobs: center_high must exceed center_low");
  if (samples == 0) throw ConfigError("blobs: samples must be >= 1");
}

BlobDataset generate_blobs(const BlobSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> center(spec.center_low, spec.center_high);
  std::uniform_int_distribution<std::size_t> pick(0, spec.components - 1);
  std::normal_distribution<double> noise(0.0, spec.sigma);

  BlobDataset out{Matrix(spec.samples, spec.dim), std::vector<std::size_t>(spec.samples),
                  Matrix(spec.components, spec.dim)};
  for (auto& v : out.means.data()) v = center(rng);
  for (std::size_t i = 0; i < spec.samples; ++i) {
    const std::size_t c = pick(rng);
    out.labels[i] = c;
    auto row = out.samples.row(i);
    auto mean = out.means.row(c);
    for (std::size_t j = 0; j < spec.dim; ++j) row[j] = mean[j] + noise(rng);
  }
  return out;
}

Codebook init_codebook(std::size_t codes, std::size_t dim, std::uint64_t seed) {
  if (codes == 0 || dim == 0) throw ShapeError("init_codebook: K and D must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(codes, dim);
  for (auto& v : m.data()) v = normal(rng);
  return Codebook(std::move(m));
}

std::string to_string(StaticModel m) {
  switch (m) {
    case StaticModel::DVQ: return "DVQ";
    case StaticModel::VQ: return "VQ";
    case StaticModel::VQ_KPLUS: return "VQ_KPLUS";
    case StaticModel::SVQ: return "SVQ";
    case StaticModel::RANDOM: return "RANDOM";
  }
  return "?";
}

StaticModel parse_static_model(const std::string& name) {
  for (auto m : {StaticModel::DVQ, StaticModel::VQ, StaticModel::VQ_KPLUS, StaticModel::SVQ,
                 StaticModel::RANDOM}) {
    if (to_string(m) == name) return m;
  }
  if (name == "VQ+" || name == "VQ_K+") return StaticModel::VQ_KPLUS;
  throw ConfigError("unknown static model '" + name + "' (DVQ, VQ, VQ_KPLUS, SVQ, RANDOM)");
}

std::size_t StaticExperimentConfig::codebook_count() const {
  return (model == StaticModel::DVQ || model == StaticModel::SVQ) ? slices : 1;
}

void StaticExperimentConfig::validate(std::size_t dim) const {
  if (codes == 0) throw ConfigError("static: K must be >= 1");
  if (slices == 0) throw ConfigError("static: L must be >= 1");
  if (batch == 0) throw ConfigError("static: batch must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("static: lr must be > 0");
  if (repetitions == 0) throw ConfigError("static: repetitions must be >= 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("static: test_fraction must lie in (0, 1)");
  }
  if (model == StaticModel::DVQ && dim % slices != 0) {
    throw ConfigError("static: DVQ needs D (" + std::to_string(dim) + ") divisible by L (" +
                      std::to_string(slices) + ")");
  }
}

double StaticModelState::objective(const Matrix& rows) const {
  if (rows.rows() == 0) throw ShapeError("objective: empty input");
  if (model == StaticModel::DVQ) {
    return dvq_partial_losses(rows, CodebookBank(codebooks, *split)).vq;
  }
  if (model == StaticModel::SVQ) {
    double total = 0.0;
    for (std::size_t i = 0; i < rows.rows(); ++i) {
      total += nearest_code(rows.row(i), codebooks[i % codebooks.size()]).sq_distance;
    }
    return total / static_cast<double>(rows.rows());
  }
  return vq_objective(rows, codebooks.front());
}

StaticModelState init_static_model(const StaticExperimentConfig& config, std::size_t dim,
                                   std::uint64_t init_seed) {
  config.validate(dim);
  StaticModelState state{config.model, {}, std::nullopt};
  const std::size_t books = config.codebook_count();
  std::size_t book_dim = dim;
  if (config.model == StaticModel::DVQ) {
    state.split = FeatureSplitSpec::equal(dim, config.slices);
    book_dim = dim / config.slices;
  }
  // Codebook i uses init_seed + i so that L=1 models share their init with VQ.
  for (std::size_t i = 0; i < books; ++i) {
    state.codebooks.push_back(init_codebook(config.codes, book_dim, init_seed + i));
  }
  return state;
}

namespace {

// Batch mean objective and in-place SGD update for one step.
double step_model(StaticModelState& state, const Matrix& batch,
                  std::span<const std::size_t> sample_ids, double lr) {
  const double n = static_cast<double>(batch.rows());
  double loss = 0.0;
  if (state.model == StaticModel::DVQ) {
    const auto parts = split_features(batch, *state.split);
    for (std::size_t s = 0; s < parts.size(); ++s) {
      const auto q = quantize_batch(parts[s], state.codebooks[s]);
      loss += std::accumulate(q.sq_distances.begin(), q.sq_distances.end(), 0.0) / n;
      const auto grad = codebook_gradient(parts[s], state.codebooks[s], q.indices);
      if (std::isfinite(loss)) state.codebooks[s] = sgd_step(state.codebooks[s], grad, lr);
    }
    return loss;
  }
  if (state.model == StaticModel::SVQ) {
    const std::size_t groups = state.codebooks.size();
    std::vector<std::vector<std::size_t>> members(groups);
    for (std::size_t r = 0; r < batch.rows(); ++r) members[sample_ids[r] % groups].push_back(r);
    for (std::size_t g = 0; g < groups; ++g) {
      if (members[g].empty()) continue;
      const Matrix sub = gather_rows(batch, members[g]);
      const auto q = quantize_batch(sub, state.codebooks[g]);
      loss += std::accumulate(q.sq_distances.begin(), q.sq_distances.end(), 0.0) / n;
      // codebook_gradient normalizes by the sub-batch; rescale to the full batch mean.
      Matrix grad = codebook_gradient(sub, state.codebooks[g], q.indices);
      const double share = static_cast<double>(sub.rows()) / n;
      for (auto& v : grad.data()) v *= share;
      if (std::isfinite(loss)) state.codebooks[g] = sgd_step(state.codebooks[g], grad, lr);
    }
    return loss;
  }
  const auto q = quantize_batch(batch, state.codebooks.front());
  loss = std::accumulate(q.sq_distances.begin(), q.sq_distances.end(), 0.0) / n;
  const auto grad = codebook_gradient(batch, state.codebooks.front(), q.indices);
  if (std::isfinite(loss)) state.codebooks.front() = sgd_step(state.codebooks.front(), grad, lr);
  return loss;
}

}  // namespace

StaticRun train_static(const Matrix& train, const Matrix& test,
                       const StaticExperimentConfig& config, std::uint64_t init_seed,
                       std::uint64_t shuffle_seed) {
  return train_static(train, test, config, init_static_model(config, train.cols(), init_seed),
                      shuffle_seed);
}

StaticRun train_static(const Matrix& train, const Matrix& test,
                       const StaticExperimentConfig& config, StaticModelState initial,
                       std::uint64_t shuffle_seed) {
  if (train.rows() == 0 || test.rows() == 0) throw DataError("train_static: empty split");
  if (train.cols() != test.cols()) throw ShapeError("train_static: split widths differ");
  config.validate(train.cols());

  StaticRun run{{}, std::move(initial)};
  run.curve.initial_test_loss = run.model.objective(test);

  const std::size_t steps = config.model == StaticModel::RANDOM ? 0 : config.steps;
  const std::size_t batch = std::min(config.batch, train.rows());
  std::mt19937_64 rng(shuffle_seed);
  std::vector<std::size_t> order(train.rows());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  run.curve.train.reserve(steps);
  std::vector<std::size_t> ids(batch);
  for (std::size_t step = 0; step < steps; ++step) {
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      ids[b] = order[cursor++];
    }
    const Matrix rows = gather_rows(train, ids);
    const double loss = step_model(run.model, rows, ids, config.lr);
    if (!std::isfinite(loss)) {
      throw DivergenceError("train_static: non-finite loss", static_cast<long>(step));
    }
    run.curve.train.emplace_back(step, loss);
  }
  run.curve.final_test_loss =
      steps == 0 ? run.curve.initial_test_loss : run.model.objective(test);
  if (!std::isfinite(run.curve.final_test_loss)) {
    throw DivergenceError("train_static: non-finite test loss", static_cast<long>(steps));
  }
  return run;
}

double random_baseline(const Matrix& data, std::size_t codes, std::uint64_t seed) {
  return vq_objective(data, init_codebook(codes, data.cols(), seed));
}

std::uint64_t child_seed(std::uint64_t base, std::uint64_t repetition) {
  std::uint64_t z = base ^ (0x9E3779B97F4A7C15ULL * (repetition + 1));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RepetitionSeeds repetition_seeds(std::uint64_t base, std::size_t repetition) {
  const std::uint64_t c = child_seed(base, repetition);
  return {child_seed(c, 1), child_seed(c, 2), child_seed(c, 3)};
}

std::pair<Matrix, Matrix> train_test_split(const Matrix& samples, double test_fraction) {
  const auto n = samples.rows();
  const auto n_train = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * (1.0 - test_fraction)));
  if (n_train == 0 || n_train >= n) {
    throw DataError("train_test_split: split leaves an empty side (n=" + std::to_string(n) + ")");
  }
  std::vector<std::size_t> a(n_train), b(n - n_train);
  std::iota(a.begin(), a.end(), 0);
  std::iota(b.begin(), b.end(), n_train);
  return {gather_rows(samples, a), gather_rows(samples, b)};
}

RepetitionResult run_repetition(const StaticExperimentConfig& config, const BlobSpec& data_spec,
                                std::size_t repetition) {
  const auto seeds = repetition_seeds(config.seed, repetition);
  BlobSpec spec = data_spec;
  spec.seed = seeds.data;
  const auto data = generate_blobs(spec);
  auto [train, test] = train_test_split(data.samples, config.test_fraction);
  const auto run = train_static(train, test, config, seeds.init, seeds.shuffle);
  return {repetition, run.curve.final_test_loss, run.curve.initial_test_loss,
          random_baseline(test, config.codes, seeds.init)};
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.count);
  if (s.count > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.count - 1));
  }
  return s;
}

namespace {

MonteCarloResult collect(std::vector<RepetitionResult> reps) {
  MonteCarloResult out;
  std::vector<double> losses, randoms;
  for (const auto& r : reps) {
    losses.push_back(r.final_test_loss);
    randoms.push_back(r.random_baseline);
  }
  out.repetitions = std::move(reps);
  out.test_loss = summarize(losses);
  out.random = summarize(randoms);
  return out;
}

}  // namespace

MonteCarloResult monte_carlo(const StaticExperimentConfig& config, const BlobSpec& data_spec,
                             unsigned workers) {
  config.validate(data_spec.dim);
  std::vector<RepetitionResult> reps(config.repetitions);
  parallel_for(config.repetitions, workers, [&](std::size_t r) {
    try {
      reps[r] = run_repetition(config, data_spec, r);
    } catch (const DivergenceError& e) {
      throw DivergenceError(std::string("repetition ") + std::to_string(r) + ": " + e.what(),
                            e.step());
    }
  });
  return collect(std::move(reps));
}

std::vector<SweepCell> sweep_k_vs_d(const std::vector<std::size_t>& code_counts,
                                    const std::vector<std::size_t>& dims,
                                    const BlobSpec& data_template,
                                    const StaticExperimentConfig& config_template,
                                    unsigned workers) {
  if (code_counts.empty() || dims.empty()) throw ConfigError("sweep: K and D lists must be nonempty");
  const std::size_t reps = config_template.repetitions;
  const std::size_t cells = code_counts.size() * dims.size();
  std::vector<RepetitionResult> results(cells * reps);

  auto cell_setup = [&](std::size_t cell) {
    StaticExperimentConfig config = config_template;
    config.codes = code_counts[cell / dims.size()];
    BlobSpec spec = data_template;
    spec.dim = dims[cell % dims.size()];
    return std::pair{config, spec};
  };
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const auto [config, spec] = cell_setup(cell);
    config.validate(spec.dim);
  }
  parallel_for(cells * reps, workers, [&](std::size_t job) {
    const auto [config, spec] = cell_setup(job / reps);
    results[job] = run_repetition(config, spec, job % reps);
  });

  std::vector<SweepCell> out;
  for (std::size_t cell = 0; cell < cells; ++cell) {
    std::vector<RepetitionResult> reps_of_cell(results.begin() + cell * reps,
                                               results.begin() + (cell + 1) * reps);
    const auto mc = collect(std::move(reps_of_cell));
    out.push_back({code_counts[cell / dims.size()], dims[cell % dims.size()], mc.test_loss,
                   mc.random});
  }
  return out;
}

}  // namespace dvq
