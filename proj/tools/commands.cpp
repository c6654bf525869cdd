#include "commands.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dvq/bottleneck.hpp"
#include "dvq/config.hpp"
#include "dvq/datasets.hpp"
#include "dvq/errors.hpp"
#include "dvq/parallel.hpp"
#include "dvq/static_lab.hpp"
#include "dvq/table_io.hpp"

#ifndef DVQ_VERSION
#define DVQ_VERSION "unversioned"
#endif

namespace dvq::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  unsigned workers = 0;
  bool deterministic = false;
  bool dry_run = false;
};

struct Context {
  const CommonOptions& opts;
  std::vector<std::string> argv;
  std::ostream& out;
};

unsigned effective_workers(const CommonOptions& o) {
  if (o.deterministic) return 1;
  if (o.workers > 0) return o.workers;
  if (const char* env = std::getenv("DVQ_WORKERS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("DVQ_WORKERS must be a positive integer, got '") + env + "'");
  }
  return resolve_workers(0);
}

KeyValueConfig load_config(const CommonOptions& o, const std::string& command) {
  if (o.config_path.empty()) throw ConfigError(command + ": missing required option --config");
  return KeyValueConfig::load(o.config_path);
}

void reject_unused(const KeyValueConfig& kv) {
  const auto unused = kv.unused_keys();
  if (!unused.empty()) throw ConfigError("unknown config key '" + unused.front() + "'");
}

fs::path require_out(const CommonOptions& o, const std::string& command) {
  if (o.out_dir.empty()) throw ConfigError(command + ": missing required option --out");
  fs::create_directories(o.out_dir);
  return o.out_dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f.flush()) throw DataError("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

/**
 * Writes manifest.json and config.cfg before any computation. config.cfg
 * holds every resolved key, so `--config <out>/config.cfg` repeats the run.
 */
void write_manifest(const Context& ctx, const fs::path& dir, const std::string& command,
                    const KeyValueConfig& resolved, std::uint64_t seed, const Json& artifacts) {
  Json config = Json::object();
  for (const auto& [k, v] : resolved.entries()) config[k] = v;
  const Json manifest{
      {"schema", "manifest/1"},
      {"command", command},
      {"version", DVQ_VERSION},
      {"seed", seed},
      {"workers", effective_workers(ctx.opts)},
      {"deterministic", ctx.opts.deterministic},
      {"argv", ctx.argv},
      {"config", config},
      {"artifacts", artifacts},
  };
  write_text(dir / "config.cfg", resolved.to_text());
  write_json(dir / "manifest.json", manifest);
}

// Guards resumable commands against mixing runs with different configs.
void check_resumable(const fs::path& dir, const KeyValueConfig& resolved) {
  const auto prior = dir / "config.cfg";
  if (fs::exists(prior) && read_text(prior) != resolved.to_text()) {
    throw ConfigError(dir.string() + " holds a run with a different config; choose a fresh --out");
  }
}

// ---------------------------------------------------------------- gen-blobs

BlobSpec blob_spec_from(const KeyValueConfig& kv, const CommonOptions& o) {
  BlobSpec spec;
  spec.components = kv.get_size("components");
  spec.dim = kv.get_size("dim");
  spec.sigma = kv.get_double("sigma", spec.sigma);
  spec.center_low = kv.get_double("center_low", spec.center_low);
  spec.center_high = kv.get_double("center_high", spec.center_high);
  spec.samples = kv.get_size("samples", spec.samples);
  spec.seed = o.seed.value_or(kv.get_u64("seed", spec.seed));
  spec.validate();
  return spec;
}

void put_blob_spec(KeyValueConfig& kv, const BlobSpec& s) {
  kv.set("components", std::to_string(s.components));
  kv.set("dim", std::to_string(s.dim));
  kv.set("sigma", format_double(s.sigma));
  kv.set("center_low", format_double(s.center_low));
  kv.set("center_high", format_double(s.center_high));
  kv.set("samples", std::to_string(s.samples));
}

int cmd_gen_blobs(const Context& ctx) {
  const auto kv = load_config(ctx.opts, "gen-blobs");
  const auto spec = blob_spec_from(kv, ctx.opts);
  reject_unused(kv);
  KeyValueConfig resolved;
  put_blob_spec(resolved, spec);
  resolved.set("seed", std::to_string(spec.seed));
  if (ctx.opts.dry_run) {
    ctx.out << resolved.to_text();
    return kExitOk;
  }
  const auto dir = require_out(ctx.opts, "gen-blobs");
  write_manifest(ctx, dir, "gen-blobs", resolved, spec.seed,
                 {{"dataset", "dataset.bin"}, {"summary", "summary.json"}});

  const auto data = generate_blobs(spec);
  {
    std::ofstream f(dir / "dataset.bin", std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open " + (dir / "dataset.bin").string());
    write_blob_dataset(f, data);
  }
  std::vector<std::size_t> counts(spec.components, 0);
  for (auto l : data.labels) ++counts[l];
  write_json(dir / "summary.json", {{"samples", spec.samples},
                                    {"components", spec.components},
                                    {"dim", spec.dim},
                                    {"samples_per_component", counts}});
  ctx.out << "wrote " << spec.samples << " samples (N_G=" << spec.components << ", D=" << spec.dim << ") to "
          << (dir / "dataset.bin").string() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- static

struct StaticCell {
  StaticModel model;
  std::size_t codes;
  std::size_t slices;
  std::size_t dim;
};

struct StaticPlan {
  std::string mode;
  BlobSpec data;
  StaticExperimentConfig base;
  std::vector<StaticCell> cells;
  KeyValueConfig resolved;
};

StaticPlan plan_static(const KeyValueConfig& kv, const CommonOptions& o) {
  StaticPlan plan;
  plan.mode = kv.get_string("mode");
  auto& d = plan.data;
  d.components = kv.get_size("components", d.components);
  d.sigma = kv.get_double("sigma", d.sigma);
  d.center_low = kv.get_double("center_low", d.center_low);
  d.center_high = kv.get_double("center_high", d.center_high);
  d.samples = kv.get_size("samples", d.samples);
  auto& b = plan.base;
  b.steps = kv.get_size("steps", b.steps);
  b.lr = kv.get_double("lr", b.lr);
  b.batch = kv.get_size("batch", b.batch);
  b.repetitions = kv.get_size("repetitions", b.repetitions);
  b.seed = o.seed.value_or(kv.get_u64("seed", b.seed));
  b.test_fraction = kv.get_double("test_fraction", b.test_fraction);
  d.seed = b.seed;

  auto& r = plan.resolved;
  r.set("mode", plan.mode);
  if (plan.mode == "compare") {
    const auto models = kv.get_string_list("models");
    const auto codes = kv.get_size_list("codes");
    const auto slices = kv.get_size_list("slices");
    d.dim = kv.get_size("dim", d.dim);
    if (codes.size() != models.size() || slices.size() != models.size()) {
      throw ConfigError("static: 'models', 'codes' and 'slices' must have the same length");
    }
    std::string names;
    for (std::size_t i = 0; i < models.size(); ++i) {
      const auto m = parse_static_model(models[i]);
      plan.cells.push_back({m, codes[i], slices[i], d.dim});
      names += (i ? ", " : "[") + to_string(m);
    }
    r.set("models", names + "]");
    r.set("codes", join_sizes(codes));
    r.set("slices", join_sizes(slices));
  } else if (plan.mode == "sweep") {
    const auto model = parse_static_model(kv.get_string("model", "VQ"));
    const auto codes = kv.get_size_list("codes");
    const auto dims = kv.get_size_list("dims");
    const auto slices = kv.get_size("slices", 1);
    for (auto k : codes) {
      for (auto dim : dims) plan.cells.push_back({model, k, slices, dim});
    }
    r.set("model", to_string(model));
    r.set("codes", join_sizes(codes));
    r.set("dims", join_sizes(dims));
    r.set("slices", std::to_string(slices));
  } else {
    throw ConfigError("static: mode must be 'compare' or 'sweep', got '" + plan.mode + "'");
  }
  if (plan.cells.empty()) throw ConfigError("static: the grid is empty");

  for (const auto& c : plan.cells) {
    auto spec = d;
    spec.dim = c.dim;
    spec.validate();
    auto cfg = b;
    cfg.model = c.model;
    cfg.codes = c.codes;
    cfg.slices = c.slices;
    cfg.validate(c.dim);
  }

  r.set("components", std::to_string(d.components));
  if (plan.mode == "compare") r.set("dim", std::to_string(d.dim));
  r.set("sigma", format_double(d.sigma));
  r.set("center_low", format_double(d.center_low));
  r.set("center_high", format_double(d.center_high));
  r.set("samples", std::to_string(d.samples));
  r.set("steps", std::to_string(b.steps));
  r.set("lr", format_double(b.lr));
  r.set("batch", std::to_string(b.batch));
  r.set("repetitions", std::to_string(b.repetitions));
  r.set("seed", std::to_string(b.seed));
  r.set("test_fraction", format_double(b.test_fraction));
  return plan;
}

using CellKey = std::tuple<std::string, std::size_t, std::size_t, std::size_t, std::size_t>;

CellKey key_of(const StaticResultRow& r) { return {r.model, r.codes, r.slices, r.dim, r.components}; }

CellKey key_of(const StaticCell& c, std::size_t components) {
  return {to_string(c.model), c.codes, c.slices, c.dim, components};
}

// Rows of cells whose every repetition is recorded; partial cells are dropped.
std::vector<StaticResultRow> completed_rows(const fs::path& results, const StaticPlan& plan) {
  if (!fs::exists(results)) return {};
  const auto rows = static_results_from(import_table(results, &static_results_schema()));
  std::map<CellKey, std::set<std::size_t>> reps;
  for (const auto& row : rows) reps[key_of(row)].insert(row.repetition);
  std::set<CellKey> planned;
  for (const auto& c : plan.cells) planned.insert(key_of(c, plan.data.components));
  std::vector<StaticResultRow> kept;
  for (const auto& row : rows) {
    const auto key = key_of(row);
    const auto& seen = reps[key];
    if (planned.contains(key) && seen.size() == plan.base.repetitions && *seen.rbegin() + 1 == seen.size()) {
      kept.push_back(row);
    }
  }
  return kept;
}

void append_rows(const fs::path& path, const std::vector<StaticResultRow>& rows) {
  std::ofstream f(path, std::ios::binary | std::ios::app);
  if (!f) throw DataError("cannot open " + path.string() + " for appending");
  write_csv_rows(f, to_table(rows));
  if (!f.flush()) throw DataError("write failed for " + path.string());
}

Json summary_json(const std::vector<StaticSummaryRow>& rows) {
  Json cells = Json::array();
  for (const auto& s : rows) {
    cells.push_back({{"model", s.model},
                     {"K", s.codes},
                     {"L", s.slices},
                     {"D", s.dim},
                     {"N_G", s.components},
                     {"count", s.count},
                     {"mean", s.mean},
                     {"std", s.std},
                     {"random_mean", s.random_mean},
                     {"random_std", s.random_std}});
  }
  return cells;
}

int cmd_static(const Context& ctx) {
  const auto kv = load_config(ctx.opts, "static");
  const auto plan = plan_static(kv, ctx.opts);
  reject_unused(kv);
  if (ctx.opts.dry_run) {
    ctx.out << plan.resolved.to_text() << "grid: " << plan.cells.size() << " cells x " << plan.base.repetitions
            << " repetitions\n";
    for (const auto& c : plan.cells) {
      ctx.out << "  " << to_string(c.model) << " K=" << c.codes << " L=" << c.slices << " D=" << c.dim
              << " N_G=" << plan.data.components << "\n";
    }
    return kExitOk;
  }
  const auto dir = require_out(ctx.opts, "static");
  check_resumable(dir, plan.resolved);
  const auto results = dir / "results.csv";
  auto rows = completed_rows(results, plan);
  write_manifest(ctx, dir, "static", plan.resolved, plan.base.seed,
                 {{"results", "results.csv"}, {"summary", "summary.json"}, {"summary_table", "summary.csv"}});
  {
    std::ofstream f(results, std::ios::binary | std::ios::trunc);
    write_csv_header(f, static_results_schema());
    write_csv_rows(f, to_table(rows));
    if (!f.flush()) throw DataError("write failed for " + results.string());
  }
  std::set<CellKey> done;
  for (const auto& r : rows) done.insert(key_of(r));
  if (!done.empty()) ctx.out << "resuming: " << done.size() << " of " << plan.cells.size() << " cells complete\n";

  const unsigned workers = effective_workers(ctx.opts);
  for (std::size_t i = 0; i < plan.cells.size(); ++i) {
    const auto& c = plan.cells[i];
    if (done.contains(key_of(c, plan.data.components))) continue;
    auto cfg = plan.base;
    cfg.model = c.model;
    cfg.codes = c.codes;
    cfg.slices = c.slices;
    auto spec = plan.data;
    spec.dim = c.dim;
    const auto t0 = std::chrono::steady_clock::now();
    const auto mc = monte_carlo(cfg, spec, workers);
    std::vector<StaticResultRow> cell_rows;
    for (const auto& rep : mc.repetitions) {
      cell_rows.push_back({to_string(c.model), c.codes, c.slices, c.dim, spec.components, rep.repetition,
                           rep.final_test_loss, rep.initial_test_loss, rep.random_baseline});
    }
    append_rows(results, cell_rows);
    rows.insert(rows.end(), cell_rows.begin(), cell_rows.end());
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ctx.out << "[" << i + 1 << "/" << plan.cells.size() << "] " << to_string(c.model) << " K=" << c.codes
            << " L=" << c.slices << " D=" << c.dim << ": test loss " << mc.test_loss.mean << " +- "
            << mc.test_loss.std << " (random " << mc.random.mean << ") " << std::fixed << std::setprecision(1)
            << secs << "s" << std::defaultfloat << std::setprecision(6) << "\n";
  }

  const auto summary = summarize_static(rows);
  export_table(to_table(summary), dir / "summary.csv");
  write_json(dir / "summary.json", {{"schema", static_summary_schema().id()},
                                    {"mode", plan.mode},
                                    {"repetitions", plan.base.repetitions},
                                    {"cells", summary_json(summary)}});
  return kExitOk;
}

// ----------------------------------------------------------------- train-ae

struct AePlan {
  BottleneckConfig model;
  std::vector<std::uint64_t> seeds;
  std::string data = "shapes";
  std::size_t train_images = 2000;
  std::size_t eval_images = 200;
  std::uint64_t data_seed = 1;
  std::string data_path;
  KeyValueConfig resolved;
};

AePlan plan_ae(const KeyValueConfig& kv, const CommonOptions& o) {
  AePlan p;
  if (!kv.has("bottleneck")) (void)kv.get_string("bottleneck");  // reports the missing field
  if (kv.has("seed") && kv.has("seeds")) throw ConfigError("train-ae: give either 'seed' or 'seeds', not both");
  std::vector<std::size_t> seeds;
  if (kv.has("seeds")) seeds = kv.get_size_list("seeds");
  p.model = bottleneck_config_from(kv);
  p.data = kv.get_string("data", p.data);
  p.eval_images = kv.get_size("eval_images", p.eval_images);
  if (p.data == "shapes") {
    p.train_images = kv.get_size("train_images", p.train_images);
    p.data_seed = kv.get_u64("data_seed", p.data_seed);
    if (p.model.image_height != p.model.image_width || p.model.channels != 1) {
      throw ConfigError("train-ae: the shapes dataset is square and single-channel");
    }
  } else if (p.data == "file") {
    p.data_path = kv.get_string("data_path");
  } else {
    throw ConfigError("train-ae: data must be 'shapes' or 'file', got '" + p.data + "'");
  }
  if (o.seed) {
    p.seeds = {*o.seed};
  } else if (!seeds.empty()) {
    p.seeds.assign(seeds.begin(), seeds.end());
  } else {
    p.seeds = {p.model.seed};
  }
  p.model.validate();
  if (p.eval_images == 0) throw ConfigError("train-ae: eval_images must be >= 1");

  p.resolved = KeyValueConfig::parse_string(config_to_text(p.model));
  auto& r = p.resolved;
  // `seeds` replaces the single model seed in the resolved form.
  KeyValueConfig without_seed;
  for (const auto& [k, v] : r.entries()) {
    if (k != "seed") without_seed.set(k, v);
  }
  r = without_seed;
  r.set("seeds", join_sizes(std::vector<std::size_t>(p.seeds.begin(), p.seeds.end())));
  r.set("data", p.data);
  r.set("eval_images", std::to_string(p.eval_images));
  if (p.data == "shapes") {
    r.set("train_images", std::to_string(p.train_images));
    r.set("data_seed", std::to_string(p.data_seed));
  } else {
    r.set("data_path", p.data_path);
  }
  return p;
}

std::pair<ImageSet, ImageSet> load_ae_data(const AePlan& p) {
  if (p.data == "shapes") {
    // Disjoint streams for the train and eval images.
    return {generate_shapes(p.train_images, p.model.image_height, child_seed(p.data_seed, 1)),
            generate_shapes(p.eval_images, p.model.image_height, child_seed(p.data_seed, 2))};
  }
  const auto ds = load_image_dataset(p.data_path);
  const auto& img = ds.images;
  if (img.height != p.model.image_height || img.width != p.model.image_width ||
      img.channels != p.model.channels) {
    throw DataError(p.data_path + ": images are " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                    "x" + std::to_string(img.channels) + ", config expects " +
                    std::to_string(p.model.image_height) + "x" + std::to_string(p.model.image_width) + "x" +
                    std::to_string(p.model.channels));
  }
  if (img.count() <= p.eval_images) {
    throw DataError(p.data_path + ": needs more than eval_images = " + std::to_string(p.eval_images) + " images");
  }
  // The last eval_images images are held out.
  const std::size_t n_train = img.count() - p.eval_images;
  auto take = [&](std::size_t begin, std::size_t count) {
    std::vector<std::size_t> ids(count);
    for (std::size_t i = 0; i < count; ++i) ids[i] = begin + i;
    ImageSet s = img;
    s.pixels = gather_rows(img.pixels, ids);
    return s;
  };
  return {take(0, n_train), take(n_train, p.eval_images)};
}

void save_checkpoint(const fs::path& path, const BottleneckState& state) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open " + path.string() + " for writing");
  write_checkpoint(f, state);
}

int cmd_train_ae(const Context& ctx, const std::string& resume) {
  const auto kv = load_config(ctx.opts, "train-ae");
  const auto plan = plan_ae(kv, ctx.opts);
  reject_unused(kv);

  std::optional<BottleneckState> resumed;
  if (!resume.empty()) {
    std::ifstream f(resume, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint " + resume);
    resumed = read_checkpoint(f);
    if (plan.seeds.size() != 1) throw ConfigError("train-ae --resume: runs exactly one seed");
    auto expected = plan.model;
    expected.seed = plan.seeds.front();
    auto stored = resumed->config;
    stored.steps = expected.steps;
    stored.eval_every = expected.eval_every;
    stored.checkpoint_every = expected.checkpoint_every;
    if (config_to_text(stored) != config_to_text(expected)) {
      throw ConfigError("train-ae --resume: checkpoint config differs from --config");
    }
    resumed->config = expected;
  }
  if (ctx.opts.dry_run) {
    ctx.out << plan.resolved.to_text();
    return kExitOk;
  }
  const auto dir = require_out(ctx.opts, "train-ae");
  fs::create_directories(dir / "checkpoints");
  Json metrics_files = Json::array();
  for (auto s : plan.seeds) metrics_files.push_back("metrics_seed" + std::to_string(s) + ".jsonl");
  write_manifest(ctx, dir, "train-ae", plan.resolved, plan.seeds.front(),
                 {{"results", "results.csv"},
                  {"summary", "summary.json"},
                  {"metrics", metrics_files},
                  {"checkpoints", "checkpoints/"}});

  const auto [train, eval] = load_ae_data(plan);
  const std::string model = to_string(plan.model.kind);
  std::vector<AeResultRow> rows;
  Json per_seed = Json::array();
  for (auto seed : plan.seeds) {
    auto cfg = plan.model;
    cfg.seed = seed;
    cfg.workers = effective_workers(ctx.opts);
    BottleneckState state = resumed ? *resumed : init_bottleneck(cfg);
    state.config.workers = cfg.workers;
    const auto tag = "seed" + std::to_string(seed);
    std::ofstream metrics(dir / ("metrics_" + tag + ".jsonl"), std::ios::binary | std::ios::trunc);
    if (!metrics) throw DataError("cannot open metrics stream in " + dir.string());
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = train_autoencoder(
        state, train, eval,
        [&](const MetricsRecord& r) {
          metrics << metrics_to_json_line(r, model) << '\n';
          metrics.flush();
          rows.push_back(ae_result_from(r, model, seed));
        },
        [&](const BottleneckState& s) {
          save_checkpoint(dir / "checkpoints" / (tag + "_step" + std::to_string(s.step) + ".ckpt"), s);
        });
    save_checkpoint(dir / "checkpoints" / (tag + "_final.ckpt"), state);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto& first = result.eval.front();
    const auto& last = result.eval.back();
    per_seed.push_back({{"seed", seed},
                        {"initial_reconstruction", first.loss.reconstruction},
                        {"final_reconstruction", last.loss.reconstruction},
                        {"final_bits_per_dim", last.bits_per_dim},
                        {"final_perplexity", last.perplexity}});
    ctx.out << model << " seed " << seed << ": reconstruction " << first.loss.reconstruction << " -> "
            << last.loss.reconstruction << ", bits/dim " << last.bits_per_dim << " (" << std::fixed
            << std::setprecision(1) << secs << "s" << std::defaultfloat << std::setprecision(6) << ")\n";
  }
  export_table(to_table(rows), dir / "results.csv");

  std::vector<double> finals;
  for (const auto& s : per_seed) finals.push_back(s["final_reconstruction"].get<double>());
  const auto agg = summarize(finals);
  write_json(dir / "summary.json", {{"schema", "ae_run/1"},
                                    {"model", model},
                                    {"bits_per_dim_convention",
                                     "reconstruction-only discretized Gaussian NLL over 8-bit bins, "
                                     "sigma = max(sqrt(MSE), 1/255)"},
                                    {"final_reconstruction_mean", agg.mean},
                                    {"final_reconstruction_std", agg.std},
                                    {"seeds", per_seed}});
  return kExitOk;
}

// ------------------------------------------------------------- ingest-cifar

int cmd_ingest_cifar(const Context& ctx, std::vector<std::string> inputs, std::string scale_name,
                     std::optional<std::size_t> records) {
  std::optional<KeyValueConfig> kv;
  if (!ctx.opts.config_path.empty()) kv = KeyValueConfig::load(ctx.opts.config_path);
  if (kv) {
    if (inputs.empty() && kv->has("inputs")) inputs = kv->get_string_list("inputs");
    if (scale_name.empty()) scale_name = kv->get_string("scale", "unit");
    if (!records) records = kv->get_size("records_per_file", kCifarRecordsPerFile);
    reject_unused(*kv);
  }
  if (inputs.empty()) throw ConfigError("ingest-cifar: no input files (pass paths or set 'inputs')");
  if (scale_name.empty()) scale_name = "unit";
  const auto scale = parse_pixel_scale(scale_name);
  const std::size_t per_file = records.value_or(kCifarRecordsPerFile);

  KeyValueConfig resolved;
  std::string list;
  for (std::size_t i = 0; i < inputs.size(); ++i) list += (i ? ", " : "[") + inputs[i];
  resolved.set("inputs", list + "]");
  resolved.set("scale", to_string(scale));
  resolved.set("records_per_file", std::to_string(per_file));
  if (ctx.opts.dry_run) {
    ctx.out << resolved.to_text();
    return kExitOk;
  }
  const auto dir = require_out(ctx.opts, "ingest-cifar");
  write_manifest(ctx, dir, "ingest-cifar", resolved, 0, {{"dataset", "dataset.bin"}, {"summary", "summary.json"}});
  const auto ds = read_cifar_files(std::vector<fs::path>(inputs.begin(), inputs.end()), scale, per_file);
  save_image_dataset(dir / "dataset.bin", ds);
  std::vector<std::size_t> label_counts(10, 0);
  for (auto l : ds.labels) ++label_counts[l];
  write_json(dir / "summary.json", {{"images", ds.images.count()},
                                    {"height", ds.images.height},
                                    {"width", ds.images.width},
                                    {"channels", ds.images.channels},
                                    {"value_min", ds.images.value_min},
                                    {"value_max", ds.images.value_max},
                                    {"label_counts", label_counts}});
  ctx.out << "ingested " << ds.images.count() << " images into " << (dir / "dataset.bin").string() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- report

fs::path results_path(const std::string& input) {
  const fs::path p(input);
  return fs::is_directory(p) ? p / "results.csv" : p;
}

int cmd_report(const Context& ctx, const std::vector<std::string>& inputs) {
  if (inputs.empty()) throw ConfigError("report: no input files");
  std::vector<Table> tables;
  for (const auto& in : inputs) {
    tables.push_back(import_table(results_path(in)));
    if (tables.back().schema != tables.front().schema) {
      throw DataError("report: schema mismatch: " + results_path(inputs.front()).string() + " is " +
                      tables.front().schema.id() + ", " + results_path(in).string() + " is " +
                      tables.back().schema.id());
    }
  }
  Table all{tables.front().schema, {}};
  for (auto& t : tables) all.rows.insert(all.rows.end(), t.rows.begin(), t.rows.end());
  if (all.rows.empty()) throw DataError("report: the inputs hold no records");

  KeyValueConfig resolved;
  std::string list;
  for (std::size_t i = 0; i < inputs.size(); ++i) list += (i ? ", " : "[") + inputs[i];
  resolved.set("inputs", list + "]");
  if (ctx.opts.dry_run) {
    ctx.out << resolved.to_text() << "schema: " << all.schema.id() << ", " << all.rows.size() << " records\n";
    return kExitOk;
  }
  const auto dir = require_out(ctx.opts, "report");
  write_manifest(ctx, dir, "report", resolved, 0,
                 {{"results", "results.csv"}, {"long", "long.csv"}, {"summary", "summary.json"}});

  if (all.schema == static_results_schema()) {
    const auto summary = summarize_static(static_results_from(all));
    export_table(to_table(summary), dir / "results.csv");
    export_table(to_long_format(summary), dir / "long.csv");
    write_json(dir / "summary.json", {{"schema", static_summary_schema().id()}, {"cells", summary_json(summary)}});
    for (const auto& s : summary) {
      ctx.out << s.model << " K=" << s.codes << " L=" << s.slices << " D=" << s.dim << " N_G=" << s.components
              << ": " << s.mean << " +- " << s.std << " (n=" << s.count << ", random " << s.random_mean << ")\n";
    }
  } else if (all.schema == ae_results_schema()) {
    const auto summary = summarize_ae(ae_results_from(all));
    export_table(to_table(summary), dir / "results.csv");
    export_table(to_long_format(summary), dir / "long.csv");
    Json rows = Json::array();
    for (const auto& s : summary) {
      rows.push_back({{"model", s.model},
                      {"step", s.step},
                      {"count", s.count},
                      {"reconstruction_mean", s.reconstruction_mean},
                      {"reconstruction_std", s.reconstruction_std},
                      {"bits_per_dim_mean", s.bits_per_dim_mean},
                      {"bits_per_dim_std", s.bits_per_dim_std}});
    }
    write_json(dir / "summary.json", {{"schema", ae_summary_schema().id()}, {"rows", rows}});
    ctx.out << summary.size() << " (model, step) rows summarized\n";
  } else {
    throw DataError("report: expects static_results or ae_results tables, got " + all.schema.id());
  }
  return kExitOk;
}

void add_common(CLI::App* sub, CommonOptions& o, bool with_config = true) {
  if (with_config) sub->add_option("--config", o.config_path, "Configuration file (key = value lines)");
  sub->add_option("--seed", o.seed, "Override the base seed");
  sub->add_option("--out", o.out_dir, "Output directory");
  sub->add_option("--workers", o.workers, "Worker threads (default: DVQ_WORKERS or all cores)");
  sub->add_flag("--deterministic", o.deterministic, "Force fully serial execution");
  sub->add_flag("--dry-run", o.dry_run, "Print the resolved configuration and exit");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Depthwise vector quantization experiments", "dvq"};
  app.require_subcommand(1);
  app.set_version_flag("--version", DVQ_VERSION);
  CommonOptions opts;

  auto* gen = app.add_subcommand("gen-blobs", "Generate a Gaussian blob dataset");
  add_common(gen, opts);
  auto* stat = app.add_subcommand("static", "Static-prior Monte-Carlo comparison or K-vs-D sweep");
  add_common(stat, opts);
  auto* ae = app.add_subcommand("train-ae", "Train an autoencoder with a DVQ, VQ or SVQ bottleneck");
  add_common(ae, opts);
  std::string resume;
  ae->add_option("--resume", resume, "Continue from a checkpoint");
  auto* ingest = app.add_subcommand("ingest-cifar", "Convert CIFAR-10 binary batches to the dataset format");
  add_common(ingest, opts);
  std::vector<std::string> cifar_inputs;
  std::string scale;
  std::optional<std::size_t> records;
  ingest->add_option("inputs", cifar_inputs, "CIFAR-10 binary batch files");
  ingest->add_option("--scale", scale, "Pixel range: unit ([0,1]) or symmetric ([-1,1])");
  ingest->add_option("--records", records, "Records expected per file (0 accepts any)");
  auto* report = app.add_subcommand("report", "Aggregate results.csv files into summaries");
  add_common(report, opts, false);
  std::vector<std::string> report_inputs;
  report->add_option("inputs", report_inputs, "results.csv files or run directories");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << DVQ_VERSION << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kExitConfigError;
  }

  const Context ctx{opts, args, out};
  try {
    if (gen->parsed()) return cmd_gen_blobs(ctx);
    if (stat->parsed()) return cmd_static(ctx);
    if (ae->parsed()) return cmd_train_ae(ctx, resume);
    if (ingest->parsed()) return cmd_ingest_cifar(ctx, cifar_inputs, scale, records);
    if (report->parsed()) return cmd_report(ctx, report_inputs);
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const DivergenceError& e) {
    err << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace dvq::cli
