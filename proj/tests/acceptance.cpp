// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "bottleneck_oracle.hpp"
#include "commands.hpp"
#include "dvq/codebook.hpp"
#include "dvq/depthwise.hpp"
#include "dvq/metrics.hpp"
#include "dvq/table_io.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace dvq;
using namespace dvq::testing;

namespace {

const fs::path kConfigs = DVQ_SOURCE_DIR "/configs";

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void report(int id, const std::string& title, const Verdict& v, double seconds) {
  if (!v.pass) ++failures;
  std::printf("criterion %d (%s): %s -%s (%.1fs)\n", id, title.c_str(), v.pass ? "PASS" : "FAIL",
              v.detail.str().c_str(), seconds);
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Runs the CLI in-process and returns the output directory.
fs::path run_cli(const std::vector<std::string>& args, const fs::path& out) {
  fs::remove_all(out);
  std::vector<std::string> argv{"dvq"};
  argv.insert(argv.end(), args.begin(), args.end());
  argv.push_back("--out");
  argv.push_back(out.string());
  std::ostringstream log, err;
  const int code = cli::run(argv, log, err);
  if (code != 0) throw std::runtime_error("dvq " + args.front() + " exited " + std::to_string(code) + ": " + err.str());
  return out;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(5);
  s << v;
  return s.str();
}

// ------------------------------------------------------------------------

void criterion_static_ordering(const fs::path& scratch) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  const auto dir = run_cli({"static", "--config", (kConfigs / "fig3_compare.cfg").string()}, scratch / "fig3");
  std::map<std::string, StaticSummaryRow> by_model;
  for (const auto& s : static_summaries_from(import_table(dir / "summary.csv"))) by_model[s.model] = s;
  const auto& dvq = by_model.at("DVQ");
  const auto& vq = by_model.at("VQ");
  const auto& vqp = by_model.at("VQ_KPLUS");
  v.require(dvq.components == 70 && dvq.dim == 64 && dvq.codes == 20 && dvq.slices == 4 && vq.codes == 20 &&
                vqp.codes == 50 && dvq.count == 10 && vq.count == 10 && vqp.count == 10,
            "shipped config does not match N_G=70, D=64, DVQ(20,4), VQ(20), VQ+(50), 10 reps");
  v.detail << " mean test loss DVQ " << fmt(dvq.mean) << " (sd " << fmt(dvq.std) << "), VQ " << fmt(vq.mean)
           << ", VQ+ " << fmt(vqp.mean) << ";";
  v.require(dvq.mean < vq.mean, "mean(DVQ) < mean(VQ)");
  v.require(dvq.mean <= 1.05 * vqp.mean, "mean(DVQ) <= 1.05 mean(VQ+)");
  v.detail << " DVQ < VQ and DVQ <= 1.05*VQ+ (" << fmt(1.05 * vqp.mean) << ")";
  report(1, "static-prior ordering", v, seconds_since(t0));
}

void criteria_sweep(const fs::path& scratch) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = run_cli({"static", "--config", (kConfigs / "sweep_k_vs_d.cfg").string()}, scratch / "sweep");
  const double secs = seconds_since(t0);
  const auto cells = static_summaries_from(import_table(dir / "summary.csv"));

  std::map<std::size_t, std::map<std::size_t, StaticSummaryRow>> by_dim;  // D -> K -> cell
  for (const auto& c : cells) by_dim[c.dim][c.codes] = c;

  Verdict sat;
  sat.require(cells.size() == 50 && cells.front().components == 200 && cells.front().count == 10,
              "shipped sweep is not K in 10..100 x D in {2,4,8,32,64}, N_G=200, 10 reps");
  const double d2_k10 = by_dim.at(2).at(10).mean;
  const double d2_k100 = by_dim.at(2).at(100).mean;
  sat.detail << " D=2: loss(K=100) " << fmt(d2_k100) << " vs 0.8*loss(K=10) " << fmt(0.8 * d2_k10) << ";";
  sat.require(d2_k100 < 0.8 * d2_k10, "D=2 saturation threshold");
  for (std::size_t d : {32u, 64u}) {
    double lo = INFINITY, hi = 0.0;
    for (const auto& [k, c] : by_dim.at(d)) {
      lo = std::min(lo, c.mean);
      hi = std::max(hi, c.mean);
    }
    sat.detail << " D=" << d << ": max/min over K " << fmt(hi / lo) << " (< 1.15);";
    sat.require(hi / lo < 1.15, "D=" + std::to_string(d) + " flatness threshold");
  }
  report(2, "K-saturation", sat, secs);

  Verdict random;
  std::size_t better = 0;
  double worst_ratio = 0.0;
  for (const auto& c : cells) {
    if (c.mean < c.random_mean) ++better;
    worst_ratio = std::max(worst_ratio, c.mean / c.random_mean);
  }
  random.detail << " trained < untrained codebook in " << better << "/" << cells.size()
                << " cells; worst trained/random ratio " << fmt(worst_ratio);
  random.require(better == cells.size() && !cells.empty(), "every cell beats its random baseline");
  report(3, "random baseline", random, 0.0);
}

void criterion_expressiveness() {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  // Two slices of one feature each; centroids {0, 1, 2} per slice.
  const Matrix centroids(3, 1, std::vector<double>{0.0, 1.0, 2.0});
  const CodebookBank bank({Codebook(centroids), Codebook(centroids)}, FeatureSplitSpec::equal(2, 2));
  const Matrix inputs = enumerate_centroid_combinations(bank);
  const auto distinct = count_distinct_outcomes(inputs, bank);
  v.detail << " K=3, L=2 over all " << inputs.rows() << " centroid combinations: DVQ outcomes " << distinct << ";";
  v.require(distinct == 9, "DVQ outcomes == 9");
  const Matrix full(3, 2, std::vector<double>{0, 0, 1, 1, 2, 2});
  const std::vector<Codebook> identical{Codebook(full), Codebook(full)};
  const auto joint = count_distinct_outcomes_joint(inputs, identical);
  v.detail << " joint quantization with identical codebooks " << joint;
  v.require(joint <= 3, "joint outcomes <= 3");
  report(4, "expressiveness", v, seconds_since(t0));
}

void criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  double worst = 0.0;
  std::size_t params = 0, separation_violations = 0;
  for (auto kind : kKinds) {
    auto s = init_bottleneck(tiny_config(kind));
    params = std::max(params, parameter_count(s));
    v.require(parameter_count(s) <= 100, "model has at most 100 parameters");
    const auto images = generate_shapes(2, 4, 21);
    const Matrix x = patchify(images.pixels, 4, 4, 1, 2);
    const Matrix z_e0 = encode_patches(x, s.nets);
    const auto q = quantize_latents(z_e0, s);
    auto g = build_forward(x, s);
    g.tape.backward(g.total);
    const auto handles = g.params.all();
    auto tensors = parameter_tensors(s);
    const double h = 1e-5;
    for (std::size_t t = 0; t < tensors.size(); ++t) {
      for (std::size_t i = 0; i < tensors[t]->size(); ++i) {
        double& p = tensors[t]->data()[i];
        const double saved = p;
        p = saved + h;
        const double up = oracle_surrogate(s, x, q, z_e0, q.z_q);
        p = saved - h;
        const double down = oracle_surrogate(s, x, q, z_e0, q.z_q);
        p = saved;
        const double fd = (up - down) / (2 * h);
        const double grad = g.tape.grad(handles[t]).data()[i];
        worst = std::max(worst, std::abs(grad - fd) / std::max({std::abs(fd), std::abs(grad), 1e-8}));
      }
    }

    // Exact separation on the default-size model.
    BottleneckConfig c;
    c.kind = kind;
    const auto big = init_bottleneck(c);
    auto sg = build_forward(patchify(generate_shapes(4, 8, 3).pixels, 8, 8, 1, 2), big);
    auto nonzero = [&](std::span<const ag::Var> vars) {
      for (auto h : vars) {
        for (double e : sg.tape.grad(h).data()) {
          if (e != 0.0) return true;
        }
      }
      return false;
    };
    sg.tape.backward(sg.vq);
    separation_violations += nonzero(sg.params.encoder) + nonzero(sg.params.decoder) + !nonzero(sg.params.codebooks);
    sg.tape.backward(sg.commitment);
    separation_violations += nonzero(sg.params.codebooks) + nonzero(sg.params.decoder) + !nonzero(sg.params.encoder);
    sg.tape.backward(sg.reconstruction);
    separation_violations += nonzero(sg.params.codebooks);
  }
  // The straight-through copy itself: d(st)/d(z_e) is the identity, z_q gets nothing.
  ag::Tape t;
  std::mt19937_64 rng(1);
  const Matrix target = random_matrix(3, 2, rng);
  const auto ze = t.variable(random_matrix(3, 2, rng));
  const auto zq = t.variable(random_matrix(3, 2, rng));
  t.backward(t.mean_row_sq_distance(straight_through(t, ze, zq), t.constant(target)));
  double st_err = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double expected = 2.0 * (t.value(zq).data()[i] - target.data()[i]) / 3.0;
    st_err = std::max(st_err, std::abs(t.grad(ze).data()[i] - expected));
    separation_violations += t.grad(zq).data()[i] != 0.0;
  }
  v.detail << " worst relative FD error " << fmt(worst) << " over DVQ/VQ/SVQ models of <= " << params
           << " parameters (tol 1e-4); straight-through copy error " << fmt(st_err)
           << "; separation violations " << separation_violations;
  v.require(worst <= 1e-4, "FD relative error <= 1e-4");
  v.require(st_err <= 1e-12, "straight-through copies the gradient");
  v.require(separation_violations == 0, "gradient-separation contract");
  report(5, "gradient correctness", v, seconds_since(t0));
}

struct AeRun {
  std::map<std::size_t, double> mean_curve;  // step -> mean reconstruction over seeds
  double final_mean = 0.0;
  std::size_t seeds = 0;
  std::size_t last_step = 0;
  double seconds = 0.0;
};

AeRun run_ae(const std::string& config, const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = run_cli({"train-ae", "--config", (kConfigs / config).string()}, out);
  AeRun run;
  run.seconds = seconds_since(t0);
  std::map<std::size_t, std::vector<double>> by_step;
  std::map<std::uint64_t, bool> seeds;
  for (const auto& r : ae_results_from(import_table(dir / "results.csv"))) {
    by_step[r.step].push_back(r.reconstruction);
    seeds[r.seed] = true;
  }
  for (const auto& [step, values] : by_step) {
    double sum = 0.0;
    for (double x : values) sum += x;
    run.mean_curve[step] = sum / static_cast<double>(values.size());
  }
  run.seeds = seeds.size();
  run.last_step = by_step.rbegin()->first;
  run.final_mean = run.mean_curve.at(run.last_step);
  return run;
}

void criteria_learned_prior(const fs::path& scratch) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dvq = run_ae("ae_shapes_dvq.cfg", scratch / "ae_dvq");
  const auto vq = run_ae("ae_shapes_vq.cfg", scratch / "ae_vq");
  const auto svq = run_ae("ae_shapes_svq.cfg", scratch / "ae_svq");
  const double total = seconds_since(t0);

  Verdict v;
  v.require(dvq.seeds == 5 && vq.seeds == 5 && svq.seeds == 5, "5 seeds per bottleneck");
  v.detail << " 8x8 shapes, 128 codes each, 5 seeds: final reconstruction MSE DVQ " << fmt(dvq.final_mean)
           << ", VQ " << fmt(vq.final_mean) << ", SVQ " << fmt(svq.final_mean) << ";";
  v.require(dvq.final_mean <= vq.final_mean, "DVQ <= VQ");
  v.require(dvq.final_mean < svq.final_mean, "DVQ < SVQ");
  const double slowest = std::max({dvq.seconds, vq.seconds, svq.seconds});
  v.detail << " slowest config " << fmt(slowest) << "s (< 600s), all three " << fmt(total) << "s (< 1800s)";
  v.require(slowest < 600.0, "each desk-scale config under 10 minutes");
  v.require(total < 1800.0, "runtime within 30 minutes");
  report(6, "learned-prior desk-scale ordering", v, total);

  Verdict c8;
  namespace ref = published_bits_per_dim;
  c8.detail << " not reproducible at desk scale: published bits/dim (CIFAR-10 DVQ " << ref::kCifar10Dvq << ", VQVAE "
            << ref::kCifar10Vqvae << ", SVQ " << ref::kCifar10Svq << "; ImageNet32 " << ref::kImagenet32Dvq << "/"
            << ref::kImagenet32Vqvae << "; ImageNet64 " << ref::kImagenet64Dvq << "/" << ref::kImagenet64Vqvae
            << ") are kept as documentation constants only;";
  std::size_t reach = 0;
  bool reached = false;
  for (const auto& [step, value] : dvq.mean_curve) {
    if (value <= vq.final_mean) {
      reach = step;
      reached = true;
      break;
    }
  }
  c8.detail << " directional check: DVQ 5-seed mean reaches VQ's final loss " << fmt(vq.final_mean);
  if (reached) {
    c8.detail << " at step " << reach << " of " << vq.last_step;
  } else {
    c8.detail << " never";
  }
  c8.require(reached && reach < vq.last_step, "DVQ reaches VQ's final loss in fewer steps");
  report(8, "convergence speed (directional) and published numbers", c8, 0.0);
}

void criterion_oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> small(1, 12);
  constexpr std::size_t kInstances = 1000;
  std::size_t l1_mismatch = 0, batch_mismatch = 0, split_mismatch = 0;
  for (std::size_t n = 0; n < kInstances; ++n) {
    const std::size_t rows = small(rng), dim = small(rng), k = small(rng);
    // Integer-valued entries make exact ties common, which exercises tie-breaking.
    Matrix x = random_matrix(rows, dim, rng);
    Matrix cb = random_matrix(k, dim, rng);
    if (n % 2 == 0) {
      for (auto& e : x.data()) e = std::round(e);
      for (auto& e : cb.data()) e = std::round(e);
    }
    const Codebook book(cb);

    const auto single = quantize_batch(x, book);
    const auto depthwise = dvq_quantize(x, CodebookBank({book}, FeatureSplitSpec::equal(dim, 1)));
    bool same = depthwise.z_q == single.codes;
    for (std::size_t r = 0; r < rows; ++r) same = same && depthwise.index(r, 0) == single.indices[r];
    l1_mismatch += !same;

    bool loop_same = true;
    for (std::size_t r = 0; r < rows; ++r) {
      const auto nc = nearest_code(x.row(r), book);
      const auto brute = brute_force_nearest(x.row(r), cb);
      loop_same = loop_same && nc.index == single.indices[r] && nc.index == brute.first &&
                  nc.sq_distance == single.sq_distances[r];
    }
    batch_mismatch += !loop_same;

    std::vector<std::size_t> divisors;
    for (std::size_t l = 1; l <= dim; ++l) {
      if (dim % l == 0) divisors.push_back(l);
    }
    const auto spec = FeatureSplitSpec::equal(dim, divisors[n % divisors.size()]);
    const LatentGrid grid(rows, 1, x);
    const auto parts = split_features(grid, spec);
    split_mismatch += !(concat_features(parts).values() == x && hconcat(split_features(x, spec)) == x);
  }
  v.detail << " " << kInstances << " random instances each: DVQ(L=1) vs VQ mismatches " << l1_mismatch
           << ", quantize_batch vs nearest_code loop mismatches " << batch_mismatch
           << ", split/concatenate mismatches " << split_mismatch;
  v.require(l1_mismatch == 0, "DVQ with L=1 bit-identical to VQ");
  v.require(batch_mismatch == 0, "quantize_batch identical to per-row loop");
  v.require(split_mismatch == 0, "split/concatenate identity");
  report(7, "oracle equivalences", v, seconds_since(t0));
}

}  // namespace

int main() {
  const fs::path scratch = fs::temp_directory_path() / "dvq_acceptance";
  fs::create_directories(scratch);
  auto guarded = [](int id, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      ++failures;
      std::printf("criterion %d: FAIL - %s\n", id, e.what());
    }
  };
  guarded(4, criterion_expressiveness);
  guarded(5, criterion_gradients);
  guarded(7, criterion_oracle_equivalence);
  guarded(1, [&] { criterion_static_ordering(scratch); });
  guarded(6, [&] { criteria_learned_prior(scratch); });
  guarded(2, [&] { criteria_sweep(scratch); });
  fs::remove_all(scratch);
  std::printf("acceptance: %s (%d failing)\n", failures == 0 ? "PASS" : "FAIL", failures);
  return failures == 0 ? 0 : 1;
}
