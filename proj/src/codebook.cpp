#include "dvq/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dvq/binary_io.hpp"
#include "dvq/parallel.hpp"

namespace dvq {

namespace {
constexpr std::string_view kCodebookMagic = "DVQCB001";

void check_batch(const Matrix& batch, const Codebook& cb, const char* who) {
  if (batch.rows() > 0 && batch.cols() != cb.dim()) {
    throw ShapeError(std::string(who) + ": batch width " + std::to_string(batch.cols()) +
                     " != codebook dimension " + std::to_string(cb.dim()));
  }
}
}  // namespace

Codebook::Codebook(Matrix centroids) : centroids_(std::move(centroids)) {
  if (centroids_.rows() == 0 || centroids_.cols() == 0) {
    throw ShapeError("Codebook: K and D must both be >= 1");
  }
  if (!centroids_.all_finite()) throw ShapeError("Codebook: non-finite centroid entry");
}

double squared_euclidean(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("squared_euclidean: lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()) + " differ");
  }
  // Four independent accumulators; the summation order is fixed, so results
  // are reproducible, but it differs from a naive left-to-right loop.
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t n = a.size();
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    for (std::size_t u = 0; u < 4; ++u) {
      const double d = a[j + u] - b[j + u];
      acc[u] += d * d;
    }
  }
  for (; j < n; ++j) {
    const double d = a[j] - b[j];
    acc[0] += d * d;
  }
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

NearestCode nearest_code(std::span<const double> x, const Codebook& cb) {
  if (x.size() != cb.dim()) {
    throw ShapeError("nearest_code: input length " + std::to_string(x.size()) +
                     " != codebook dimension " + std::to_string(cb.dim()));
  }
  NearestCode best{0, squared_euclidean(x, cb.centroid(0))};
  for (std::size_t k = 1; k < cb.size(); ++k) {
    const double d = squared_euclidean(x, cb.centroid(k));
    // strict < keeps the lowest index on ties
    if (d < best.sq_distance) best = {k, d};
  }
  return best;
}

QuantizationResult quantize_batch(const Matrix& batch, const Codebook& cb, unsigned workers) {
  check_batch(batch, cb, "quantize_batch");
  const std::size_t n = batch.rows();
  QuantizationResult out{std::vector<std::size_t>(n), Matrix(n, cb.dim()),
                         std::vector<double>(n)};
  if (n == 0) return out;

  const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(workers, n));
  const std::size_t per_chunk = (n + chunks - 1) / chunks;
  parallel_for(chunks, workers, [&](std::size_t c) {
    const std::size_t begin = c * per_chunk;
    const std::size_t end = std::min(n, begin + per_chunk);
    for (std::size_t i = begin; i < end; ++i) {
      const auto nc = nearest_code(batch.row(i), cb);
      out.indices[i] = nc.index;
      out.sq_distances[i] = nc.sq_distance;
      std::ranges::copy(cb.centroid(nc.index), out.codes.row(i).begin());
    }
  });
  return out;
}

double vq_objective(const Matrix& batch, const Codebook& cb) {
  if (batch.rows() == 0) throw ShapeError("vq_objective: empty batch");
  const auto q = quantize_batch(batch, cb);
  double total = 0.0;
  for (double d : q.sq_distances) total += d;
  return total / static_cast<double>(batch.rows());
}

Matrix codebook_gradient(const Matrix& batch, const Codebook& cb,
                         std::span<const std::size_t> assignments) {
  if (batch.rows() == 0) throw ShapeError("codebook_gradient: empty batch");
  check_batch(batch, cb, "codebook_gradient");
  if (assignments.size() != batch.rows()) {
    throw ShapeError("codebook_gradient: one assignment per batch row required");
  }
  const double scale = 2.0 / static_cast<double>(batch.rows());
  Matrix grad(cb.size(), cb.dim());
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    const std::size_t k = assignments[i];
    if (k >= cb.size()) throw ShapeError("codebook_gradient: assignment out of range");
    auto g = grad.row(k);
    auto e = cb.centroid(k);
    auto x = batch.row(i);
    for (std::size_t j = 0; j < cb.dim(); ++j) g[j] += scale * (e[j] - x[j]);
  }
  return grad;
}

Matrix codebook_gradient(const Matrix& batch, const Codebook& cb) {
  if (batch.rows() == 0) throw ShapeError("codebook_gradient: empty batch");
  const auto q = quantize_batch(batch, cb);
  return codebook_gradient(batch, cb, q.indices);
}

Codebook sgd_step(const Codebook& cb, const Matrix& grad, double lr) {
  if (!grad.same_shape(cb.centroids())) throw ShapeError("sgd_step: gradient shape mismatch");
  if (!(lr > 0.0)) throw ShapeError("sgd_step: learning rate must be positive");
  if (!grad.all_finite()) throw ShapeError("sgd_step: non-finite gradient entry");
  Matrix next = cb.centroids();
  auto& v = next.data();
  const auto& g = grad.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
  return Codebook(std::move(next));
}

void write_codebook(std::ostream& out, const Codebook& cb) {
  binio::write_magic(out, kCodebookMagic);
  binio::write_u64(out, cb.size());
  binio::write_u64(out, cb.dim());
  binio::write_f64s(out, cb.centroids().data());
  if (!out) throw DataError("write_codebook: stream failure");
}

Codebook read_codebook(std::istream& in) {
  binio::expect_magic(in, kCodebookMagic);
  const auto k = binio::read_u64(in);
  const auto d = binio::read_u64(in);
  if (k == 0 || d == 0 || k > (1u << 24) || d > (1u << 24)) {
    throw DataError("read_codebook: implausible header K=" + std::to_string(k) +
                    " D=" + std::to_string(d));
  }
  Matrix m(k, d);
  binio::read_f64s(in, m.data());
  return Codebook(std::move(m));
}

}  // namespace dvq
