#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "dvq/matrix.hpp"

namespace dvq {

/**
 * K x D matrix of centroid vectors. Row k is centroid e_k.
 *
 * Construction validates K >= 1, D >= 1 and that every entry is finite;
 * a Codebook that exists is always usable for lookup.
 */
class Codebook {
 public:
  explicit Codebook(Matrix centroids);

  std::size_t size() const noexcept { return centroids_.rows(); }
  std::size_t dim() const noexcept { return centroids_.cols(); }

  const Matrix& centroids() const noexcept { return centroids_; }
  std::span<const double> centroid(std::size_t k) const { return centroids_.row(k); }

  friend bool operator==(const Codebook&, const Codebook&) = default;

 private:
  Matrix centroids_;
};

struct NearestCode {
  std::size_t index = 0;
  double sq_distance = 0.0;
};

/// Output of quantizing a batch. codes.row(i) is a copy of centroid(indices[i]).
struct QuantizationResult {
  std::vector<std::size_t> indices;
  Matrix codes;
  std::vector<double> sq_distances;
};

/// Sum of squared coordinate differences. Throws ShapeError on length mismatch.
double squared_euclidean(std::span<const double> a, std::span<const double> b);

/// Closest centroid to `x`; ties go to the lowest index.
NearestCode nearest_code(std::span<const double> x, const Codebook& cb);

/**
 * Quantizes every row of `batch` against `cb`.
 *
 * Rows are split into contiguous chunks across `workers` threads. Each
 * row's result depends only on that row, so the output is identical for
 * any worker count.
 */
QuantizationResult quantize_batch(const Matrix& batch, const Codebook& cb,
                                  unsigned workers = 1);

/// Mean over the batch of the squared distance to the assigned centroid.
double vq_objective(const Matrix& batch, const Codebook& cb);

/**
 * Gradient of vq_objective with respect to the centroids, holding the
 * nearest-code assignments fixed: row k is (2/N) * sum_{i: z_i = k} (e_k - x_i).
 * Rows of centroids that no input selected are exactly zero.
 */
Matrix codebook_gradient(const Matrix& batch, const Codebook& cb);

/// Same as above with caller-supplied assignments (one index per batch row).
Matrix codebook_gradient(const Matrix& batch, const Codebook& cb,
                         std::span<const std::size_t> assignments);

/// centroids - lr * grad. Rejects shape mismatch, lr <= 0 and non-finite grads.
Codebook sgd_step(const Codebook& cb, const Matrix& grad, double lr);

// Binary record: "DVQCB001", u64 K, u64 D, K*D little-endian float64 (row-major).
void write_codebook(std::ostream& out, const Codebook& cb);
Codebook read_codebook(std::istream& in);

}  // namespace dvq
