#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "dvq/codebook.hpp"
#include "dvq/matrix.hpp"

namespace dvq {

/**
 * Partition of the feature axis into L contiguous, disjoint slices.
 *
 * Slices must have equal size (D divisible by L); anything else is rejected.
 */
class FeatureSplitSpec {
 public:
  FeatureSplitSpec(std::size_t dim, std::vector<std::size_t> slice_sizes);

  /// L slices of size dim / L. Throws ShapeError when dim % slices != 0.
  static FeatureSplitSpec equal(std::size_t dim, std::size_t slices);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t slices() const noexcept { return sizes_.size(); }
  std::size_t slice_size(std::size_t i) const { return sizes_.at(i); }
  std::size_t offset(std::size_t i) const { return offsets_.at(i); }
  const std::vector<std::size_t>& slice_sizes() const noexcept { return sizes_; }

  friend bool operator==(const FeatureSplitSpec&, const FeatureSplitSpec&) = default;

 private:
  std::size_t dim_;
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
};

/// One codebook per feature slice; all codebooks share the same K.
class CodebookBank {
 public:
  CodebookBank(std::vector<Codebook> codebooks, FeatureSplitSpec split);

  std::size_t slices() const noexcept { return codebooks_.size(); }
  std::size_t codes_per_book() const noexcept { return codebooks_.front().size(); }
  const FeatureSplitSpec& split() const noexcept { return split_; }
  const Codebook& codebook(std::size_t i) const { return codebooks_.at(i); }
  const std::vector<Codebook>& codebooks() const noexcept { return codebooks_; }

  void set_codebook(std::size_t i, Codebook cb);

  friend bool operator==(const CodebookBank&, const CodebookBank&) = default;

 private:
  std::vector<Codebook> codebooks_;
  FeatureSplitSpec split_;
};

/**
 * w x h x D latent tensor. Stored as a (w*h) x D matrix whose row
 * y * width + x holds the feature vector at spatial position (x, y).
 */
class LatentGrid {
 public:
  LatentGrid(std::size_t width, std::size_t height, Matrix values);
  LatentGrid(std::size_t width, std::size_t height, std::size_t depth)
      : LatentGrid(width, height, Matrix(width * height, depth)) {}

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t depth() const noexcept { return values_.cols(); }
  std::size_t positions() const noexcept { return values_.rows(); }

  std::size_t position(std::size_t x, std::size_t y) const noexcept { return y * width_ + x; }

  double& at(std::size_t x, std::size_t y, std::size_t d) { return values_(position(x, y), d); }
  double at(std::size_t x, std::size_t y, std::size_t d) const {
    return values_(position(x, y), d);
  }

  const Matrix& values() const noexcept { return values_; }
  Matrix& values() noexcept { return values_; }

  friend bool operator==(const LatentGrid&, const LatentGrid&) = default;

 private:
  std::size_t width_;
  std::size_t height_;
  Matrix values_;
};

/**
 * Result of quantizing a set of positions with several codebooks.
 *
 * indices is positions x groups (row-major); z_q is positions x output depth.
 * For DVQ and joint quantization a group is a codebook; for SVQ there is one
 * group per position and group_sq_distances is indexed by spatial cell.
 */
struct DepthwiseResult {
  std::size_t positions = 0;
  std::size_t groups = 0;
  std::vector<std::size_t> indices;
  Matrix z_q;
  std::vector<double> group_sq_distances;

  std::size_t index(std::size_t position, std::size_t group) const {
    return indices[position * groups + group];
  }
};

/// Cuts the feature axis of `z` into the slices described by `spec`.
std::vector<LatentGrid> split_features(const LatentGrid& z, const FeatureSplitSpec& spec);
std::vector<Matrix> split_features(const Matrix& rows, const FeatureSplitSpec& spec);

/// Inverse of split_features: joins slices in order along the feature axis.
LatentGrid concat_features(std::span<const LatentGrid> slices);

/**
 * Depthwise quantization: slice i of every position is matched against
 * codebook i. Slices may be processed on separate threads; assembly is by
 * slice index, so the result does not depend on `workers`.
 */
DepthwiseResult dvq_quantize(const Matrix& rows, const CodebookBank& bank, unsigned workers = 1);
DepthwiseResult dvq_quantize(const LatentGrid& z, const CodebookBank& bank, unsigned workers = 1);

/**
 * Assignment of spatial positions to codebooks for SVQ. cell_of[p] is the
 * codebook used at position p.
 */
struct SpatialPartition {
  std::size_t cells = 0;
  std::vector<std::size_t> cell_of;

  /// `bands` contiguous bands of rows along the height axis (as equal as possible).
  static SpatialPartition row_bands(std::size_t width, std::size_t height, std::size_t bands);
};

/**
 * Spatial-split quantization: position p is quantized over its full depth
 * by codebook partition.cell_of[p]. `rows` may hold several items back to
 * back; row r is at position r % partition.cell_of.size().
 */
DepthwiseResult svq_quantize(const Matrix& rows, std::span<const Codebook> codebooks,
                             const SpatialPartition& partition);
DepthwiseResult svq_quantize(const LatentGrid& z, std::span<const Codebook> codebooks,
                             const SpatialPartition& partition);

/// Every codebook quantizes the full vector; outputs are concatenated (depth L*D).
DepthwiseResult joint_multi_codebook_quantize(const Matrix& rows,
                                              std::span<const Codebook> codebooks);
DepthwiseResult joint_multi_codebook_quantize(const LatentGrid& z,
                                              std::span<const Codebook> codebooks);

/// Number of distinct z_q rows (bitwise comparison).
std::size_t count_distinct_rows(const Matrix& z_q);
std::size_t count_distinct_outcomes(const Matrix& inputs, const CodebookBank& bank);
std::size_t count_distinct_outcomes_joint(const Matrix& inputs,
                                          std::span<const Codebook> codebooks);

/// Every concatenation of one centroid per codebook (prod K_i rows), lexicographic.
Matrix enumerate_centroid_combinations(const CodebookBank& bank);

struct PartialLosses {
  double commitment = 0.0;
  double vq = 0.0;
};

/**
 * Values of the commitment and codebook penalty terms: the sum over slices of
 * the mean squared distance between each slice and its quantization. The two
 * numbers are always equal; they differ only in gradient routing.
 */
PartialLosses dvq_partial_losses(const LatentGrid& z, const CodebookBank& bank);
PartialLosses dvq_partial_losses(const Matrix& rows, const CodebookBank& bank);

// "DVQBK001", u64 L, u64 D, L x u64 slice size, L x u64 K, then L codebook records.
void write_bank(std::ostream& out, const CodebookBank& bank);
CodebookBank read_bank(std::istream& in);

}  // namespace dvq
