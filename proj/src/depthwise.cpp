#include "dvq/depthwise.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <set>
#include <string>

#include "dvq/binary_io.hpp"
#include "dvq/parallel.hpp"

namespace dvq {

namespace {
constexpr std::string_view kBankMagic = "DVQBK001";
}

FeatureSplitSpec::FeatureSplitSpec(std::size_t dim, std::vector<std::size_t> slice_sizes)
    : dim_(dim), sizes_(std::move(slice_sizes)) {
  if (sizes_.empty()) throw ShapeError("FeatureSplitSpec: need at least one slice");
  std::size_t total = 0;
  for (auto s : sizes_) {
    if (s == 0) throw ShapeError("FeatureSplitSpec: slice sizes must be >= 1");
    if (s != sizes_.front()) throw ShapeError("FeatureSplitSpec: slices must have equal size");
    offsets_.push_back(total);
    total += s;
  }
  if (total != dim_) {
    throw ShapeError("FeatureSplitSpec: slice sizes sum to " + std::to_string(total) +
                     ", expected " + std::to_string(dim_));
  }
}

FeatureSplitSpec FeatureSplitSpec::equal(std::size_t dim, std::size_t slices) {
  if (slices == 0 || dim == 0 || dim % slices != 0) {
    throw ShapeError("FeatureSplitSpec: D=" + std::to_string(dim) +
                     " is not divisible into L=" + std::to_string(slices) + " slices");
  }
  return FeatureSplitSpec(dim, std::vector<std::size_t>(slices, dim / slices));
}

CodebookBank::CodebookBank(std::vector<Codebook> codebooks, FeatureSplitSpec split)
    : codebooks_(std::move(codebooks)), split_(std::move(split)) {
  if (codebooks_.size() != split_.slices()) {
    throw ShapeError("CodebookBank: codebook count differs from slice count");
  }
  for (std::size_t i = 0; i < codebooks_.size(); ++i) {
    if (codebooks_[i].dim() != split_.slice_size(i)) {
      throw ShapeError("CodebookBank: codebook " + std::to_string(i) +
                       " dimension does not match its slice");
    }
    if (codebooks_[i].size() != codebooks_.front().size()) {
      throw ShapeError("CodebookBank: all codebooks must share K");
    }
  }
}

void CodebookBank::set_codebook(std::size_t i, Codebook cb) {
  if (cb.dim() != split_.slice_size(i) || cb.size() != codes_per_book()) {
    throw ShapeError("CodebookBank::set_codebook: shape mismatch");
  }
  codebooks_.at(i) = std::move(cb);
}

LatentGrid::LatentGrid(std::size_t width, std::size_t height, Matrix values)
    : width_(width), height_(height), values_(std::move(values)) {
  if (width_ == 0 || height_ == 0 || values_.cols() == 0) {
    throw ShapeError("LatentGrid: width, height and depth must be >= 1");
  }
  if (values_.rows() != width_ * height_) {
    throw ShapeError("LatentGrid: row count must equal width*height");
  }
}

std::vector<Matrix> split_features(const Matrix& rows, const FeatureSplitSpec& spec) {
  if (rows.cols() != spec.dim()) {
    throw ShapeError("split_features: depth " + std::to_string(rows.cols()) +
                     " != split dimension " + std::to_string(spec.dim()));
  }
  std::vector<Matrix> out;
  out.reserve(spec.slices());
  for (std::size_t i = 0; i < spec.slices(); ++i) {
    out.push_back(column_block(rows, spec.offset(i), spec.slice_size(i)));
  }
  return out;
}

std::vector<LatentGrid> split_features(const LatentGrid& z, const FeatureSplitSpec& spec) {
  std::vector<LatentGrid> out;
  for (auto& m : split_features(z.values(), spec)) {
    out.emplace_back(z.width(), z.height(), std::move(m));
  }
  return out;
}

LatentGrid concat_features(std::span<const LatentGrid> slices) {
  if (slices.empty()) throw ShapeError("concat_features: no slices");
  std::vector<Matrix> blocks;
  for (const auto& s : slices) {
    if (s.width() != slices.front().width() || s.height() != slices.front().height()) {
      throw ShapeError("concat_features: spatial shapes differ");
    }
    blocks.push_back(s.values());
  }
  return LatentGrid(slices.front().width(), slices.front().height(), hconcat(blocks));
}

DepthwiseResult dvq_quantize(const Matrix& rows, const CodebookBank& bank, unsigned workers) {
  const auto slices = split_features(rows, bank.split());
  const std::size_t n = rows.rows();
  const std::size_t groups = bank.slices();

  std::vector<QuantizationResult> per_slice(groups);
  parallel_for(groups, workers,
               [&](std::size_t i) { per_slice[i] = quantize_batch(slices[i], bank.codebook(i)); });

  DepthwiseResult out;
  out.positions = n;
  out.groups = groups;
  out.indices.resize(n * groups);
  out.group_sq_distances.assign(groups, 0.0);
  std::vector<Matrix> codes;
  codes.reserve(groups);
  for (std::size_t i = 0; i < groups; ++i) {
    auto& q = per_slice[i];
    for (std::size_t p = 0; p < n; ++p) out.indices[p * groups + i] = q.indices[p];
    if (n > 0) {
      double total = 0.0;
      for (double d : q.sq_distances) total += d;
      out.group_sq_distances[i] = total / static_cast<double>(n);
    }
    codes.push_back(std::move(q.codes));
  }
  out.z_q = n > 0 ? hconcat(codes) : Matrix(0, rows.cols());
  return out;
}

DepthwiseResult dvq_quantize(const LatentGrid& z, const CodebookBank& bank, unsigned workers) {
  return dvq_quantize(z.values(), bank, workers);
}

SpatialPartition SpatialPartition::row_bands(std::size_t width, std::size_t height,
                                             std::size_t bands) {
  if (bands == 0 || bands > height) {
    throw ShapeError("SpatialPartition::row_bands: need 1 <= bands <= height");
  }
  SpatialPartition p;
  p.cells = bands;
  p.cell_of.resize(width * height);
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t band = y * bands / height;
    for (std::size_t x = 0; x < width; ++x) p.cell_of[y * width + x] = band;
  }
  return p;
}

DepthwiseResult svq_quantize(const Matrix& rows, std::span<const Codebook> codebooks,
                             const SpatialPartition& partition) {
  const std::size_t grid = partition.cell_of.size();
  if (grid == 0 || partition.cells == 0) throw ShapeError("svq_quantize: empty partition");
  if (codebooks.size() != partition.cells) {
    throw ShapeError("svq_quantize: one codebook per spatial cell required");
  }
  std::vector<bool> covered(partition.cells, false);
  for (auto c : partition.cell_of) {
    if (c >= partition.cells) throw ShapeError("svq_quantize: cell id out of range");
    covered[c] = true;
  }
  if (std::ranges::find(covered, false) != covered.end()) {
    throw ShapeError("svq_quantize: a spatial cell owns no positions");
  }
  if (rows.rows() % grid != 0) {
    throw ShapeError("svq_quantize: row count is not a multiple of the partitioned grid");
  }
  for (const auto& cb : codebooks) {
    if (cb.dim() != rows.cols()) throw ShapeError("svq_quantize: codebook depth mismatch");
  }

  const std::size_t n = rows.rows();
  DepthwiseResult out;
  out.positions = n;
  out.groups = 1;
  out.indices.resize(n);
  out.z_q = Matrix(n, rows.cols());
  out.group_sq_distances.assign(partition.cells, 0.0);
  std::vector<std::size_t> counts(partition.cells, 0);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t cell = partition.cell_of[r % grid];
    const auto nc = nearest_code(rows.row(r), codebooks[cell]);
    out.indices[r] = nc.index;
    std::ranges::copy(codebooks[cell].centroid(nc.index), out.z_q.row(r).begin());
    out.group_sq_distances[cell] += nc.sq_distance;
    ++counts[cell];
  }
  for (std::size_t c = 0; c < partition.cells; ++c) {
    if (counts[c] > 0) out.group_sq_distances[c] /= static_cast<double>(counts[c]);
  }
  return out;
}

DepthwiseResult svq_quantize(const LatentGrid& z, std::span<const Codebook> codebooks,
                             const SpatialPartition& partition) {
  if (partition.cell_of.size() != z.positions()) {
    throw ShapeError("svq_quantize: partition does not cover every grid position");
  }
  return svq_quantize(z.values(), codebooks, partition);
}

DepthwiseResult joint_multi_codebook_quantize(const Matrix& rows,
                                              std::span<const Codebook> codebooks) {
  if (codebooks.empty()) throw ShapeError("joint_multi_codebook_quantize: no codebooks");
  const std::size_t n = rows.rows();
  const std::size_t groups = codebooks.size();
  DepthwiseResult out;
  out.positions = n;
  out.groups = groups;
  out.indices.resize(n * groups);
  out.group_sq_distances.assign(groups, 0.0);
  std::vector<Matrix> codes;
  for (std::size_t i = 0; i < groups; ++i) {
    if (codebooks[i].dim() != rows.cols()) {
      throw ShapeError("joint_multi_codebook_quantize: codebook " + std::to_string(i) +
                       " depth differs from input depth");
    }
    auto q = quantize_batch(rows, codebooks[i]);
    for (std::size_t p = 0; p < n; ++p) out.indices[p * groups + i] = q.indices[p];
    if (n > 0) {
      out.group_sq_distances[i] =
          std::accumulate(q.sq_distances.begin(), q.sq_distances.end(), 0.0) /
          static_cast<double>(n);
    }
    codes.push_back(std::move(q.codes));
  }
  out.z_q = n > 0 ? hconcat(codes) : Matrix(0, rows.cols() * groups);
  return out;
}

DepthwiseResult joint_multi_codebook_quantize(const LatentGrid& z,
                                              std::span<const Codebook> codebooks) {
  return joint_multi_codebook_quantize(z.values(), codebooks);
}

std::size_t count_distinct_rows(const Matrix& z_q) {
  std::set<std::vector<double>> seen;
  for (std::size_t r = 0; r < z_q.rows(); ++r) {
    auto row = z_q.row(r);
    seen.emplace(row.begin(), row.end());
  }
  return seen.size();
}

std::size_t count_distinct_outcomes(const Matrix& inputs, const CodebookBank& bank) {
  return count_distinct_rows(dvq_quantize(inputs, bank).z_q);
}

std::size_t count_distinct_outcomes_joint(const Matrix& inputs,
                                          std::span<const Codebook> codebooks) {
  return count_distinct_rows(joint_multi_codebook_quantize(inputs, codebooks).z_q);
}

Matrix enumerate_centroid_combinations(const CodebookBank& bank) {
  std::size_t total = 1;
  for (const auto& cb : bank.codebooks()) total *= cb.size();
  Matrix out(total, bank.split().dim());
  std::vector<std::size_t> choice(bank.slices(), 0);
  for (std::size_t r = 0; r < total; ++r) {
    for (std::size_t i = 0; i < bank.slices(); ++i) {
      auto src = bank.codebook(i).centroid(choice[i]);
      std::ranges::copy(src, out.row(r).begin() + static_cast<std::ptrdiff_t>(bank.split().offset(i)));
    }
    // odometer increment, last slice fastest
    for (std::size_t i = bank.slices(); i-- > 0;) {
      if (++choice[i] < bank.codebook(i).size()) break;
      choice[i] = 0;
    }
  }
  return out;
}

PartialLosses dvq_partial_losses(const Matrix& rows, const CodebookBank& bank) {
  if (rows.rows() == 0) throw ShapeError("dvq_partial_losses: empty input");
  const auto result = dvq_quantize(rows, bank);
  double total = 0.0;
  for (double d : result.group_sq_distances) total += d;
  return {total, total};
}

PartialLosses dvq_partial_losses(const LatentGrid& z, const CodebookBank& bank) {
  return dvq_partial_losses(z.values(), bank);
}

void write_bank(std::ostream& out, const CodebookBank& bank) {
  binio::write_magic(out, kBankMagic);
  binio::write_u64(out, bank.slices());
  binio::write_u64(out, bank.split().dim());
  for (auto s : bank.split().slice_sizes()) binio::write_u64(out, s);
  for (const auto& cb : bank.codebooks()) binio::write_u64(out, cb.size());
  for (const auto& cb : bank.codebooks()) write_codebook(out, cb);
  if (!out) throw DataError("write_bank: stream failure");
}

CodebookBank read_bank(std::istream& in) {
  binio::expect_magic(in, kBankMagic);
  const auto slices = binio::read_u64(in);
  const auto dim = binio::read_u64(in);
  if (slices == 0 || slices > 4096) throw DataError("read_bank: implausible slice count");
  std::vector<std::size_t> sizes(slices), ks(slices);
  for (auto& s : sizes) s = binio::read_u64(in);
  for (auto& k : ks) k = binio::read_u64(in);
  std::vector<Codebook> books;
  for (std::size_t i = 0; i < slices; ++i) {
    books.push_back(read_codebook(in));
    if (books.back().size() != ks[i] || books.back().dim() != sizes[i]) {
      throw DataError("read_bank: codebook record disagrees with bank header");
    }
  }
  try {
    return CodebookBank(std::move(books), FeatureSplitSpec(dim, sizes));
  } catch (const ShapeError& e) {
    throw DataError(std::string("read_bank: ") + e.what());
  }
}

}  // namespace dvq
