#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "dvq/depthwise.hpp"
#include "test_util.hpp"

using namespace dvq;
using dvq::testing::random_matrix;

namespace {

CodebookBank random_bank(std::size_t dim, std::size_t slices, std::size_t k, std::mt19937_64& rng) {
  auto split = FeatureSplitSpec::equal(dim, slices);
  std::vector<Codebook> books;
  for (std::size_t i = 0; i < slices; ++i) books.emplace_back(random_matrix(k, dim / slices, rng));
  return CodebookBank(std::move(books), split);
}

}  // namespace

TEST_CASE("FeatureSplitSpec validation") {
  CHECK_NOTHROW(FeatureSplitSpec(4, {2, 2}));
  CHECK_THROWS_AS(FeatureSplitSpec(5, {2, 2}), ShapeError);
  CHECK_THROWS_AS(FeatureSplitSpec(4, {1, 3}), ShapeError);
  CHECK_THROWS_AS(FeatureSplitSpec(4, {0, 4}), ShapeError);
  CHECK_THROWS_AS(FeatureSplitSpec::equal(10, 4), ShapeError);
  const auto s = FeatureSplitSpec::equal(12, 3);
  CHECK(s.slice_size(2) == 4);
  CHECK(s.offset(2) == 8);
}

TEST_CASE("split_features") {
  LatentGrid z(1, 1, Matrix(1, 4, {10, 20, 30, 40}));
  const auto parts = split_features(z, FeatureSplitSpec(4, {2, 2}));
  REQUIRE(parts.size() == 2);
  CHECK(parts[0].values() == Matrix(1, 2, {10, 20}));
  CHECK(parts[1].values() == Matrix(1, 2, {30, 40}));

  const auto single = split_features(z, FeatureSplitSpec::equal(4, 1));
  CHECK(single.front() == z);

  CHECK_THROWS_AS(split_features(z, FeatureSplitSpec::equal(6, 2)), ShapeError);
}

TEST_CASE("split then concatenate is the identity") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t w = 1 + rng() % 4, h = 1 + rng() % 4, slices = 1 + rng() % 4;
    const std::size_t depth = slices * (1 + rng() % 4);
    LatentGrid z(w, h, random_matrix(w * h, depth, rng));
    const auto parts = split_features(z, FeatureSplitSpec::equal(depth, slices));
    CHECK(concat_features(parts) == z);
  }
}

TEST_CASE("dvq_quantize") {
  std::mt19937_64 rng(2);

  SUBCASE("inputs built from centroids quantize to themselves") {
    const auto bank = random_bank(6, 3, 4, rng);
    const Matrix combos = enumerate_centroid_combinations(bank);
    const auto r = dvq_quantize(combos, bank);
    CHECK(r.z_q == combos);
    for (double d : r.group_sq_distances) CHECK(d == 0.0);
  }
  SUBCASE("L=1 is the single-codebook path") {
    const auto bank = random_bank(5, 1, 7, rng);
    LatentGrid z(3, 2, random_matrix(6, 5, rng));
    const auto r = dvq_quantize(z, bank);
    const auto q = quantize_batch(z.values(), bank.codebook(0));
    CHECK(r.indices == q.indices);
    CHECK(r.z_q == q.codes);
  }
  SUBCASE("K=3, L=2 recovers all nine index pairs") {
    const auto bank = random_bank(4, 2, 3, rng);
    const auto r = dvq_quantize(enumerate_centroid_combinations(bank), bank);
    std::set<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t p = 0; p < r.positions; ++p) pairs.emplace(r.index(p, 0), r.index(p, 1));
    CHECK(pairs.size() == 9);
  }
  SUBCASE("result does not depend on worker count or slice order") {
    const auto bank = random_bank(8, 4, 5, rng);
    const Matrix x = random_matrix(50, 8, rng);
    const auto serial = dvq_quantize(x, bank, 1);
    const auto threaded = dvq_quantize(x, bank, 4);
    CHECK(serial.indices == threaded.indices);
    CHECK(serial.z_q == threaded.z_q);

    // Reverse the slice order on both sides; per-slice results must carry over.
    std::vector<Codebook> reversed(bank.codebooks().rbegin(), bank.codebooks().rend());
    const CodebookBank rbank(reversed, bank.split());
    std::vector<Matrix> parts = split_features(x, bank.split());
    std::reverse(parts.begin(), parts.end());
    const auto rr = dvq_quantize(hconcat(parts), rbank);
    for (std::size_t p = 0; p < x.rows(); ++p) {
      for (std::size_t i = 0; i < 4; ++i) CHECK(rr.index(p, 3 - i) == serial.index(p, i));
    }
  }
  SUBCASE("perturbing one slice changes only that slice") {
    const auto bank = random_bank(6, 3, 6, rng);
    for (int trial = 0; trial < 50; ++trial) {
      Matrix x = random_matrix(4, 6, rng);
      const auto before = dvq_quantize(x, bank);
      for (std::size_t r = 0; r < 4; ++r) {
        x(r, 2) += 3.0;
        x(r, 3) -= 1.5;
      }
      const auto after = dvq_quantize(x, bank);
      for (std::size_t p = 0; p < 4; ++p) {
        CHECK(after.index(p, 0) == before.index(p, 0));
        CHECK(after.index(p, 2) == before.index(p, 2));
        for (std::size_t c : {0u, 1u, 4u, 5u}) CHECK(after.z_q(p, c) == before.z_q(p, c));
      }
    }
  }
}

TEST_CASE("svq_quantize") {
  std::mt19937_64 rng(4);

  SUBCASE("one spatial cell is single-codebook VQ") {
    const Codebook cb(random_matrix(5, 3, rng));
    LatentGrid z(2, 3, random_matrix(6, 3, rng));
    const std::vector<Codebook> books{cb};
    const auto r = svq_quantize(z, books, SpatialPartition::row_bands(2, 3, 1));
    const auto q = quantize_batch(z.values(), cb);
    CHECK(r.indices == q.indices);
    CHECK(r.z_q == q.codes);
  }
  SUBCASE("per-cell codebooks holding the cell's vector give zero distance") {
    LatentGrid z(2, 2, random_matrix(4, 3, rng));
    SpatialPartition part{4, {0, 1, 2, 3}};
    std::vector<Codebook> books;
    for (std::size_t p = 0; p < 4; ++p) {
      Matrix c = random_matrix(3, 3, rng);
      std::ranges::copy(z.values().row(p), c.row(1).begin());
      books.emplace_back(c);
    }
    const auto r = svq_quantize(z, books, part);
    CHECK(r.z_q == z.values());
    for (double d : r.group_sq_distances) CHECK(d == 0.0);
  }
  SUBCASE("differs from DVQ on a constructed example") {
    // Two positions, depth 2. DVQ: per-feature codebooks {0,1}; SVQ: one
    // full-depth codebook per row band with centroids {(0,0),(1,1)}.
    LatentGrid z(1, 2, Matrix(2, 2, {0, 1, 1, 0}));
    const CodebookBank bank({Codebook(Matrix(2, 1, {0, 1})), Codebook(Matrix(2, 1, {0, 1}))},
                            FeatureSplitSpec::equal(2, 2));
    const auto dvq = dvq_quantize(z, bank);
    const std::vector<Codebook> books(2, Codebook(Matrix(2, 2, {0, 0, 1, 1})));
    const auto svq = svq_quantize(z, books, SpatialPartition::row_bands(1, 2, 2));
    CHECK(dvq.z_q == z.values());
    CHECK(svq.z_q != z.values());
  }
  SUBCASE("partition errors") {
    LatentGrid z(2, 2, random_matrix(4, 3, rng));
    const std::vector<Codebook> two(2, Codebook(random_matrix(3, 3, rng)));
    CHECK_THROWS_AS(svq_quantize(z, two, SpatialPartition{2, {0, 0, 1}}), ShapeError);
    CHECK_THROWS_AS(svq_quantize(z, two, SpatialPartition{2, {0, 0, 0, 0}}), ShapeError);
    CHECK_THROWS_AS(SpatialPartition::row_bands(2, 2, 3), ShapeError);
  }
  SUBCASE("row bands") {
    const auto p = SpatialPartition::row_bands(2, 4, 2);
    CHECK(p.cell_of == std::vector<std::size_t>{0, 0, 0, 0, 1, 1, 1, 1});
  }
}

TEST_CASE("joint multi-codebook quantization") {
  std::mt19937_64 rng(6);
  const Codebook cb(random_matrix(3, 4, rng));

  SUBCASE("identical codebooks give repeated halves") {
    const std::vector<Codebook> books{cb, cb};
    LatentGrid z(3, 3, random_matrix(9, 4, rng));
    const auto r = joint_multi_codebook_quantize(z, books);
    CHECK(r.z_q.cols() == 8);
    CHECK(column_block(r.z_q, 0, 4) == column_block(r.z_q, 4, 4));
  }
  SUBCASE("L=1 is single-codebook VQ") {
    const std::vector<Codebook> books{cb};
    const Matrix x = random_matrix(10, 4, rng);
    CHECK(joint_multi_codebook_quantize(x, books).z_q == quantize_batch(x, cb).codes);
  }
  SUBCASE("depth mismatch") {
    const std::vector<Codebook> books{cb};
    CHECK_THROWS_AS(joint_multi_codebook_quantize(Matrix(2, 3), books), ShapeError);
  }
}

TEST_CASE("distinct outcome counts") {
  std::mt19937_64 rng(8);
  const auto bank = random_bank(4, 2, 3, rng);
  const Matrix combos = enumerate_centroid_combinations(bank);
  CHECK(combos.rows() == 9);
  CHECK(count_distinct_outcomes(combos, bank) == 9);

  const Codebook full(random_matrix(3, 4, rng));
  const std::vector<Codebook> same{full, full};
  CHECK(count_distinct_outcomes_joint(combos, same) <= 3);
  CHECK(count_distinct_outcomes_joint(random_matrix(500, 4, rng), same) <= 3);

  const auto single = random_bank(3, 1, 5, rng);
  CHECK(count_distinct_outcomes(random_matrix(400, 3, rng), single) <= 5);
}

TEST_CASE("dvq_partial_losses") {
  std::mt19937_64 rng(10);
  const auto bank = random_bank(6, 2, 4, rng);
  const auto perfect = dvq_partial_losses(enumerate_centroid_combinations(bank), bank);
  CHECK(perfect.commitment == 0.0);
  CHECK(perfect.vq == 0.0);

  const Matrix x = random_matrix(30, 6, rng);
  const auto losses = dvq_partial_losses(x, bank);
  CHECK(losses.commitment == losses.vq);

  const auto one = random_bank(6, 1, 4, rng);
  CHECK(dvq_partial_losses(x, one).vq == doctest::Approx(vq_objective(x, one.codebook(0))));
}

TEST_CASE("bank serialization round-trips exactly") {
  std::mt19937_64 rng(12);
  const auto bank = random_bank(12, 4, 5, rng);
  std::stringstream ss;
  write_bank(ss, bank);
  CHECK(read_bank(ss) == bank);

  std::stringstream bad("DVQBK001garbage");
  CHECK_THROWS_AS(read_bank(bad), DataError);
}
