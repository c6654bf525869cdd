#include <cmath>
#include <numbers>

#include "doctest.h"
#include "dvq/errors.hpp"
#include "dvq/metrics.hpp"

using namespace dvq;

namespace {

// Gaussian CDF written with erfc, independent of the library's bin logic.
double cdf(double x, double mu, double sigma) {
  return 0.5 * std::erfc(-(x - mu) / (sigma * std::numbers::sqrt2));
}

double oracle_bin_probability(int level, double mu, double sigma) {
  const double lo = level == 0 ? -INFINITY : (level - 0.5) / 255.0;
  const double hi = level == 255 ? INFINITY : (level + 0.5) / 255.0;
  return cdf(hi, mu, sigma) - cdf(lo, mu, sigma);
}

}  // namespace

TEST_CASE("bits per dim converts nats to bits and normalizes") {
  CHECK(bits_per_dim(100 * std::log(256.0), 100) == doctest::Approx(8.0).epsilon(1e-14));
  CHECK(bits_per_dim(0.0, 5) == 0.0);
  CHECK(bits_per_dim(std::log(2.0) * 6, 3) == doctest::Approx(2.0));
  CHECK_THROWS_AS(bits_per_dim(1.0, 0), ShapeError);
}

TEST_CASE("discretized gaussian matches an erfc oracle") {
  for (double sigma : {0.003, 0.05, 0.4}) {
    for (int level : {0, 1, 77, 128, 254, 255}) {
      const double mu = 0.31;
      const Matrix x(1, 1, level / 255.0);
      const Matrix m(1, 1, mu);
      const double p = oracle_bin_probability(level, mu, sigma);
      if (p < 1e-300) {
        // Far-tail bins are floored so the total stays finite.
        CHECK(discretized_gaussian_nll(x, m, sigma) == doctest::Approx(-std::log(1e-300)));
        continue;
      }
      const double expected = -std::log(p);
      CHECK(discretized_gaussian_nll(x, m, sigma) == doctest::Approx(expected).epsilon(1e-9));
    }
  }
}

TEST_CASE("the 256 bin probabilities sum to one") {
  for (double mu : {-0.2, 0.0, 0.5, 1.3}) {
    double total = 0.0;
    for (int level = 0; level < 256; ++level) {
      total += std::exp(-discretized_gaussian_nll(Matrix(1, 1, level / 255.0), Matrix(1, 1, mu), 0.07));
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("nll sums over entries and validates arguments") {
  const Matrix x(2, 2, std::vector<double>{0.0, 0.5, 1.0, 0.25});
  const Matrix m(2, 2, 0.4);
  double sum = 0.0;
  for (double v : x.data()) sum += discretized_gaussian_nll(Matrix(1, 1, v), Matrix(1, 1, 0.4), 0.1);
  CHECK(discretized_gaussian_nll(x, m, 0.1) == doctest::Approx(sum));
  CHECK_THROWS_AS(discretized_gaussian_nll(x, Matrix(1, 4), 0.1), ShapeError);
  CHECK_THROWS_AS(discretized_gaussian_nll(x, m, 0.0), ShapeError);
}

TEST_CASE("reporting sigma is the RMSE floored at one level") {
  CHECK(reporting_sigma(0.04) == doctest::Approx(0.2));
  CHECK(reporting_sigma(0.0) == 1.0 / 255.0);
  // Perfect reconstruction at the floor: the bin spans +-0.5 sigma around the mean.
  const Matrix level(1, 1, 128.0 / 255.0);
  const double bpd = bits_per_dim(discretized_gaussian_nll(level, level, reporting_sigma(0.0)), 1);
  CHECK(bpd == doctest::Approx(-std::log2(std::erf(0.5 / std::numbers::sqrt2))).epsilon(1e-12));
}

TEST_CASE("codebook usage and perplexity") {
  const std::vector<std::size_t> even{0, 1, 0, 1};
  const auto u = codebook_usage(even, 4);
  CHECK(u.counts == std::vector<std::size_t>{2, 2, 0, 0});
  CHECK(u.perplexity == doctest::Approx(2.0));
  const std::vector<std::size_t> all{0, 1, 2, 3, 4};
  CHECK(codebook_usage(all, 5).perplexity == doctest::Approx(5.0));
  const std::vector<std::size_t> one{3, 3, 3};
  CHECK(codebook_usage(one, 4).perplexity == doctest::Approx(1.0));
  CHECK_THROWS_AS(codebook_usage(one, 3), ShapeError);
  CHECK_THROWS_AS(codebook_usage(one, 0), ShapeError);
}

TEST_CASE("published reference numbers are recorded verbatim") {
  namespace ref = published_bits_per_dim;
  CHECK(ref::kCifar10Dvq == 3.15);
  CHECK(ref::kCifar10Vqvae == 4.67);
  CHECK(ref::kCifar10Svq == 5.85);
  CHECK(ref::kImagenet32Dvq == 3.76);
  CHECK(ref::kImagenet32Vqvae == 4.92);
  CHECK(ref::kImagenet64Dvq == 3.50);
  CHECK(ref::kImagenet64Vqvae == 4.66);
}
