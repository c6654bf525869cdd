#include "dvq/images.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace dvq {

void ImageSet::validate() const {
  if (height == 0 || width == 0 || channels == 0) throw ShapeError("ImageSet: empty image shape");
  if (!(value_max > value_min)) throw ShapeError("ImageSet: value_max must exceed value_min");
  if (pixels.cols() != dims_per_image()) {
    throw ShapeError("ImageSet: row width " + std::to_string(pixels.cols()) +
                     " != height*width*channels");
  }
}

namespace {

void draw_shape(std::span<double> img, std::size_t size, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> kind_dist(0, 4);
  std::uniform_real_distribution<double> intensity(0.4, 1.0);
  const int n = static_cast<int>(size);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const double value = intensity(rng);
  auto set = [&](int x, int y) {
    if (x >= 0 && y >= 0 && x < n && y < n) {
      auto& px = img[static_cast<std::size_t>(y * n + x)];
      px = std::max(px, value);
    }
  };

  switch (kind_dist(rng)) {
    case 0:
    case 1: {  // rectangle, filled or outlined
      const int w = pick(2, n - 1), h = pick(2, n - 1);
      const int x0 = pick(0, n - w), y0 = pick(0, n - h);
      const bool filled = pick(0, 1) == 0;
      for (int y = y0; y < y0 + h; ++y) {
        for (int x = x0; x < x0 + w; ++x) {
          if (filled || y == y0 || y == y0 + h - 1 || x == x0 || x == x0 + w - 1) set(x, y);
        }
      }
      break;
    }
    case 2: {  // horizontal or vertical bar
      const int len = pick(3, n), at = pick(0, n - 1), from = pick(0, n - len);
      const bool horizontal = pick(0, 1) == 0;
      for (int i = from; i < from + len; ++i) horizontal ? set(i, at) : set(at, i);
      break;
    }
    case 3: {  // disc
      const double r = std::uniform_real_distribution<double>(1.0, n / 2.5)(rng);
      const double cx = std::uniform_real_distribution<double>(r - 0.5, n - r - 0.5)(rng);
      const double cy = std::uniform_real_distribution<double>(r - 0.5, n - r - 0.5)(rng);
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) set(x, y);
        }
      }
      break;
    }
    default: {  // plus-shaped cross
      const int arm = pick(1, std::max(1, n / 3));
      const int cx = pick(arm, n - 1 - arm), cy = pick(arm, n - 1 - arm);
      for (int d = -arm; d <= arm; ++d) {
        set(cx + d, cy);
        set(cx, cy + d);
      }
      break;
    }
  }
}

}  // namespace

ImageSet generate_shapes(std::size_t count, std::size_t size, std::uint64_t seed) {
  if (size < 4) throw ShapeError("generate_shapes: image size must be >= 4");
  ImageSet set{size, size, 1, Matrix(count, size * size), 0.0, 1.0};
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    auto img = set.pixels.row(i);
    const int shapes = std::uniform_int_distribution<int>(1, 2)(rng);
    for (int s = 0; s < shapes; ++s) draw_shape(img, size, rng);
  }
  return set;
}

namespace {

void check_tiling(std::size_t height, std::size_t width, std::size_t channels, std::size_t patch) {
  if (patch == 0 || channels == 0 || height % patch != 0 || width % patch != 0) {
    throw ShapeError("patchify: image sides must be positive multiples of the patch size");
  }
}

}  // namespace

Matrix patchify(const Matrix& images, std::size_t height, std::size_t width,
                std::size_t channels, std::size_t patch) {
  check_tiling(height, width, channels, patch);
  if (images.cols() != height * width * channels) throw ShapeError("patchify: image width mismatch");
  const std::size_t tx_count = width / patch, ty_count = height / patch;
  const std::size_t tiles = tx_count * ty_count;
  const std::size_t tile_dims = patch * patch * channels;
  Matrix out(images.rows() * tiles, tile_dims);
  for (std::size_t n = 0; n < images.rows(); ++n) {
    auto img = images.row(n);
    for (std::size_t ty = 0; ty < ty_count; ++ty) {
      for (std::size_t tx = 0; tx < tx_count; ++tx) {
        auto dst = out.row(n * tiles + ty * tx_count + tx).begin();
        for (std::size_t py = 0; py < patch; ++py) {
          const std::size_t src = ((ty * patch + py) * width + tx * patch) * channels;
          dst = std::copy_n(img.begin() + static_cast<std::ptrdiff_t>(src), patch * channels, dst);
        }
      }
    }
  }
  return out;
}

Matrix unpatchify(const Matrix& patches, std::size_t height, std::size_t width,
                  std::size_t channels, std::size_t patch) {
  check_tiling(height, width, channels, patch);
  const std::size_t tx_count = width / patch, ty_count = height / patch;
  const std::size_t tiles = tx_count * ty_count;
  if (patches.cols() != patch * patch * channels || patches.rows() % tiles != 0) {
    throw ShapeError("unpatchify: patch matrix shape mismatch");
  }
  Matrix out(patches.rows() / tiles, height * width * channels);
  for (std::size_t n = 0; n < out.rows(); ++n) {
    auto img = out.row(n);
    for (std::size_t ty = 0; ty < ty_count; ++ty) {
      for (std::size_t tx = 0; tx < tx_count; ++tx) {
        auto src = patches.row(n * tiles + ty * tx_count + tx).begin();
        for (std::size_t py = 0; py < patch; ++py) {
          const std::size_t dst = ((ty * patch + py) * width + tx * patch) * channels;
          std::copy_n(src, patch * channels, img.begin() + static_cast<std::ptrdiff_t>(dst));
          src += static_cast<std::ptrdiff_t>(patch * channels);
        }
      }
    }
  }
  return out;
}

}  // namespace dvq
