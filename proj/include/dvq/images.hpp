#pragma once

#include <cstddef>
#include <cstdint>

#include "dvq/matrix.hpp"

namespace dvq {

/// A set of equally sized images. Row i of `pixels` is image i in HWC order.
struct ImageSet {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  Matrix pixels;
  double value_min = 0.0;  // pixel range, used to map back to 8-bit levels
  double value_max = 1.0;

  std::size_t count() const noexcept { return pixels.rows(); }
  std::size_t dims_per_image() const noexcept { return height * width * channels; }
  void validate() const;
};

/**
 * Grayscale images of random filled/outlined rectangles, bars, discs and
 * crosses on a black background; one or two shapes per image, intensities in
 * [0.4, 1]. Pixel values lie in [0, 1]. Deterministic per seed.
 */
ImageSet generate_shapes(std::size_t count, std::size_t size, std::uint64_t seed);

/**
 * Cuts each image into non-overlapping patch x patch tiles. Output row
 * n * P + (ty * tiles_x + tx) holds tile (tx, ty) of image n, flattened in
 * HWC order. Height and width must be multiples of `patch`.
 */
Matrix patchify(const Matrix& images, std::size_t height, std::size_t width,
                std::size_t channels, std::size_t patch);

/// Inverse of patchify.
Matrix unpatchify(const Matrix& patches, std::size_t height, std::size_t width,
                  std::size_t channels, std::size_t patch);

}  // namespace dvq
