#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dvq/images.hpp"
#include "dvq/static_lab.hpp"

namespace dvq {

/// Images plus optional class labels (empty for unlabelled sets).
struct ImageDataset {
  ImageSet images;
  std::vector<std::uint8_t> labels;
};

// Little-endian binary containers: magic, shape header, float64 payload.
void write_blob_dataset(std::ostream& out, const BlobDataset& data);
BlobDataset read_blob_dataset(std::istream& in);
void write_image_dataset(std::ostream& out, const ImageDataset& data);
ImageDataset read_image_dataset(std::istream& in);

void save_image_dataset(const std::filesystem::path& path, const ImageDataset& data);
ImageDataset load_image_dataset(const std::filesystem::path& path);

enum class PixelScale {
  Unit,       // [0, 1]
  Symmetric,  // [-1, 1]
};

PixelScale parse_pixel_scale(const std::string& name);  // "unit" or "symmetric"
std::string to_string(PixelScale scale);

inline constexpr std::size_t kCifarImageBytes = 3072;
inline constexpr std::size_t kCifarRecordBytes = 1 + kCifarImageBytes;
inline constexpr std::size_t kCifarRecordsPerFile = 10000;

/**
 * Reads a CIFAR-10 binary batch: records of one label byte followed by
 * 1024 R, 1024 G and 1024 B bytes, each plane row-major 32x32. Pixels are
 * converted to HWC rows and scaled. A trailing partial record, a record
 * count other than `expected_records` (0 accepts any) or a label outside
 * [0, 9] raises DataError naming `source` and the byte offset.
 */
ImageDataset read_cifar_batch(std::istream& in, const std::string& source, PixelScale scale,
                              std::size_t expected_records = kCifarRecordsPerFile);

/// Concatenates batches in the given order.
ImageDataset read_cifar_files(const std::vector<std::filesystem::path>& paths, PixelScale scale,
                              std::size_t expected_records = kCifarRecordsPerFile);

}  // namespace dvq
