#include "dvq/datasets.hpp"

#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>

#include "dvq/binary_io.hpp"
#include "dvq/errors.hpp"

namespace dvq {

namespace {
constexpr std::string_view kBlobMagic = "DVQBL001";
constexpr std::string_view kImageMagic = "DVQIM001";
}  // namespace

void write_blob_dataset(std::ostream& out, const BlobDataset& data) {
  if (data.labels.size() != data.samples.rows()) throw ShapeError("write_blob_dataset: one label per sample");
  binio::write_magic(out, kBlobMagic);
  binio::write_matrix(out, data.samples);
  binio::write_u64(out, data.labels.size());
  for (auto l : data.labels) binio::write_u64(out, l);
  binio::write_matrix(out, data.means);
  if (!out) throw DataError("write_blob_dataset: stream failure");
}

BlobDataset read_blob_dataset(std::istream& in) {
  binio::expect_magic(in, kBlobMagic);
  BlobDataset data;
  data.samples = binio::read_matrix(in);
  const auto n = binio::read_u64(in);
  if (n != data.samples.rows()) throw DataError("read_blob_dataset: label count differs from sample count");
  data.labels.resize(n);
  for (auto& l : data.labels) l = binio::read_u64(in);
  data.means = binio::read_matrix(in);
  for (auto l : data.labels) {
    if (l >= data.means.rows()) throw DataError("read_blob_dataset: label outside the component range");
  }
  return data;
}

void write_image_dataset(std::ostream& out, const ImageDataset& data) {
  data.images.validate();
  if (!data.labels.empty() && data.labels.size() != data.images.count()) {
    throw ShapeError("write_image_dataset: labels must be empty or one per image");
  }
  binio::write_magic(out, kImageMagic);
  binio::write_u64(out, data.images.height);
  binio::write_u64(out, data.images.width);
  binio::write_u64(out, data.images.channels);
  const double range[2] = {data.images.value_min, data.images.value_max};
  binio::write_f64s(out, range);
  binio::write_matrix(out, data.images.pixels);
  binio::write_u64(out, data.labels.size());
  out.write(reinterpret_cast<const char*>(data.labels.data()), static_cast<std::streamsize>(data.labels.size()));
  if (!out) throw DataError("write_image_dataset: stream failure");
}

ImageDataset read_image_dataset(std::istream& in) {
  binio::expect_magic(in, kImageMagic);
  ImageDataset data;
  data.images.height = binio::read_u64(in);
  data.images.width = binio::read_u64(in);
  data.images.channels = binio::read_u64(in);
  double range[2];
  binio::read_f64s(in, range);
  data.images.value_min = range[0];
  data.images.value_max = range[1];
  data.images.pixels = binio::read_matrix(in);
  data.labels.resize(binio::read_u64(in));
  in.read(reinterpret_cast<char*>(data.labels.data()), static_cast<std::streamsize>(data.labels.size()));
  if (static_cast<std::size_t>(in.gcount()) != data.labels.size()) throw DataError("read_image_dataset: truncated labels");
  try {
    data.images.validate();
  } catch (const std::exception& e) {
    throw DataError(std::string("read_image_dataset: ") + e.what());
  }
  if (!data.labels.empty() && data.labels.size() != data.images.count()) {
    throw DataError("read_image_dataset: label count differs from image count");
  }
  return data;
}

void save_image_dataset(const std::filesystem::path& path, const ImageDataset& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_image_dataset(out, data);
}

ImageDataset load_image_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path.string());
  try {
    return read_image_dataset(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

PixelScale parse_pixel_scale(const std::string& name) {
  if (name == "unit") return PixelScale::Unit;
  if (name == "symmetric") return PixelScale::Symmetric;
  throw ConfigError("unknown pixel scale '" + name + "' (unit, symmetric)");
}

std::string to_string(PixelScale scale) { return scale == PixelScale::Unit ? "unit" : "symmetric"; }

ImageDataset read_cifar_batch(std::istream& in, const std::string& source, PixelScale scale,
                              std::size_t expected_records) {
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const std::size_t records = bytes.size() / kCifarRecordBytes;
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw DataError(source + ": truncated record at byte offset " + std::to_string(records * kCifarRecordBytes) +
                    " (file has " + std::to_string(bytes.size()) + " bytes, records are " +
                    std::to_string(kCifarRecordBytes) + " bytes)");
  }
  if (expected_records != 0 && records != expected_records) {
    throw DataError(source + ": expected " + std::to_string(expected_records) + " records, found " +
                    std::to_string(records) + " (ends at byte offset " + std::to_string(bytes.size()) + ")");
  }
  ImageDataset data;
  auto& img = data.images;
  img.height = img.width = 32;
  img.channels = 3;
  img.value_min = scale == PixelScale::Unit ? 0.0 : -1.0;
  img.value_max = 1.0;
  img.pixels = Matrix(records, kCifarImageBytes);
  data.labels.resize(records);
  const double step = (img.value_max - img.value_min) / 255.0;
  for (std::size_t r = 0; r < records; ++r) {
    const std::size_t base = r * kCifarRecordBytes;
    const unsigned label = bytes[base];
    if (label > 9) {
      throw DataError(source + ": label " + std::to_string(label) + " outside [0, 9] at byte offset " +
                      std::to_string(base));
    }
    data.labels[r] = static_cast<std::uint8_t>(label);
    auto row = img.pixels.row(r);
    // CHW planes to HWC.
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t p = 0; p < 1024; ++p) {
        row[p * 3 + c] = img.value_min + step * bytes[base + 1 + c * 1024 + p];
      }
    }
  }
  return data;
}

ImageDataset read_cifar_files(const std::vector<std::filesystem::path>& paths, PixelScale scale,
                              std::size_t expected_records) {
  if (paths.empty()) throw DataError("read_cifar_files: no input files");
  ImageDataset all;
  std::vector<double> pixels;
  for (const auto& path : paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    auto part = read_cifar_batch(in, path.string(), scale, expected_records);
    pixels.insert(pixels.end(), part.images.pixels.data().begin(), part.images.pixels.data().end());
    all.labels.insert(all.labels.end(), part.labels.begin(), part.labels.end());
    all.images = std::move(part.images);
  }
  all.images.pixels = Matrix(all.labels.size(), kCifarImageBytes, std::move(pixels));
  return all;
}

}  // namespace dvq
