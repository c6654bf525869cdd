#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dvq/errors.hpp"
#include "dvq/matrix.hpp"

// Little-endian record helpers shared by every on-disk format in the project.
namespace dvq::binio {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats assume a little-endian host");

inline void write_magic(std::ostream& out, std::string_view magic) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::istream& in, std::string_view magic) {
  std::string got(magic.size(), '\0');
  in.read(got.data(), static_cast<std::streamsize>(got.size()));
  if (!in || got != magic) {
    throw DataError("bad magic: expected '" + std::string(magic) + "'");
  }
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw DataError("truncated record while reading u64");
  return v;
}

inline void write_f64s(std::ostream& out, std::span<const double> values) {
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size_bytes()));
}

inline void read_f64s(std::istream& in, std::span<double> values) {
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size_bytes()));
  if (!in) throw DataError("truncated record while reading float64 block");
}

inline void write_string(std::ostream& out, std::string_view s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, std::uint64_t max_len = 1u << 26) {
  const auto n = read_u64(in);
  if (n > max_len) throw DataError("string length exceeds limit");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw DataError("truncated record while reading string");
  return s;
}

// u64 rows, u64 cols, row-major float64 payload.
inline void write_matrix(std::ostream& out, const Matrix& m) {
  write_u64(out, m.rows());
  write_u64(out, m.cols());
  write_f64s(out, m.data());
}

inline Matrix read_matrix(std::istream& in) {
  const auto rows = read_u64(in);
  const auto cols = read_u64(in);
  if (cols != 0 && rows > (std::uint64_t{1} << 40) / cols) {
    throw DataError("matrix header declares an implausible size");
  }
  Matrix m(rows, cols);
  read_f64s(in, m.data());
  return m;
}

}  // namespace dvq::binio
