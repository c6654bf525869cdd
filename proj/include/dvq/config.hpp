#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace dvq {

/**
 * Flat "key = value" configuration.
 *
 * Blank lines and lines starting with '#' are ignored; trailing "# ..."
 * comments are stripped; values may be wrapped in double quotes. Lists are
 * written as "[a, b, c]" or "a, b, c". Keys are case-sensitive. Every getter
 * marks its key as consumed so unknown keys can be reported.
 */
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::istream& in, const std::string& source = "<config>");
  static KeyValueConfig parse_string(const std::string& text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.contains(key); }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::size_t> get_size_list(const std::string& key) const;
  std::vector<std::size_t> get_size_list(const std::string& key,
                                         const std::vector<std::size_t>& fallback) const;
  std::vector<std::string> get_string_list(const std::string& key) const;

  /// Keys present in the file that no getter has asked for.
  std::vector<std::string> unused_keys() const;

  const std::map<std::string, std::string>& entries() const noexcept { return values_; }

  /// Canonical text form, keys sorted.
  std::string to_text() const;

 private:
  const std::string& raw(const std::string& key) const;

  std::string source_ = "<config>";
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

std::string format_double(double v);
std::string join_sizes(const std::vector<std::size_t>& values);

}  // namespace dvq
