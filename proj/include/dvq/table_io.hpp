#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dvq/metrics.hpp"

namespace dvq {

/**
 * Column layout of an exported table. Every CSV starts with a
 * "schema_version" column whose cells hold id() (e.g. "static_results/1"),
 * so files stay self-describing after concatenation or copying.
 */
struct TableSchema {
  std::string name;
  unsigned version = 1;
  std::vector<std::string> columns;

  std::string id() const { return name + "/" + std::to_string(version); }
  friend bool operator==(const TableSchema&, const TableSchema&) = default;
};

// One row per (model, K, L, D, N_G, repetition) of a static experiment.
const TableSchema& static_results_schema();
// One row per static cell: mean and sample std over repetitions.
const TableSchema& static_summary_schema();
// One row per evaluation point of an autoencoder run.
const TableSchema& ae_results_schema();
// One row per (model, step): mean and sample std over seeds.
const TableSchema& ae_summary_schema();
// Long "tidy" layout for plotting: keys, metric name, value.
const TableSchema& plot_long_schema();

/// Known schema by id, or nullptr.
const TableSchema* find_schema(const std::string& id);

struct Table {
  TableSchema schema;
  std::vector<std::vector<std::string>> rows;

  /// Appends a row; throws ShapeError when the width does not match the schema.
  void add_row(std::vector<std::string> cells);
};

/// RFC 4180 style: fields with comma, quote, CR or LF are quoted, quotes doubled.
std::string csv_escape(const std::string& field);

void write_csv_header(std::ostream& out, const TableSchema& schema);
void write_csv_rows(std::ostream& out, const Table& table);

/**
 * Parses a CSV produced by write_csv_*. The header must name a known schema
 * (taken from the first data row, or `expected` for header-only files) and
 * every row must carry the same schema id. Errors name `source` and line.
 */
Table read_csv(std::istream& in, const std::string& source = "<csv>",
               const TableSchema* expected = nullptr);

/// Writes header and rows to `path`. Throws DataError on empty tables or I/O failure.
void export_table(const Table& table, const std::filesystem::path& path);
Table import_table(const std::filesystem::path& path, const TableSchema* expected = nullptr);

/// Lossless text for a double (shortest round-trip) and its inverse.
std::string format_real(double v);
double parse_real(const std::string& text, const std::string& context);
std::size_t parse_count(const std::string& text, const std::string& context);

struct StaticResultRow {
  std::string model;
  std::size_t codes = 0;
  std::size_t slices = 1;
  std::size_t dim = 0;
  std::size_t components = 0;
  std::size_t repetition = 0;
  double final_test_loss = 0.0;
  double initial_test_loss = 0.0;
  double random_baseline = 0.0;

  friend bool operator==(const StaticResultRow&, const StaticResultRow&) = default;
};

struct StaticSummaryRow {
  std::string model;
  std::size_t codes = 0;
  std::size_t slices = 1;
  std::size_t dim = 0;
  std::size_t components = 0;
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;
  double random_mean = 0.0;
  double random_std = 0.0;

  friend bool operator==(const StaticSummaryRow&, const StaticSummaryRow&) = default;
};

struct AeResultRow {
  std::string model;
  std::uint64_t seed = 0;
  std::size_t step = 0;
  double reconstruction = 0.0;
  double commitment = 0.0;
  double vq = 0.0;
  double total = 0.0;
  double bits_per_dim = 0.0;
  double mean_perplexity = 0.0;

  friend bool operator==(const AeResultRow&, const AeResultRow&) = default;
};

struct AeSummaryRow {
  std::string model;
  std::size_t step = 0;
  std::size_t count = 0;
  double reconstruction_mean = 0.0;
  double reconstruction_std = 0.0;
  double bits_per_dim_mean = 0.0;
  double bits_per_dim_std = 0.0;

  friend bool operator==(const AeSummaryRow&, const AeSummaryRow&) = default;
};

Table to_table(std::span<const StaticResultRow> rows);
Table to_table(std::span<const StaticSummaryRow> rows);
Table to_table(std::span<const AeResultRow> rows);
Table to_table(std::span<const AeSummaryRow> rows);

std::vector<StaticResultRow> static_results_from(const Table& table);
std::vector<StaticSummaryRow> static_summaries_from(const Table& table);
std::vector<AeResultRow> ae_results_from(const Table& table);

/// Groups by (model, K, L, D, N_G) in first-appearance order.
std::vector<StaticSummaryRow> summarize_static(std::span<const StaticResultRow> rows);
/// Groups by (model, step) in first-appearance order.
std::vector<AeSummaryRow> summarize_ae(std::span<const AeResultRow> rows);

Table to_long_format(std::span<const StaticSummaryRow> rows);
Table to_long_format(std::span<const AeSummaryRow> rows);

AeResultRow ae_result_from(const MetricsRecord& record, const std::string& model, std::uint64_t seed);

/// One JSON object per line with a "schema": "metrics/1" field.
std::string metrics_to_json_line(const MetricsRecord& record, const std::string& model);
MetricsRecord metrics_from_json_line(const std::string& line);
std::vector<MetricsRecord> read_metrics_jsonl(std::istream& in, const std::string& source = "<jsonl>");

}  // namespace dvq
