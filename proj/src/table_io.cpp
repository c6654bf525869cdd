#include "dvq/table_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include <json.hpp>

#include "dvq/config.hpp"
#include "dvq/errors.hpp"
#include "dvq/static_lab.hpp"

namespace dvq {

namespace {

constexpr std::string_view kSchemaColumn = "schema_version";
constexpr std::string_view kMetricsSchema = "metrics/1";

const std::vector<const TableSchema*>& known_schemas() {
  static const std::vector<const TableSchema*> all{&static_results_schema(), &static_summary_schema(),
                                                   &ae_results_schema(), &ae_summary_schema(),
                                                   &plot_long_schema()};
  return all;
}

// Splits one logical CSV record; quoted fields may span lines.
bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line) {
  fields.clear();
  std::string field;
  bool quoted = false, any = false;
  char ch;
  while (in.get(ch)) {
    any = true;
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        if (ch == '\n') ++line;
        field += ch;
      }
      continue;
    }
    if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n') {
      ++line;
      fields.push_back(std::move(field));
      return true;
    } else if (ch != '\r') {
      field += ch;
    }
  }
  if (quoted) throw DataError("unterminated quoted field");
  if (any) fields.push_back(std::move(field));
  return any;
}

std::string cell_context(const std::string& column, const std::string& value) {
  return "column '" + column + "' value '" + value + "'";
}

std::vector<std::vector<std::string>> rows_of(const Table& table, const TableSchema& schema) {
  if (table.schema.id() != schema.id()) {
    throw DataError("expected a " + schema.id() + " table, got " + table.schema.id());
  }
  return table.rows;
}

}  // namespace

const TableSchema& static_results_schema() {
  static const TableSchema s{"static_results", 1,
                             {"model", "K", "L", "D", "N_G", "repetition", "final_test_loss",
                              "initial_test_loss", "random_baseline"}};
  return s;
}

const TableSchema& static_summary_schema() {
  static const TableSchema s{"static_summary", 1,
                             {"model", "K", "L", "D", "N_G", "count", "mean", "std", "random_mean",
                              "random_std"}};
  return s;
}

const TableSchema& ae_results_schema() {
  static const TableSchema s{"ae_results", 1,
                             {"model", "seed", "step", "reconstruction", "commitment", "vq", "total",
                              "bits_per_dim", "mean_perplexity"}};
  return s;
}

const TableSchema& ae_summary_schema() {
  static const TableSchema s{"ae_summary", 1,
                             {"model", "step", "count", "reconstruction_mean", "reconstruction_std",
                              "bits_per_dim_mean", "bits_per_dim_std"}};
  return s;
}

const TableSchema& plot_long_schema() {
  static const TableSchema s{"plot_long", 1, {"model", "K", "L", "D", "N_G", "step", "metric", "value"}};
  return s;
}

const TableSchema* find_schema(const std::string& id) {
  for (const auto* s : known_schemas()) {
    if (s->id() == id) return s;
  }
  return nullptr;
}

void Table::add_row(std::vector<std::string> cells) {
  if (cells.size() != schema.columns.size()) {
    throw ShapeError("table " + schema.id() + ": row has " + std::to_string(cells.size()) +
                     " cells, schema has " + std::to_string(schema.columns.size()));
  }
  rows.push_back(std::move(cells));
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_csv_header(std::ostream& out, const TableSchema& schema) {
  out << kSchemaColumn;
  for (const auto& c : schema.columns) out << ',' << csv_escape(c);
  out << '\n';
}

void write_csv_rows(std::ostream& out, const Table& table) {
  const std::string id = csv_escape(table.schema.id());
  for (const auto& row : table.rows) {
    out << id;
    for (const auto& cell : row) out << ',' << csv_escape(cell);
    out << '\n';
  }
}

Table read_csv(std::istream& in, const std::string& source, const TableSchema* expected) {
  std::size_t line = 1;
  std::vector<std::string> header;
  auto fail = [&](const std::string& what) { return DataError(source + ":" + std::to_string(line) + ": " + what); };
  try {
    if (!read_record(in, header, line)) throw fail("empty file (no header)");
  } catch (const DataError& e) {
    throw fail(e.what());
  }
  if (header.empty() || header.front() != kSchemaColumn) {
    throw fail("first column must be '" + std::string(kSchemaColumn) + "'");
  }
  const std::vector<std::string> columns(header.begin() + 1, header.end());

  Table table;
  std::vector<std::string> fields;
  bool have_schema = false;
  auto adopt = [&](const TableSchema& s) {
    if (s.columns != columns) throw fail("header columns do not match schema " + s.id());
    if (expected && s.id() != expected->id()) {
      throw fail("schema mismatch: expected " + expected->id() + ", found " + s.id());
    }
    table.schema = s;
    have_schema = true;
  };
  while (true) {
    const std::size_t row_line = line;
    bool got;
    try {
      got = read_record(in, fields, line);
    } catch (const DataError& e) {
      throw fail(e.what());
    }
    if (!got) break;
    if (fields.size() == 1 && fields.front().empty()) continue;  // blank line
    if (!have_schema) {
      const TableSchema* s = find_schema(fields.front());
      if (!s) throw fail("unknown schema '" + fields.front() + "'");
      adopt(*s);
    } else if (fields.front() != table.schema.id()) {
      line = row_line;
      throw fail("schema mismatch: row has '" + fields.front() + "', file is " + table.schema.id());
    }
    if (fields.size() != columns.size() + 1) {
      line = row_line;
      throw fail("expected " + std::to_string(columns.size() + 1) + " fields, got " +
                 std::to_string(fields.size()));
    }
    table.rows.emplace_back(fields.begin() + 1, fields.end());
  }
  if (!have_schema) {
    if (!expected) throw fail("header-only file with no schema id");
    adopt(*expected);
  }
  return table;
}

void export_table(const Table& table, const std::filesystem::path& path) {
  if (table.rows.empty()) throw DataError("export_table: no records for " + path.string());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("export_table: cannot open " + path.string() + " for writing");
  write_csv_header(out, table.schema);
  write_csv_rows(out, table);
  out.flush();
  if (!out) throw DataError("export_table: write failed for " + path.string());
}

Table import_table(const std::filesystem::path& path, const TableSchema* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("import_table: cannot open " + path.string());
  return read_csv(in, path.string(), expected);
}

std::string format_real(double v) { return format_double(v); }

double parse_real(const std::string& text, const std::string& context) {
  if (text == "nan") return std::nan("");
  if (text == "inf") return INFINITY;
  if (text == "-inf") return -INFINITY;
  double v = 0.0;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) throw DataError("not a number: " + context);
  return v;
}

std::size_t parse_count(const std::string& text, const std::string& context) {
  std::size_t v = 0;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || p != text.data() + text.size()) {
    throw DataError("not a non-negative integer: " + context);
  }
  return v;
}

Table to_table(std::span<const StaticResultRow> rows) {
  Table t{static_results_schema(), {}};
  for (const auto& r : rows) {
    t.add_row({r.model, std::to_string(r.codes), std::to_string(r.slices), std::to_string(r.dim),
               std::to_string(r.components), std::to_string(r.repetition), format_real(r.final_test_loss),
               format_real(r.initial_test_loss), format_real(r.random_baseline)});
  }
  return t;
}

Table to_table(std::span<const StaticSummaryRow> rows) {
  Table t{static_summary_schema(), {}};
  for (const auto& r : rows) {
    t.add_row({r.model, std::to_string(r.codes), std::to_string(r.slices), std::to_string(r.dim),
               std::to_string(r.components), std::to_string(r.count), format_real(r.mean), format_real(r.std),
               format_real(r.random_mean), format_real(r.random_std)});
  }
  return t;
}

Table to_table(std::span<const AeResultRow> rows) {
  Table t{ae_results_schema(), {}};
  for (const auto& r : rows) {
    t.add_row({r.model, std::to_string(r.seed), std::to_string(r.step), format_real(r.reconstruction),
               format_real(r.commitment), format_real(r.vq), format_real(r.total), format_real(r.bits_per_dim),
               format_real(r.mean_perplexity)});
  }
  return t;
}

Table to_table(std::span<const AeSummaryRow> rows) {
  Table t{ae_summary_schema(), {}};
  for (const auto& r : rows) {
    t.add_row({r.model, std::to_string(r.step), std::to_string(r.count), format_real(r.reconstruction_mean),
               format_real(r.reconstruction_std), format_real(r.bits_per_dim_mean),
               format_real(r.bits_per_dim_std)});
  }
  return t;
}

namespace {

// Typed access to one row, reporting the column on failure.
struct RowReader {
  const TableSchema& schema;
  const std::vector<std::string>& row;
  const std::string& at(std::size_t i) const { return row.at(i); }
  std::size_t count(std::size_t i) const { return parse_count(row[i], cell_context(schema.columns[i], row[i])); }
  double real(std::size_t i) const { return parse_real(row[i], cell_context(schema.columns[i], row[i])); }
};

}  // namespace

std::vector<StaticResultRow> static_results_from(const Table& table) {
  std::vector<StaticResultRow> out;
  for (const auto& row : rows_of(table, static_results_schema())) {
    const RowReader r{table.schema, row};
    out.push_back({r.at(0), r.count(1), r.count(2), r.count(3), r.count(4), r.count(5), r.real(6), r.real(7),
                   r.real(8)});
  }
  return out;
}

std::vector<StaticSummaryRow> static_summaries_from(const Table& table) {
  std::vector<StaticSummaryRow> out;
  for (const auto& row : rows_of(table, static_summary_schema())) {
    const RowReader r{table.schema, row};
    out.push_back({r.at(0), r.count(1), r.count(2), r.count(3), r.count(4), r.count(5), r.real(6), r.real(7),
                   r.real(8), r.real(9)});
  }
  return out;
}

std::vector<AeResultRow> ae_results_from(const Table& table) {
  std::vector<AeResultRow> out;
  for (const auto& row : rows_of(table, ae_results_schema())) {
    const RowReader r{table.schema, row};
    out.push_back({r.at(0), r.count(1), r.count(2), r.real(3), r.real(4), r.real(5), r.real(6), r.real(7),
                   r.real(8)});
  }
  return out;
}

std::vector<StaticSummaryRow> summarize_static(std::span<const StaticResultRow> rows) {
  using Key = std::tuple<std::string, std::size_t, std::size_t, std::size_t, std::size_t>;
  std::vector<Key> order;
  std::map<Key, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : rows) {
    const Key key{r.model, r.codes, r.slices, r.dim, r.components};
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) order.push_back(key);
    it->second.first.push_back(r.final_test_loss);
    it->second.second.push_back(r.random_baseline);
  }
  std::vector<StaticSummaryRow> out;
  for (const auto& key : order) {
    const auto& [loss, random] = groups.at(key);
    const auto s = summarize(loss);
    const auto rs = summarize(random);
    out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), std::get<3>(key), std::get<4>(key),
                   loss.size(), s.mean, s.std, rs.mean, rs.std});
  }
  return out;
}

std::vector<AeSummaryRow> summarize_ae(std::span<const AeResultRow> rows) {
  using Key = std::pair<std::string, std::size_t>;
  std::vector<Key> order;
  std::map<Key, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : rows) {
    const Key key{r.model, r.step};
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) order.push_back(key);
    it->second.first.push_back(r.reconstruction);
    it->second.second.push_back(r.bits_per_dim);
  }
  std::vector<AeSummaryRow> out;
  for (const auto& key : order) {
    const auto& [recon, bpd] = groups.at(key);
    const auto a = summarize(recon);
    const auto b = summarize(bpd);
    out.push_back({key.first, key.second, recon.size(), a.mean, a.std, b.mean, b.std});
  }
  return out;
}

Table to_long_format(std::span<const StaticSummaryRow> rows) {
  Table t{plot_long_schema(), {}};
  for (const auto& r : rows) {
    const std::vector<std::string> keys{r.model, std::to_string(r.codes), std::to_string(r.slices),
                                        std::to_string(r.dim), std::to_string(r.components), ""};
    for (const auto& [metric, value] : {std::pair<const char*, double>{"mean", r.mean},
                                        {"std", r.std},
                                        {"random_mean", r.random_mean},
                                        {"random_std", r.random_std}}) {
      auto cells = keys;
      cells.push_back(metric);
      cells.push_back(format_real(value));
      t.add_row(std::move(cells));
    }
  }
  return t;
}

Table to_long_format(std::span<const AeSummaryRow> rows) {
  Table t{plot_long_schema(), {}};
  for (const auto& r : rows) {
    for (const auto& [metric, value] : {std::pair<const char*, double>{"reconstruction_mean", r.reconstruction_mean},
                                        {"reconstruction_std", r.reconstruction_std},
                                        {"bits_per_dim_mean", r.bits_per_dim_mean},
                                        {"bits_per_dim_std", r.bits_per_dim_std}}) {
      t.add_row({r.model, "", "", "", "", std::to_string(r.step), metric, format_real(value)});
    }
  }
  return t;
}

AeResultRow ae_result_from(const MetricsRecord& record, const std::string& model, std::uint64_t seed) {
  double perplexity = 0.0;
  for (double p : record.perplexity) perplexity += p;
  if (!record.perplexity.empty()) perplexity /= static_cast<double>(record.perplexity.size());
  return {model, seed, record.step, record.loss.reconstruction, record.loss.commitment, record.loss.vq,
          record.loss.total, record.bits_per_dim, perplexity};
}

std::string metrics_to_json_line(const MetricsRecord& r, const std::string& model) {
  const nlohmann::ordered_json j{
      {"schema", kMetricsSchema},
      {"model", model},
      {"step", r.step},
      {"split", r.split},
      {"reconstruction", r.loss.reconstruction},
      {"commitment", r.loss.commitment},
      {"vq", r.loss.vq},
      {"total", r.loss.total},
      {"beta", r.loss.beta},
      {"bits_per_dim", r.bits_per_dim},
      {"usage", r.usage},
      {"perplexity", r.perplexity},
  };
  return j.dump();
}

MetricsRecord metrics_from_json_line(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("metrics line is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("schema", "") != kMetricsSchema) {
    throw DataError("metrics line has schema '" + (j.is_object() ? j.value("schema", "") : "") +
                    "', expected " + std::string(kMetricsSchema));
  }
  try {
    MetricsRecord r;
    r.step = j.at("step").get<std::size_t>();
    r.split = j.at("split").get<std::string>();
    r.loss = {j.at("reconstruction").get<double>(), j.at("commitment").get<double>(), j.at("vq").get<double>(),
              j.at("total").get<double>(), j.at("beta").get<double>()};
    r.bits_per_dim = j.at("bits_per_dim").get<double>();
    r.usage = j.at("usage").get<std::vector<std::vector<std::size_t>>>();
    r.perplexity = j.at("perplexity").get<std::vector<double>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("metrics line is missing a field: ") + e.what());
  }
}

std::vector<MetricsRecord> read_metrics_jsonl(std::istream& in, const std::string& source) {
  std::vector<MetricsRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(metrics_from_json_line(line));
    } catch (const DataError& e) {
      throw DataError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace dvq
