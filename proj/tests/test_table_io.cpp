#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"
#include "dvq/errors.hpp"
#include "dvq/table_io.hpp"

using namespace dvq;
namespace fs = std::filesystem;

namespace {

std::vector<StaticResultRow> sample_rows() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::vector<StaticResultRow> rows;
  for (std::size_t rep = 0; rep < 4; ++rep) {
    rows.push_back({"DVQ", 20, 4, 64, 70, rep, u(rng), u(rng), u(rng)});
  }
  rows.push_back({"VQ_KPLUS", 50, 1, 64, 70, 0, 1.0 / 3.0, std::numeric_limits<double>::denorm_min(), 1e300});
  return rows;
}

std::string to_csv(const Table& t) {
  std::ostringstream out;
  write_csv_header(out, t.schema);
  write_csv_rows(out, t);
  return out.str();
}

}  // namespace

TEST_CASE("static results round trip losslessly") {
  const auto rows = sample_rows();
  std::istringstream in(to_csv(to_table(rows)));
  const auto back = static_results_from(read_csv(in));
  CHECK(back == rows);
}

TEST_CASE("documented column layouts") {
  std::ostringstream out;
  write_csv_header(out, static_results_schema());
  CHECK(out.str() ==
        "schema_version,model,K,L,D,N_G,repetition,final_test_loss,initial_test_loss,random_baseline\n");
  out.str("");
  write_csv_header(out, static_summary_schema());
  CHECK(out.str() == "schema_version,model,K,L,D,N_G,count,mean,std,random_mean,random_std\n");
  out.str("");
  write_csv_header(out, ae_results_schema());
  CHECK(out.str() ==
        "schema_version,model,seed,step,reconstruction,commitment,vq,total,bits_per_dim,mean_perplexity\n");
  CHECK(static_results_schema().id() == "static_results/1");
}

TEST_CASE("RFC quoting") {
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv_escape("two\nlines") == "\"two\nlines\"");
  std::vector<StaticResultRow> rows{{"odd, \"name\"\nx", 1, 1, 2, 3, 0, 1.5, 2.5, 3.5}};
  std::istringstream in(to_csv(to_table(rows)));
  CHECK(static_results_from(read_csv(in)) == rows);
}

TEST_CASE("reader rejects malformed and mixed input") {
  std::istringstream empty("");
  CHECK_THROWS_AS(read_csv(empty), DataError);
  std::istringstream no_schema_col("model,K\nDVQ,1\n");
  CHECK_THROWS_AS(read_csv(no_schema_col), DataError);
  std::istringstream unknown("schema_version,a\nmystery/3,1\n");
  CHECK_THROWS_WITH_AS(read_csv(unknown), doctest::Contains("unknown schema"), DataError);

  auto text = to_csv(to_table(sample_rows()));
  std::istringstream mixed(text + "ae_results/1,DVQ,20,4,64,70,9,1,2,3\n");
  CHECK_THROWS_WITH_AS(read_csv(mixed), doctest::Contains("schema mismatch"), DataError);
  std::istringstream short_row(text + "static_results/1,DVQ,20\n");
  CHECK_THROWS_WITH_AS(read_csv(short_row, "x.csv"), doctest::Contains("x.csv:7"), DataError);
  std::istringstream expected_other(text);
  CHECK_THROWS_AS(read_csv(expected_other, "x", &ae_results_schema()), DataError);

  std::istringstream bad_number("schema_version,model,K,L,D,N_G,repetition,final_test_loss,initial_test_loss,random_baseline\n"
                                "static_results/1,DVQ,20,4,64,70,0,abc,1,2\n");
  CHECK_THROWS_WITH_AS(static_results_from(read_csv(bad_number)), doctest::Contains("final_test_loss"), DataError);
}

TEST_CASE("header-only files need an expected schema") {
  std::ostringstream out;
  write_csv_header(out, static_results_schema());
  std::istringstream a(out.str());
  CHECK_THROWS_AS(read_csv(a), DataError);
  std::istringstream b(out.str());
  const auto t = read_csv(b, "x", &static_results_schema());
  CHECK(t.rows.empty());
}

TEST_CASE("export refuses empty tables and reports I/O failures") {
  const auto dir = fs::temp_directory_path() / "dvq_table_io_test";
  fs::create_directories(dir);
  CHECK_THROWS_AS(export_table(Table{static_results_schema(), {}}, dir / "t.csv"), DataError);
  CHECK_THROWS_WITH_AS(export_table(to_table(sample_rows()), dir / "missing" / "t.csv"),
                       doctest::Contains("missing"), DataError);
  export_table(to_table(sample_rows()), dir / "t.csv");
  CHECK(static_results_from(import_table(dir / "t.csv")) == sample_rows());
  CHECK_THROWS_AS(import_table(dir / "nope.csv"), DataError);
  fs::remove_all(dir);
}

TEST_CASE("summaries group in first-appearance order") {
  std::vector<StaticResultRow> rows{
      {"VQ", 20, 1, 64, 70, 0, 1.0, 5.0, 9.0},
      {"DVQ", 20, 4, 64, 70, 0, 2.0, 5.0, 9.0},
      {"VQ", 20, 1, 64, 70, 1, 2.0, 5.0, 11.0},
      {"VQ", 20, 1, 64, 70, 2, 6.0, 5.0, 10.0},
  };
  const auto s = summarize_static(rows);
  REQUIRE(s.size() == 2);
  CHECK(s[0].model == "VQ");
  CHECK(s[0].count == 3);
  CHECK(s[0].mean == doctest::Approx(3.0));
  CHECK(s[0].std == doctest::Approx(std::sqrt(7.0)));  // values 1, 2, 6
  CHECK(s[0].random_mean == doctest::Approx(10.0));
  CHECK(s[1].count == 1);
  CHECK(s[1].std == 0.0);

  std::istringstream in(to_csv(to_table(s)));
  CHECK(static_summaries_from(read_csv(in)) == s);
  CHECK(to_long_format(std::span<const StaticSummaryRow>(s)).rows.size() == 8);
}

TEST_CASE("autoencoder rows and summaries") {
  std::vector<AeResultRow> rows{{"DVQ", 0, 100, 0.5, 1, 1, 2, 3, 4}, {"DVQ", 1, 100, 0.7, 1, 1, 2, 5, 4},
                                {"VQ", 0, 100, 0.9, 1, 1, 2, 6, 4}};
  std::istringstream in(to_csv(to_table(rows)));
  CHECK(ae_results_from(read_csv(in)) == rows);
  const auto s = summarize_ae(rows);
  REQUIRE(s.size() == 2);
  CHECK(s[0].reconstruction_mean == doctest::Approx(0.6));
  CHECK(s[0].bits_per_dim_mean == doctest::Approx(4.0));
  CHECK(s[0].count == 2);
}

TEST_CASE("metrics JSON lines round trip") {
  MetricsRecord r;
  r.step = 300;
  r.split = "eval";
  r.loss = {0.1 + 0.2, 1.0 / 3.0, 2.0 / 7.0, 0.7, 0.25};
  r.bits_per_dim = 3.14159265358979;
  r.usage = {{1, 0, 5}, {3, 3, 0}};
  r.perplexity = {1.5, 2.0};
  const auto line = metrics_to_json_line(r, "DVQ");
  CHECK(line.find("\"schema\":\"metrics/1\"") != std::string::npos);
  CHECK(metrics_from_json_line(line) == r);
  const auto row = ae_result_from(r, "DVQ", 4);
  CHECK(row.mean_perplexity == doctest::Approx(1.75));

  std::istringstream stream(line + "\n\n" + line + "\n{\"schema\":\"other/1\"}\n");
  CHECK_THROWS_WITH_AS(read_metrics_jsonl(stream, "m.jsonl"), doctest::Contains("m.jsonl:4"), DataError);
  CHECK_THROWS_AS(metrics_from_json_line("not json"), DataError);
}
