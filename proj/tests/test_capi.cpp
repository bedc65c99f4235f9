#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>

#include "approxflow/approxflow.h"
#include "helpers.hpp"

namespace {

af_run_options options_for(const std::string& pipeline, const std::string& input) {
  af_run_options o;
  af_run_options_init(&o);
  static thread_local std::string p, i;
  p = pipeline;
  i = input;
  o.pipeline = p.c_str();
  o.input = i.c_str();
  o.partitions = 2;
  o.threads = 1;
  return o;
}

}  // namespace

TEST_CASE("defaults") {
  af_run_options o;
  af_run_options_init(&o);
  CHECK(o.partitions == 8);
  CHECK(o.partition_rate == 1.0);
  CHECK(o.item_rate == 1.0);
  CHECK(o.confidence == 0.95);
  CHECK(std::string(af_version()).size() > 0);
}

TEST_CASE("run, inspect and write a result") {
  testing::TempDir dir;
  testing::write_file(dir / "in.txt", "a a b\n");
  const auto opts = options_for("wordcount", (dir / "in.txt").string());
  af_result* res = nullptr;
  REQUIRE(af_run(&opts, &res) == AF_OK);
  CHECK(af_result_row_count(res) == 2);
  af_row row;
  REQUIRE(af_result_find(res, "a", &row) == AF_OK);
  CHECK(row.estimate == 2.0);
  CHECK(row.epsilon == 0.0);
  CHECK(af_result_find(res, "zzz", &row) != AF_OK);
  REQUIRE(af_result_row(res, 1, &row) == AF_OK);
  CHECK(std::string(row.key) == "b");
  CHECK(af_result_row(res, 2, &row) == AF_ERR_USAGE);
  CHECK(af_result_depth(res) == 2);
  CHECK(std::string(af_result_provenance(res)).size() > 0);
  double p1 = 0, p2 = 0;
  af_result_rates(res, &p1, &p2);
  CHECK(p1 == 1.0);
  CHECK(p2 == 1.0);
  const auto out = (dir / "out.csv").string();
  CHECK(af_result_write(res, out.c_str(), "csv") == AF_OK);
  CHECK(testing::read_file(out).rfind("key,estimate,variance", 0) == 0);
  CHECK(af_result_write(res, out.c_str(), "xml") == AF_ERR_USAGE);
  af_result_free(res);
}

TEST_CASE("exact and compare through files") {
  testing::TempDir dir;
  testing::write_file(dir / "in.txt", "x y\nx z\n");
  const auto opts = options_for("wordcount", (dir / "in.txt").string());
  af_result* approx = nullptr;
  af_result* exact = nullptr;
  REQUIRE(af_run(&opts, &approx) == AF_OK);
  REQUIRE(af_run_exact(&opts, &exact) == AF_OK);
  const auto a = (dir / "a.json").string();
  const auto e = (dir / "e.csv").string();
  REQUIRE(af_result_write(approx, a.c_str(), "json") == AF_OK);
  REQUIRE(af_result_write(exact, e.c_str(), "csv") == AF_OK);
  CHECK(testing::read_file(e).rfind("key,value", 0) == 0);
  af_compare_summary s;
  const auto c = (dir / "c.json").string();
  REQUIRE(af_compare_files(a.c_str(), e.c_str(), c.c_str(), "json", &s) == AF_OK);
  CHECK(s.exact_keys == 3);
  CHECK(s.lost_keys == 0);
  CHECK(s.key_loss == 0.0);
  CHECK(s.ci_containment == 1.0);
  af_result_free(approx);
  af_result_free(exact);
}

TEST_CASE("datasets can be loaded once and executed") {
  testing::TempDir dir;
  testing::write_file(dir / "in.txt", "k,1\nk,2\nj,3\nk,4\n");
  auto opts = options_for("synth", (dir / "in.txt").string());
  af_dataset* ds = nullptr;
  REQUIRE(af_dataset_load(&opts, &ds) == AF_OK);
  CHECK(af_dataset_origin_partitions(ds) == 2);
  CHECK(af_dataset_selected_partitions(ds) == 2);
  CHECK(af_dataset_sampled_items(ds) == 4);
  af_result* sum = nullptr;
  af_result* mean = nullptr;
  REQUIRE(af_dataset_execute(ds, "synth", "sum", 1, &sum) == AF_OK);
  REQUIRE(af_dataset_execute(ds, "synth", "mean", 1, &mean) == AF_OK);
  af_row row;
  REQUIRE(af_result_find(sum, "k", &row) == AF_OK);
  CHECK(row.estimate == 7.0);
  REQUIRE(af_result_find(mean, "k", &row) == AF_OK);
  CHECK(row.estimate == doctest::Approx(7.0 / 3.0));
  af_result_free(sum);
  af_result_free(mean);
  af_dataset_free(ds);
}

TEST_CASE("errors carry a status and a message") {
  auto opts = options_for("nope", "/nonexistent");
  af_result* res = nullptr;
  CHECK(af_run(&opts, &res) == AF_ERR_USAGE);
  CHECK(res == nullptr);
  CHECK(std::string(af_last_error()).size() > 0);
  opts = options_for("wordcount", "/nonexistent/file");
  CHECK(af_run(&opts, &res) == AF_ERR_INPUT);
  CHECK(af_run(nullptr, &res) == AF_ERR_USAGE);
  opts.partition_rate = 0.0;
  CHECK(af_run(&opts, &res) == AF_ERR_USAGE);
}

TEST_CASE("synth and tune") {
  testing::TempDir dir;
  af_synth_options so;
  af_synth_options_init(&so);
  so.keys = 20;
  so.partitions = 40;
  so.items_per_partition = 200;
  so.seed = 3;
  const auto d = (dir / "data").string();
  REQUIRE(af_synth(&so, d.c_str()) == AF_OK);
  CHECK(std::filesystem::exists(dir / "data/_manifest.json"));

  auto opts = options_for("synth", d);
  opts.partitions = 40;
  const double pct[] = {50.0, 90.0};
  const double bounds[] = {0.1, 0.2};
  af_result* res = nullptr;
  REQUIRE(af_tune(&opts, pct, bounds, 2, 0.25, 0.01, 0.75, &res) == AF_OK);
  double p1 = 0, p2 = 0;
  af_result_rates(res, &p1, &p2);
  CHECK(p1 <= 1.0);
  CHECK(p2 <= 1.0);
  CHECK(af_result_row_count(res) > 0);
  af_result_free(res);

  const double zero[] = {0.0};
  const double hundred[] = {100.0};
  CHECK(af_tune(&opts, hundred, zero, 1, 0.25, 0.01, 0.75, &res) == AF_ERR_INFEASIBLE);
}
