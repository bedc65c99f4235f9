#include <doctest.h>

#include <cmath>
#include <limits>

#include "approxflow/error.hpp"
#include "approxflow/report.hpp"
#include "approxflow/synth.hpp"
#include "approxflow/tuner.hpp"

#include "helpers.hpp"

using namespace approxflow;

namespace {

PartitionedDataset full_load(std::vector<std::vector<std::string>> raw, std::uint64_t seed = 0) {
  SamplingConfig cfg;
  cfg.seed = seed;
  return PartitionedDataset::from_partitions(std::move(raw), cfg, 1);
}

const PilotKeyStats& key_of(const PilotStats& s, const std::string& key) {
  for (const auto& k : s.keys) {
    if (k.key == key) return k;
  }
  FAIL("missing key " << key);
  return s.average;
}

PilotStats synth_pilot(std::size_t keys, std::uint64_t seed) {
  SynthConfig sc;
  sc.keys = keys;
  sc.partitions = 40;
  sc.items_per_partition = 500;
  sc.seed = seed;
  RateSearchConfig rc;
  rc.pilot_fraction = 0.25;
  return run_pilot(full_load(synth_partitions(sc), seed), builtin_pipeline("synth"), rc, 1);
}

}  // namespace

TEST_CASE("target parsing and validation") {
  const auto t = parse_target("90=0.05");
  CHECK(t.percentile == 90.0);
  CHECK(t.max_relative_bound == 0.05);
  CHECK_THROWS_AS(parse_target("90"), UsageError);
  CHECK_THROWS_AS(parse_target("x=0.1"), UsageError);
  CHECK_THROWS_AS(ErrorTargets{}.validate(), UsageError);
  CHECK_THROWS_AS((ErrorTargets{{{0.0, 0.1}}}.validate()), UsageError);
  CHECK_THROWS_AS((ErrorTargets{{{101.0, 0.1}}}.validate()), UsageError);
  CHECK_THROWS_AS((ErrorTargets{{{90.0, 0.1}, {50.0, 0.2}}}.validate()), UsageError);
  CHECK_NOTHROW((ErrorTargets{{{50.0, 0.1}, {100.0, 0.2}}}.validate()));
  RateSearchConfig bad;
  bad.step = 0.2;
  CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("empirical quantile uses the ceiling rank") {
  const std::vector<double> v{5, 1, 4, 2, 3};
  CHECK(empirical_quantile(v, 50) == 3.0);
  CHECK(empirical_quantile(v, 20) == 1.0);
  CHECK(empirical_quantile(v, 21) == 2.0);
  CHECK(empirical_quantile(v, 100) == 5.0);
}

TEST_CASE("identical partitions have no spread of partition totals") {
  std::vector<std::vector<std::string>> raw(10, {"a,1", "a,2", "b,3"});
  RateSearchConfig rc;
  rc.pilot_fraction = 0.5;
  const auto s = run_pilot(full_load(raw), builtin_pipeline("synth"), rc, 1);
  CHECK(s.pilot_partitions == 5);
  const auto& a = key_of(s, "a");
  CHECK(a.inter_variance == doctest::Approx(0.0));
  CHECK_FALSE(a.inter_degenerate);
  CHECK(a.intra_variance == doctest::Approx(0.5));
  CHECK(a.item_count == 10.0);
  CHECK(a.population == doctest::Approx(20.0));
  CHECK(a.total_estimate == doctest::Approx(30.0));
  CHECK(key_of(s, "b").intra_degenerate);
  // identical partitions and full item sampling predict zero error at any partition rate
  const auto bounds = predict_bounds(s, 0.2, 1.0, ConfidenceSpec{});
  for (double b : bounds) CHECK(b == 0.0);
}

TEST_CASE("a key seen in one pilot partition is flagged") {
  std::vector<std::vector<std::string>> raw(6, {"a,1", "a,2"});
  raw[3].push_back("solo,7");
  raw[3].push_back("solo,9");
  RateSearchConfig rc;
  rc.pilot_fraction = 1.0;
  rc.step = 0.01;
  rc.min_rate = 0.01;
  const auto s = run_pilot(full_load(raw), builtin_pipeline("synth"), rc, 1);
  const auto& solo = key_of(s, "solo");
  CHECK(solo.inter_degenerate);
  CHECK(solo.partitions_present == 1);
  CHECK_FALSE(key_of(s, "a").inter_degenerate);
}

TEST_CASE("pilot preconditions") {
  RateSearchConfig rc;
  rc.pilot_fraction = 0.1;
  std::vector<std::vector<std::string>> raw(5, {"a,1"});
  CHECK_THROWS_AS(run_pilot(full_load(raw), builtin_pipeline("synth"), rc, 1), UsageError);
  SamplingConfig half;
  half.item_rate = 0.5;
  const auto sampled = PartitionedDataset::from_partitions(raw, half, 1);
  rc.pilot_fraction = 1.0;
  CHECK_THROWS_AS(run_pilot(sampled, builtin_pipeline("synth"), rc, 1), UsageError);
}

TEST_CASE("full rates predict zero bounds") {
  const auto s = synth_pilot(50, 3);
  for (double b : predict_bounds(s, 1.0, 1.0, ConfidenceSpec{})) CHECK(b == 0.0);
}

TEST_CASE("predicted bounds grow as rates shrink") {
  const auto s = synth_pilot(50, 4);
  const ConfidenceSpec spec;
  auto median = [&](double p1, double p2) {
    return empirical_quantile(predict_bounds(s, p1, p2, spec), 50);
  };
  double prev = 0.0;
  for (double p1 : {1.0, 0.8, 0.5, 0.3, 0.1}) {
    const double m = median(p1, 0.5);
    CHECK(m >= prev);
    prev = m;
  }
  prev = 0.0;
  for (double p2 : {1.0, 0.8, 0.5, 0.3, 0.1}) {
    const double m = median(0.5, p2);
    CHECK(m >= prev);
    prev = m;
  }
  CHECK_THROWS_AS(predict_bounds(s, 0.0, 1.0, spec), UsageError);
}

TEST_CASE("upper confidence limits raise the prediction") {
  const auto s = synth_pilot(50, 5);
  const auto low = predict_bounds(s, 0.5, 0.5, ConfidenceSpec{}, 0.5);
  const auto high = predict_bounds(s, 0.5, 0.5, ConfidenceSpec{}, 0.9);
  CHECK(empirical_quantile(high, 50) > empirical_quantile(low, 50));
  CHECK(variance_upper_factor(0.0, 0.9) == 1.0);
  CHECK(variance_upper_factor(10.0, 0.9) > 1.0);
}

TEST_CASE("rate search honours its targets") {
  const auto s = synth_pilot(50, 6);
  const ConfidenceSpec spec;
  RateSearchConfig rc;
  rc.pilot_fraction = 0.25;
  rc.step = 0.01;
  rc.min_rate = 0.01;
  const ErrorTargets targets{{{50.0, 0.05}, {90.0, 0.1}}};
  const auto choice = search_rates(s, targets, rc, spec);
  CHECK(choice.partition_rate <= 1.0);
  CHECK(choice.item_rate <= 1.0);
  REQUIRE(choice.predicted.size() == 2);
  for (const auto& p : choice.predicted) CHECK(p.predicted <= p.target);
  const auto bounds = predict_bounds(s, choice.partition_rate, choice.item_rate, spec,
                                     rc.pilot_confidence);
  CHECK(empirical_quantile(bounds, 50) <= 0.05);
  CHECK(empirical_quantile(bounds, 90) <= 0.1);
}

TEST_CASE("loose targets reach the minimum rate") {
  const auto s = synth_pilot(20, 7);
  RateSearchConfig rc;
  rc.pilot_fraction = 0.25;
  rc.step = 0.05;
  rc.min_rate = 0.05;
  const auto inf = std::numeric_limits<double>::infinity();
  const auto choice = search_rates(s, ErrorTargets{{{100.0, inf}}}, rc, ConfidenceSpec{});
  CHECK(choice.partition_rate == doctest::Approx(0.05));
  CHECK(choice.item_rate == doctest::Approx(0.05));
}

TEST_CASE("unattainable targets are reported") {
  const auto s = synth_pilot(20, 8);
  RateSearchConfig rc;
  rc.pilot_fraction = 0.25;
  try {
    search_rates(s, ErrorTargets{{{100.0, 0.0}}}, rc, ConfidenceSpec{});
    FAIL("expected InfeasibleTargets");
  } catch (const InfeasibleTargets& e) {
    CHECK(e.kind() == ErrorKind::Infeasible);
    CHECK(e.percentile() == 100.0);
    CHECK(e.target() == 0.0);
  }
}

TEST_CASE("tuning needs sum aggregation") {
  RateSearchConfig rc;
  CHECK_THROWS_AS(run_with_targets("/nonexistent", 4, builtin_pipeline("synth", {Aggregation::Mean}),
                                   ErrorTargets{{{50.0, 0.1}}}, rc, SamplingConfig{}, 1),
                  UsageError);
}

TEST_CASE("pilot intra-partition variance recovers the generator variance") {
  double total = 0.0;
  const int seeds = 20;
  for (int seed = 0; seed < seeds; ++seed) {
    SynthConfig sc;
    sc.keys = 5;
    sc.partitions = 20;
    sc.items_per_partition = 200;
    sc.value_dist = parse_value_distribution("normal(10,2)");
    sc.seed = static_cast<std::uint64_t>(seed);
    RateSearchConfig rc;
    rc.pilot_fraction = 0.5;
    const auto s = run_pilot(full_load(synth_partitions(sc), sc.seed), builtin_pipeline("synth"),
                             rc, 1);
    for (const auto& k : s.keys) {
      CHECK(k.intra_variance == doctest::Approx(4.0).epsilon(0.25));
      total += k.intra_variance;
    }
  }
  CHECK(total / (seeds * 5) == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("a single key gives a step-shaped bound distribution") {
  std::vector<std::vector<std::string>> raw;
  for (int p = 0; p < 10; ++p) raw.push_back({"k," + std::to_string(p + 1), "k,2", "k,5"});
  RateSearchConfig rc;
  rc.pilot_fraction = 0.5;
  const auto s = run_pilot(full_load(raw), builtin_pipeline("synth"), rc, 1);
  const auto bounds = predict_bounds(s, 0.5, 0.5, ConfidenceSpec{});
  REQUIRE(bounds.size() == 1);
  CHECK(bounds[0] > 0.0);
  for (double p : {1.0, 10.0, 50.0, 100.0}) CHECK(empirical_quantile(bounds, p) == bounds[0]);
}

TEST_CASE("tuned run with loose targets drops to the rate floor") {
  testing::TempDir dir;
  SynthConfig sc;
  sc.keys = 20;
  sc.partitions = 100;
  sc.items_per_partition = 200;
  sc.seed = 9;
  write_synth(sc, dir.path());
  RateSearchConfig rc;
  rc.pilot_fraction = 0.1;
  rc.step = 0.05;
  rc.min_rate = 0.05;
  SamplingConfig base;
  base.seed = 9;
  const auto run = run_with_targets(dir.path(), 100, builtin_pipeline("synth"),
                                    ErrorTargets{{{100.0, 10.0}}}, rc, base, 1);
  CHECK(run.choice.partition_rate == doctest::Approx(0.05));
  CHECK(run.choice.item_rate == doctest::Approx(0.05));
  CHECK(run.result.metadata.partition_rate == doctest::Approx(0.05));
  CHECK(run.pilot.pilot_partitions == 10);
  CHECK_THROWS_AS(run_with_targets(dir.path(), 100, builtin_pipeline("synth"),
                                   ErrorTargets{{{100.0, 0.0}}}, rc, base, 1),
                  InfeasibleTargets);
}
