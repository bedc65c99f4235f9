#include <doctest.h>

#include <cmath>
#include <numeric>

#include "approxflow/asrs.hpp"
#include "approxflow/error.hpp"
#include "approxflow/pipeline.hpp"
#include "approxflow/synth.hpp"

using namespace approxflow;

namespace {

// Stats with the given mean and sample standard deviation over `count` items.
KeyStratumStats stats_with(double mean, double sd, std::size_t count = 10) {
  KeyStratumStats s;
  s.count = count;
  s.mean = mean;
  s.m2 = sd * sd * static_cast<double>(count - 1);
  return s;
}

std::size_t sum(const std::vector<std::size_t>& v) {
  return std::accumulate(v.begin(), v.end(), std::size_t{0});
}

}  // namespace

TEST_CASE("running key statistics") {
  KeyStratumStats s;
  for (double v : {2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0}) s.add(v);
  CHECK(s.count == 8);
  CHECK(s.mean == doctest::Approx(5.0));
  CHECK(s.stddev() == doctest::Approx(std::sqrt(32.0 / 7.0)));
  CHECK(s.coefficient_of_variation() == doctest::Approx(std::sqrt(32.0 / 7.0) / 5.0));
  KeyStratumStats one;
  one.add(3.0);
  CHECK(one.coefficient_of_variation() == 0.0);
}

TEST_CASE("largest-remainder apportionment") {
  CHECK(apportion(std::vector<double>{1, 1, 1}, 10) == std::vector<std::size_t>{4, 3, 3});
  CHECK(apportion(std::vector<double>{1, 3}, 100) == std::vector<std::size_t>{25, 75});
  CHECK(apportion(std::vector<double>{0, 0}, 5) == std::vector<std::size_t>{3, 2});
}

TEST_CASE("allocation proportional to coefficient of variation") {
  const std::vector<KeyStratumStats> two{stats_with(1, 1), stats_with(1, 3)};
  CHECK(allocate(two, 100) == std::vector<std::size_t>{25, 75});

  const std::vector<KeyStratumStats> equal{stats_with(2, 1), stats_with(4, 2), stats_with(1, 0.5)};
  CHECK(allocate(equal, 30) == std::vector<std::size_t>{10, 10, 10});

  const std::vector<KeyStratumStats> flat{stats_with(3, 0), stats_with(1, 1), stats_with(1, 1)};
  const auto a = allocate(flat, 21);
  CHECK(a[0] == 1);
  CHECK(a[1] == 10);
  CHECK(a[2] == 10);
  CHECK(sum(a) == 21);

  const std::vector<KeyStratumStats> many(5, stats_with(1, 1));
  CHECK(allocate(many, 3) == std::vector<std::size_t>(5, 1));
}

TEST_CASE("first item of a key is always stored") {
  ReservoirState r(4);
  RandomStream rng(1, 0, stages::kReservoir);
  for (int i = 0; i < 100; ++i) r.admit({"big", static_cast<double>(i)}, rng);
  r.admit({"rare", 1.0}, rng);
  REQUIRE(r.find("rare") != nullptr);
  CHECK(r.find("rare")->items.size() == 1);
  CHECK(r.stored_total() <= 4);
}

TEST_CASE("one item per key with reservoir equal to the key count keeps everything") {
  ReservoirState r(10);
  RandomStream rng(2, 0, stages::kReservoir);
  for (int k = 0; k < 10; ++k) r.admit({"k" + std::to_string(k), 1.0 * k}, rng);
  CHECK(r.keys_seen() == 10);
  CHECK(r.stored_total() == 10);
}

TEST_CASE("allocations sum to the reservoir size after reallocation") {
  ReservoirState r(50, 16);
  RandomStream rng(3, 0, stages::kReservoir);
  RandomStream data(4, 0, 0);
  for (int i = 0; i < 2000; ++i) {
    const std::string key = "k" + std::to_string(data.below(7));
    r.admit({key, data.uniform() * (1 + key.back() - '0')}, rng);
    if ((i + 1) % 16 == 0) {
      CHECK(r.allocated_total() == 50);
    }
    CHECK(r.stored_total() <= 50);
    for (const auto& s : r.strata()) CHECK(s.items.size() <= s.allocation);
  }
}

TEST_CASE("constant stream inclusion frequencies are uniform") {
  const int length = 12, slots = 4, seeds = 3000;
  std::vector<int> hits(length, 0);
  for (int s = 0; s < seeds; ++s) {
    ReservoirState r(slots);
    RandomStream rng(s, 0, stages::kReservoir);
    for (int i = 0; i < length; ++i) r.admit({"k", static_cast<double>(i)}, rng);
    REQUIRE(r.find("k")->items.size() == slots);
    for (double v : r.find("k")->items) ++hits[static_cast<int>(v)];
  }
  const double p = static_cast<double>(slots) / length;
  const double sd = std::sqrt(seeds * p * (1 - p));
  for (int h : hits) CHECK(std::abs(h - seeds * p) <= 4.0 * sd);
}

TEST_CASE("rare key gets a larger sampled fraction once reallocation engages") {
  double rare_frac = 0.0, big_frac = 0.0;
  const int seeds = 30;
  for (int s = 0; s < seeds; ++s) {
    ReservoirState r(100, 64);
    RandomStream rng(s, 1, stages::kReservoir);
    RandomStream data(s, 2, 0);
    for (int i = 0; i < 20000; ++i) {
      const bool rare = data.uniform() < 0.01;
      const double v = rare ? 10.0 * data.uniform() : 100.0 + data.uniform();
      r.admit({rare ? "rare" : "big", v}, rng);
    }
    const auto* rare = r.find("rare");
    const auto* big = r.find("big");
    rare_frac += static_cast<double>(rare->items.size()) / static_cast<double>(rare->stats.count);
    big_frac += static_cast<double>(big->items.size()) / static_cast<double>(big->stats.count);
  }
  CHECK(rare_frac > big_frac);
}

TEST_CASE("reservoir larger than every key stream keeps everything") {
  SamplingConfig cfg;
  const auto ds = PartitionedDataset::from_partitions(
      {{"a,1", "a,3"}, {"b,2", "b,4"}, {"c,5"}}, cfg, 1);
  const auto sample = asrs_transform(ds, builtin_pipeline("synth"), 300, 1);
  REQUIRE(sample.partitions.size() == 3);
  CHECK(sample.partitions[0].state.total_size() == 100);
  CHECK(sample.stored_total() == 5);
  const auto est = stratified_estimate(sample, ConfidenceSpec{});
  CHECK(est.at("a").tau_hat == 4.0);
  CHECK(est.at("b").tau_hat == 6.0);
  CHECK(est.at("c").tau_hat == 5.0);
  for (const auto& [k, e] : est) CHECK(e.epsilon == 0.0);
}

TEST_CASE("stratified reservoir preconditions") {
  SamplingConfig cfg;
  cfg.item_rate = 0.5;
  const auto sampled = PartitionedDataset::from_partitions({{"a,1", "b,2"}}, cfg, 1);
  CHECK_THROWS_AS(asrs_transform(sampled, builtin_pipeline("synth"), 10), UsageError);
  const auto full = PartitionedDataset::from_partitions({{"a,1"}, {"b,2"}, {"c,3"}},
                                                        SamplingConfig{}, 1);
  CHECK_THROWS_AS(asrs_transform(full, builtin_pipeline("synth"), 2), UsageError);
  TransformChain with_sample = builtin_pipeline("synth");
  with_sample.ops.emplace_back(SampleOp{0.5});
  CHECK_THROWS_AS(asrs_transform(full, with_sample, 30), UsageError);
}

TEST_CASE("stratified estimate coverage on a single key") {
  SynthConfig sc;
  sc.keys = 1;
  sc.partitions = 10;
  sc.items_per_partition = 1000;
  sc.seed = 21;
  SynthTruth truth;
  const auto raw = synth_partitions(sc, &truth);
  const double tau = truth.begin()->second.sum;
  int covered = 0;
  const int seeds = 400;
  for (int s = 0; s < seeds; ++s) {
    SamplingConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(s);
    const auto ds = PartitionedDataset::from_partitions(raw, cfg, 1);
    const auto est = stratified_estimate(asrs_transform(ds, builtin_pipeline("synth"), 1000, 1),
                                         ConfidenceSpec{0.95});
    const auto& e = est.begin()->second;
    covered += (e.ci_lo <= tau && tau <= e.ci_hi) ? 1 : 0;
  }
  const double coverage = static_cast<double>(covered) / seeds;
  CHECK(coverage >= 0.91);
  CHECK(coverage <= 0.98);
}
