#include <doctest.h>

#include <cmath>

#include "approxflow/dataset.hpp"
#include "approxflow/error.hpp"
#include "approxflow/pipeline.hpp"
#include "approxflow/synth.hpp"

using namespace approxflow;

namespace {

PartitionedDataset dataset(std::vector<std::vector<std::string>> raw, double p1 = 1.0,
                           double p2 = 1.0, std::uint64_t seed = 0) {
  SamplingConfig cfg;
  cfg.partition_rate = p1;
  cfg.item_rate = p2;
  cfg.seed = seed;
  return PartitionedDataset::from_partitions(std::move(raw), cfg, 1);
}

Record text(const std::string& s) { return Record{s}; }

}  // namespace

TEST_CASE("exact wordcount") {
  const auto ds = dataset({{"a a b"}});
  const auto exact = execute_exact(ds, builtin_pipeline("wordcount"));
  CHECK(exact == ExactResult{{"a", 2.0}, {"b", 1.0}});
  CHECK(execute_exact(dataset({{"x y x"}}), builtin_pipeline("wordcount")) ==
        ExactResult{{"x", 2.0}, {"y", 1.0}});
}

TEST_CASE("exact group-sum and cooccur") {
  const auto gs = execute_exact(dataset({{"x,y,1", "x,y,2"}, {"u,v,5"}}),
                                builtin_pipeline("group-sum"));
  CHECK(gs == ExactResult{{"u|v", 5.0}, {"x|y", 3.0}});

  const auto co = execute_exact(dataset({{"c,a,b"}}), builtin_pipeline("cooccur"));
  CHECK(co == ExactResult{{"a|b", 1.0}, {"a|c", 1.0}, {"b|c", 1.0}});
}

TEST_CASE("exact mean over synth records") {
  PipelineParams params;
  params.aggregation = Aggregation::Mean;
  const auto m = execute_exact(dataset({{"k,1", "k,3"}}), builtin_pipeline("synth", params));
  CHECK(m.at("k") == doctest::Approx(2.0));
}

TEST_CASE("unknown pipeline is a usage error") {
  CHECK_THROWS_AS(builtin_pipeline("pagerank"), UsageError);
}

TEST_CASE("full-rate execution matches exact execution for every built-in pipeline") {
  const std::vector<std::vector<std::string>> words = {
      {"the cat sat", "on the mat"}, {"the dog", "a cat and a dog"}, {"mat mat mat"}};
  const std::vector<std::vector<std::string>> tags = {
      {"a,b,c", "b,c"}, {"c,d", "a,d,b"}, {"e"}};
  const std::vector<std::vector<std::string>> edges = {
      {"x,y,1", "x,y,2.5"}, {"u,v,5", "x,y,-1"}, {"p,q,0.25"}};
  SynthConfig sc;
  sc.keys = 7;
  sc.partitions = 4;
  sc.items_per_partition = 30;
  sc.seed = 5;
  const auto synth = synth_partitions(sc);

  const std::vector<std::pair<std::string, std::vector<std::vector<std::string>>>> cases = {
      {"wordcount", words}, {"cooccur", tags}, {"group-sum", edges}, {"synth", synth}};
  for (const auto& [name, raw] : cases) {
    for (auto agg : {Aggregation::Sum, Aggregation::Mean}) {
      if (agg == Aggregation::Mean && name != "synth") continue;
      CAPTURE(name);
      const auto chain = builtin_pipeline(name, PipelineParams{agg});
      const auto ds = dataset(raw);
      const auto exact = execute_exact(ds, chain);
      const auto approx = execute(ds, chain);
      REQUIRE(approx.per_key.size() == exact.size());
      for (const auto& [key, value] : exact) {
        const auto& est = approx.per_key.at(key);
        CHECK(std::abs(est.tau_hat - value) <= 1e-9 * std::max(1.0, std::abs(value)));
        CHECK(est.epsilon == 0.0);
        CHECK(est.v_hat == 0.0);
      }
    }
  }
}

TEST_CASE("a key confined to a dropped partition is lost, the other is kept") {
  // With two partitions and rate 0.5 exactly one is kept.
  const auto ds = dataset({{"a b"}, {"b"}}, 0.5, 1.0, 3);
  const auto r = execute(ds, builtin_pipeline("wordcount"));
  CHECK(r.per_key.count("b") == 1);
  const bool kept_first = ds.partitions().front().original_index == 0;
  CHECK(r.per_key.count("a") == (kept_first ? 1u : 0u));
}

TEST_CASE("stage errors name the failing stage") {
  const auto ds = dataset({{"x,y,1", "broken"}});
  try {
    (void)execute(ds, builtin_pipeline("group-sum"));
    FAIL("expected a pipeline error");
  } catch (const PipelineError& e) {
    CHECK(e.stage() == "op[0] map(parse_edge)");
  }
  CHECK_THROWS_AS(execute_exact(ds, builtin_pipeline("group-sum")), PipelineError);
}

TEST_CASE("unkeyed final records are rejected") {
  TransformChain chain;
  chain.ops.emplace_back(FlatMapOp{"split", [](const Record& r) {
    std::vector<Record> out;
    out.push_back(r);
    return out;
  }});
  try {
    (void)execute(dataset({{"a"}}), chain);
    FAIL("expected a pipeline error");
  } catch (const PipelineError& e) {
    CHECK(e.stage() == "op[0] flatMap(split)");
  }
  CHECK_THROWS_AS(execute(dataset({{"a"}}), TransformChain{}), PipelineError);
}

TEST_CASE("chain validation") {
  TransformChain chain = builtin_pipeline("wordcount");
  chain.ops.emplace_back(SampleOp{1.5});
  CHECK_THROWS_AS(validate(chain), UsageError);
  TransformChain missing;
  missing.ops.emplace_back(MapOp{"nothing", {}});
  CHECK_THROWS_AS(validate(missing), UsageError);
  CHECK(describe(TransformOp{SampleOp{0.5}}) == "sample(0.5)");
  CHECK(stage_label(builtin_pipeline("wordcount"), 1) == "op[1] map(word_one)");
}

TEST_CASE("exact execution refuses sampled input or sample transforms") {
  CHECK_THROWS_AS(execute_exact(dataset({{"a"}, {"b"}}, 0.5), builtin_pipeline("wordcount")),
                  UsageError);
  TransformChain chain = builtin_pipeline("wordcount");
  chain.ops.insert(chain.ops.begin(), SampleOp{0.5});
  CHECK_THROWS_AS(execute_exact(dataset({{"a"}}), chain), UsageError);
}

TEST_CASE("a sample transform that empties a partition produces a warning") {
  TransformChain chain = builtin_pipeline("wordcount");
  chain.ops.insert(chain.ops.begin(), SampleOp{0.01});
  const auto r = execute(dataset({{"a"}, {"b"}, {"c"}}, 1.0, 1.0, 1), chain);
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("execution is deterministic across thread counts") {
  SynthConfig sc;
  sc.keys = 20;
  sc.partitions = 12;
  sc.items_per_partition = 200;
  const auto raw = synth_partitions(sc);
  SamplingConfig cfg;
  cfg.partition_rate = 0.5;
  cfg.item_rate = 0.5;
  cfg.seed = 8;
  const auto ds1 = PartitionedDataset::from_partitions(raw, cfg, 1);
  const auto ds4 = PartitionedDataset::from_partitions(raw, cfg, 4);
  const auto a = execute(ds1, builtin_pipeline("synth"), ExecOptions{1, false});
  const auto b = execute(ds4, builtin_pipeline("synth"), ExecOptions{4, false});
  REQUIRE(a.per_key.size() == b.per_key.size());
  for (const auto& [k, e] : a.per_key) {
    CHECK(e.tau_hat == b.per_key.at(k).tau_hat);
    CHECK(e.v_hat == b.per_key.at(k).v_hat);
  }
}

TEST_CASE("traced execution maps outputs to input records") {
  std::vector<Record> records{text("a b"), text("c")};
  std::vector<std::uint32_t> input_of;
  const auto out = run_chain_traced(records, builtin_pipeline("wordcount"), input_of);
  REQUIRE(out.size() == 3);
  CHECK(input_of == std::vector<std::uint32_t>{0, 0, 1});
}

TEST_CASE("a single sampled partition gives an unbounded interval") {
  SamplingConfig cfg;
  cfg.partition_rate = 0.25;
  cfg.seed = 3;
  const auto ds = PartitionedDataset::from_partitions(
      {{"k,1", "k,2"}, {"k,3"}, {"k,4", "k,5"}, {"k,6"}}, cfg, 1);
  const auto r = execute(ds, builtin_pipeline("synth"), ExecOptions{1, false});
  const auto& e = r.per_key.at("k");
  CHECK(e.n_level1 == 1);
  CHECK(e.degenerate);
  CHECK(e.epsilon_unbounded);
  CHECK(std::isinf(e.epsilon));
}
