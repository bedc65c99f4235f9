#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "approxflow/dataset.hpp"
#include "approxflow/estimator.hpp"
#include "approxflow/provenance.hpp"
#include "approxflow/transform.hpp"

namespace approxflow {

struct ExecOptions {
  unsigned threads = 0;    // 0 = one worker per logical core
  bool keep_tree = false;  // retain the provenance tree in the result
};

struct RunMetadata {
  double partition_rate = 1.0;
  double item_rate = 1.0;
  std::uint64_t seed = 0;
  double confidence = 0.95;
  Aggregation aggregation = Aggregation::Sum;
  std::size_t origin_partitions = 0;    // N
  std::size_t selected_partitions = 0;  // n
  ProvenanceShape shape;                // depth d, level rates, node counts

  std::size_t depth() const noexcept { return shape.rates.depth(); }
};

struct AggregationResult {
  KeyEstimates per_key;
  RunMetadata metadata;
  std::vector<std::string> warnings;
  std::optional<ProvenanceTree> tree;  // only with ExecOptions::keep_tree

  std::size_t keys_present() const noexcept { return per_key.size(); }
};

/// Runs the chain on every partition while building its provenance subtree,
/// summarizes each subtree, and merges the summaries at the root.
AggregationResult execute(const PartitionedDataset& dataset, const TransformChain& chain,
                          const ExecOptions& options = {});

using ExactResult = std::map<std::string, double>;

/// Ground truth: requires a dataset loaded at rates (1, 1) and a chain
/// without Sample.
ExactResult execute_exact(const PartitionedDataset& dataset, const TransformChain& chain,
                          unsigned threads = 0);

/// Runs the chain on a partition's records without provenance. Sample ops are
/// not allowed. Throws PipelineError when final records are not keyed.
std::vector<KeyValue> run_chain_exact(const std::vector<Record>& records,
                                      const TransformChain& chain);

/// Like run_chain_exact, but also reports the index of the input record each
/// output descends from.
std::vector<KeyValue> run_chain_traced(const std::vector<Record>& records,
                                       const TransformChain& chain,
                                       std::vector<std::uint32_t>& input_of);

struct PipelineParams {
  Aggregation aggregation = Aggregation::Sum;  // synth only; others always sum
};

/// Built-in chains: "wordcount", "cooccur", "group-sum", "synth".
TransformChain builtin_pipeline(const std::string& name, const PipelineParams& params = {});

}  // namespace approxflow
