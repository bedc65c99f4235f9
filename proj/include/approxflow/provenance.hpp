#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "approxflow/transform.hpp"

namespace approxflow {

/// Sampling rate of every tree level: rate_by_level[k - 1] is the rate at
/// which level-k nodes were drawn from their parents (level 1 = partitions,
/// level 2 = input items, deeper levels come from flatMaps after sampling).
/// The size is the tree depth d.
struct LevelRates {
  std::vector<double> rate_by_level;

  std::size_t depth() const noexcept { return rate_by_level.size(); }
  double rate(std::size_t level) const { return rate_by_level.at(level - 1); }

  friend bool operator==(const LevelRates&, const LevelRates&) = default;
};

/// The part of the provenance tree below one partition node.
///
/// Internal levels are stored as parent-index arrays: internal_parents[j][i]
/// is the parent (at level j + 1) of node i at level j + 2. Level-2 nodes all
/// hang off the partition node, index 0. Leaves sit at level d and store only
/// the final (key, value); leaf_parent indexes the deepest internal level, or
/// is 0 when d = 2.
struct PartitionSubtree {
  std::size_t original_index = 0;
  std::vector<std::vector<std::uint32_t>> internal_parents;
  std::vector<KeyValue> leaves;
  std::vector<std::uint32_t> leaf_parent;

  std::size_t depth() const noexcept { return internal_parents.size() + 2; }
  /// Node count at `level` (1..depth()).
  std::size_t nodes_at(std::size_t level) const;
};

struct ProvenanceTree {
  std::size_t origin_partition_count = 0;  // N
  LevelRates rates;
  std::vector<PartitionSubtree> partitions;

  std::size_t depth() const noexcept { return rates.depth(); }
};

/// Per-level node totals; enough to render the tree shape without the tree.
struct ProvenanceShape {
  LevelRates rates;
  std::vector<std::size_t> nodes_per_level;  // index = level, 0..d

  friend bool operator==(const ProvenanceShape&, const ProvenanceShape&) = default;
};

ProvenanceShape shape_of(const ProvenanceTree& tree);

/// Text rendering used for golden tests:
///   depth 3
///   level 0 nodes=1
///   level 1 nodes=2 rate=0.5
///   ...
std::string render(const ProvenanceShape& shape);

/// Level bookkeeping shared by the tree builder and plan_levels.
class LevelTracker {
 public:
  LevelTracker(double partition_rate, double item_rate);

  void on_sample(double rate) { pending_rate_ *= rate; }
  /// Rate at which the current frontier was drawn from its parents.
  double effective_rate() const noexcept { return base_rate_ * pending_rate_; }
  double pending_rate() const noexcept { return pending_rate_; }
  bool flat_map_adds_level() const noexcept { return effective_rate() < 1.0; }
  void add_level();
  /// Level of the current frontier.
  std::size_t frontier_level() const noexcept { return closed_.size() + 1; }
  LevelRates rates() const;

 private:
  std::vector<double> closed_;  // rates of levels 1 .. frontier_level - 1
  double base_rate_;
  double pending_rate_ = 1.0;
};

/// Level structure a chain produces, without running it. Tree depth depends
/// only on the chain and the load-time rates, never on the data.
LevelRates plan_levels(const TransformChain& chain, double partition_rate, double item_rate);

/// Sequential prologue: root at level 0 and the selected partitions at level
/// 1. Throws UsageError when `selected_partitions` is empty.
struct TreeRoot {
  std::vector<std::size_t> partitions;
  LevelRates rates;  // [partition_rate, item_rate]
};
TreeRoot init_tree(std::span<const std::size_t> selected_partitions, double partition_rate,
                   double item_rate);

enum class OpKind { Map, FlatMap, MapValues, Filter, Sample };
OpKind kind_of(const TransformOp& op);

/// Builds one partition's subtree while its transform chain runs.
class SubtreeBuilder {
 public:
  SubtreeBuilder(std::size_t original_index, std::vector<Record> items, double partition_rate,
                 double item_rate);

  const std::vector<Record>& frontier() const noexcept { return frontier_; }
  std::size_t depth() const noexcept { return tracker_.frontier_level(); }
  double pending_rate() const noexcept { return tracker_.pending_rate(); }
  LevelRates rates() const { return tracker_.rates(); }

  /// Feeds the outputs of one transform. `source[i]` is the index of the
  /// frontier record that produced outputs[i]; it must be consistent with the
  /// op (one output per input for Map/MapValues, an increasing subset for
  /// Filter/Sample, nondecreasing for FlatMap). Throws UsageError otherwise.
  void on_transform(OpKind kind, double sample_rate, std::vector<Record> outputs,
                    std::span<const std::uint32_t> source);

  /// Moves the finished subtree out. Every frontier record must be a
  /// KeyValue; returns the index of the first offending record otherwise.
  PartitionSubtree finalize();
  /// Index of the first non-KeyValue frontier record, or frontier().size().
  std::size_t first_unkeyed() const;

 private:
  std::size_t original_index_;
  LevelTracker tracker_;
  std::vector<std::vector<std::uint32_t>> internal_parents_;
  std::vector<Record> frontier_;
  std::vector<std::uint32_t> frontier_parent_;
};

}  // namespace approxflow
