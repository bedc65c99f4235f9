#include "approxflow/provenance.hpp"

#include <charconv>
#include <sstream>

#include "approxflow/error.hpp"

namespace approxflow {

std::size_t PartitionSubtree::nodes_at(std::size_t level) const {
  if (level == 1) return 1;
  if (level == depth()) return leaves.size();
  if (level >= 2 && level < depth()) return internal_parents[level - 2].size();
  return 0;
}

ProvenanceShape shape_of(const ProvenanceTree& tree) {
  ProvenanceShape shape;
  shape.rates = tree.rates;
  const std::size_t d = tree.depth();
  shape.nodes_per_level.assign(d + 1, 0);
  shape.nodes_per_level[0] = 1;
  for (const auto& part : tree.partitions) {
    for (std::size_t level = 1; level <= d; ++level) {
      shape.nodes_per_level[level] += part.nodes_at(level);
    }
  }
  return shape;
}

std::string render(const ProvenanceShape& shape) {
  std::ostringstream os;
  os << "depth " << shape.rates.depth() << '\n';
  for (std::size_t level = 0; level < shape.nodes_per_level.size(); ++level) {
    os << "level " << level << " nodes=" << shape.nodes_per_level[level];
    if (level > 0) {
      char buf[32];
      auto res = std::to_chars(buf, buf + sizeof buf, shape.rates.rate(level));
      os << " rate=" << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    os << '\n';
  }
  return os.str();
}

LevelTracker::LevelTracker(double partition_rate, double item_rate)
    : closed_{partition_rate}, base_rate_(item_rate) {}

void LevelTracker::add_level() {
  closed_.push_back(effective_rate());
  base_rate_ = 1.0;
  pending_rate_ = 1.0;
}

LevelRates LevelTracker::rates() const {
  LevelRates out{closed_};
  out.rate_by_level.push_back(effective_rate());
  return out;
}

OpKind kind_of(const TransformOp& op) {
  switch (op.index()) {
    case 0: return OpKind::Map;
    case 1: return OpKind::FlatMap;
    case 2: return OpKind::MapValues;
    case 3: return OpKind::Filter;
    default: return OpKind::Sample;
  }
}

LevelRates plan_levels(const TransformChain& chain, double partition_rate, double item_rate) {
  LevelTracker tracker(partition_rate, item_rate);
  for (const auto& op : chain.ops) {
    if (const auto* s = std::get_if<SampleOp>(&op)) {
      tracker.on_sample(s->rate);
    } else if (kind_of(op) == OpKind::FlatMap && tracker.flat_map_adds_level()) {
      tracker.add_level();
    }
  }
  return tracker.rates();
}

TreeRoot init_tree(std::span<const std::size_t> selected_partitions, double partition_rate,
                   double item_rate) {
  if (selected_partitions.empty()) {
    throw UsageError("provenance tree needs at least one selected partition");
  }
  return TreeRoot{{selected_partitions.begin(), selected_partitions.end()},
                  LevelRates{{partition_rate, item_rate}}};
}

SubtreeBuilder::SubtreeBuilder(std::size_t original_index, std::vector<Record> items,
                               double partition_rate, double item_rate)
    : original_index_(original_index),
      tracker_(partition_rate, item_rate),
      frontier_(std::move(items)),
      frontier_parent_(frontier_.size(), 0) {}

namespace {

void check_grouping(OpKind kind, std::size_t inputs, std::size_t outputs,
                    std::span<const std::uint32_t> source) {
  if (source.size() != outputs) throw UsageError("provenance: outputs and sources differ in size");
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (source[i] >= inputs) throw UsageError("provenance: output source out of range");
    if (i > 0) {
      const bool strictly = kind != OpKind::FlatMap;
      if (strictly ? source[i] <= source[i - 1] : source[i] < source[i - 1]) {
        throw UsageError("provenance: outputs are not grouped by producing input");
      }
    }
  }
  if ((kind == OpKind::Map || kind == OpKind::MapValues) && outputs != inputs) {
    throw UsageError("provenance: map must produce exactly one output per input");
  }
}

}  // namespace

void SubtreeBuilder::on_transform(OpKind kind, double sample_rate, std::vector<Record> outputs,
                                  std::span<const std::uint32_t> source) {
  check_grouping(kind, frontier_.size(), outputs.size(), source);

  std::vector<std::uint32_t> parents(outputs.size());
  if (kind == OpKind::FlatMap && tracker_.flat_map_adds_level()) {
    // Every frontier record becomes a cluster of the records it produced.
    internal_parents_.push_back(std::move(frontier_parent_));
    for (std::size_t i = 0; i < outputs.size(); ++i) parents[i] = source[i];
    tracker_.add_level();
  } else {
    for (std::size_t i = 0; i < outputs.size(); ++i) parents[i] = frontier_parent_[source[i]];
    if (kind == OpKind::Sample) tracker_.on_sample(sample_rate);
  }
  frontier_ = std::move(outputs);
  frontier_parent_ = std::move(parents);
}

std::size_t SubtreeBuilder::first_unkeyed() const {
  for (std::size_t i = 0; i < frontier_.size(); ++i) {
    if (!std::holds_alternative<KeyValue>(frontier_[i])) return i;
  }
  return frontier_.size();
}

PartitionSubtree SubtreeBuilder::finalize() {
  if (first_unkeyed() != frontier_.size()) {
    throw UsageError("provenance: final records must be (key, value) pairs");
  }
  PartitionSubtree out;
  out.original_index = original_index_;
  out.internal_parents = std::move(internal_parents_);
  out.leaves.reserve(frontier_.size());
  for (auto& rec : frontier_) out.leaves.push_back(std::move(std::get<KeyValue>(rec)));
  out.leaf_parent = std::move(frontier_parent_);
  frontier_.clear();
  return out;
}

}  // namespace approxflow
