#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

namespace approxflow {

/// Final-stage payload: one (key, value) pair fed to the keyed aggregation.
struct KeyValue {
  std::string key;
  double value = 0.0;

  friend bool operator==(const KeyValue&, const KeyValue&) = default;
};

using Tokens = std::vector<std::string>;

/// A data item. Loaded records are text lines; transforms may turn them into
/// token lists or keyed numeric pairs.
using Record = std::variant<std::string, Tokens, KeyValue>;

struct MapOp {
  std::string name;
  std::function<Record(const Record&)> fn;
};

struct FlatMapOp {
  std::string name;
  std::function<std::vector<Record>(const Record&)> fn;
};

/// Applies `fn` to the value of a KeyValue record; the key is untouched.
struct MapValuesOp {
  std::string name;
  std::function<double(double)> fn;
};

struct FilterOp {
  std::string name;
  std::function<bool(const Record&)> pred;
};

/// Bernoulli sampling of the current records; rate in (0, 1).
struct SampleOp {
  double rate = 1.0;
};

/// One transform of a chain. Functions must be pure: they run concurrently on
/// different partitions.
using TransformOp = std::variant<MapOp, FlatMapOp, MapValuesOp, FilterOp, SampleOp>;

enum class Aggregation { Sum, Mean };

struct TransformChain {
  std::vector<TransformOp> ops;
  Aggregation final_stage = Aggregation::Sum;
};

/// "map(parse)", "sample(0.5)", ...
std::string describe(const TransformOp& op);
/// Stage label used in error messages: "op[2] flatMap(tokenize)".
std::string stage_label(const TransformChain& chain, std::size_t index);

/// Throws UsageError when a Sample rate lies outside (0, 1) or a function is
/// missing.
void validate(const TransformChain& chain);

bool has_sample(const TransformChain& chain);

const char* to_string(Aggregation agg);

}  // namespace approxflow
