#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "approxflow/random.hpp"
#include "approxflow/transform.hpp"

namespace approxflow {

struct SamplingConfig {
  double partition_rate = 1.0;  // (0, 1]
  double item_rate = 1.0;       // (0, 1]
  std::uint64_t seed = 0;
  double confidence = 0.95;     // 1 - alpha, in (0, 1)

  /// Throws UsageError on out-of-range rates or confidence.
  void validate() const;
};

struct Partition {
  std::size_t original_index = 0;
  std::vector<Record> records;          // m_i sampled items, input order
  std::size_t original_item_count = 0;  // M_i before item sampling
};

/// Immutable partitioned input after load-time sampling.
class PartitionedDataset {
 public:
  /// Applies partition sampling and item sampling to raw partitions. Throws
  /// InputError when `raw` holds no lines at all.
  static PartitionedDataset from_partitions(std::vector<std::vector<std::string>> raw,
                                            const SamplingConfig& cfg,
                                            unsigned threads = 0);

  const std::vector<Partition>& partitions() const noexcept { return partitions_; }
  /// N: number of partitions before partition sampling.
  std::size_t origin_partition_count() const noexcept { return origin_partition_count_; }
  const SamplingConfig& load_config() const noexcept { return config_; }
  std::size_t sampled_item_count() const;
  std::size_t original_item_count() const;

 private:
  PartitionedDataset() = default;

  std::vector<Partition> partitions_;
  std::size_t origin_partition_count_ = 0;
  SamplingConfig config_;
};

/// Reads newline-delimited UTF-8 text into `requested_partitions` partitions.
///
/// A directory contributes one file per partition (files in name order,
/// merged round-robin when there are more files than partitions, padded with
/// empty partitions when there are fewer); names starting with '.' or '_' are
/// skipped. A single file is split into contiguous line ranges of near-equal
/// size. Empty lines are dropped and a trailing '\r' is stripped.
std::vector<std::vector<std::string>> read_text_partitions(const std::filesystem::path& path,
                                                           std::size_t requested_partitions);

PartitionedDataset load_text(const std::filesystem::path& path, std::size_t requested_partitions,
                             const SamplingConfig& cfg, unsigned threads = 0);

/// Simple random sample without replacement of max(1, round(total * rate))
/// indices out of [0, total), sorted ascending.
std::vector<std::size_t> sample_partition_indices(std::size_t total, double rate,
                                                  RandomStream& rng);

/// Fixed-count sample size used by sample_partition_indices.
std::size_t partition_sample_size(std::size_t total, double rate);

/// One-pass Bernoulli selection preserving order.
template <class T>
std::vector<T> sample_items(std::span<const T> items, double rate, RandomStream& rng) {
  std::vector<T> kept;
  if (rate >= 1.0) return {items.begin(), items.end()};
  kept.reserve(static_cast<std::size_t>(static_cast<double>(items.size()) * rate) + 1);
  for (const auto& item : items) {
    if (rng.bernoulli(rate)) kept.push_back(item);
  }
  return kept;
}

}  // namespace approxflow
