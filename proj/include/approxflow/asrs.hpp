#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "approxflow/dataset.hpp"
#include "approxflow/estimator.hpp"
#include "approxflow/random.hpp"
#include "approxflow/transform.hpp"

namespace approxflow {

/// Single-pass running statistics of one key's values (Welford).
struct KeyStratumStats {
  std::size_t count = 0;  // |S_i(t)|: items of this key processed so far
  double mean = 0.0;
  double m2 = 0.0;

  void add(double y);
  /// Running sample standard deviation; 0 with fewer than two items.
  double stddev() const;
  /// sigma / |mean|; 0 when the mean is 0 or fewer than two items were seen.
  double coefficient_of_variation() const;
};

/// Splits `total` proportionally to `weights` with largest-remainder
/// rounding (ties go to the lower index). The result sums to `total`.
std::vector<std::size_t> apportion(std::span<const double> weights, std::size_t total);

/// Power allocation with q = 0: |r_i| = |r| cv_i / sum_k cv_k.
///
/// Keys with cv = 0 get the floor allocation of 1; if every cv is 0 the
/// reservoir is split evenly. Every key gets at least 1, so when there are
/// more keys than slots the allocations sum to the key count instead of
/// `total`.
std::vector<std::size_t> allocate(std::span<const KeyStratumStats> stats, std::size_t total);

struct Stratum {
  std::string key;
  KeyStratumStats stats;
  std::vector<double> items;  // stored values
  std::size_t allocation = 0;
};

/// Adaptive stratified reservoir of one partition.
class ReservoirState {
 public:
  static constexpr std::size_t kDefaultReallocationPeriod = 256;

  explicit ReservoirState(std::size_t total_size,
                          std::size_t reallocation_period = kDefaultReallocationPeriod);

  void admit(const KeyValue& item, RandomStream& rng);
  /// Re-runs allocate() over all strata and evicts from strata that now hold
  /// more than their allocation.
  void reallocate(RandomStream& rng);

  std::size_t total_size() const noexcept { return total_size_; }
  std::size_t keys_seen() const noexcept { return strata_.size(); }
  std::size_t admitted() const noexcept { return admitted_; }
  /// Strata in first-seen order.
  const std::vector<Stratum>& strata() const noexcept { return strata_; }
  const Stratum* find(const std::string& key) const;
  std::size_t allocated_total() const;
  std::size_t stored_total() const;

 private:
  void add_stratum(const KeyValue& item);
  void evict_excess(RandomStream& rng);

  std::size_t total_size_;
  std::size_t period_;
  std::size_t admitted_ = 0;
  std::vector<Stratum> strata_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct StratifiedPartition {
  std::size_t original_index = 0;
  ReservoirState state;
};

/// Output of the stratified reservoir stage.
struct StratifiedSample {
  std::size_t origin_partition_count = 0;  // N
  double partition_rate = 1.0;
  std::vector<StratifiedPartition> partitions;

  /// Reservoir contents of one partition as (key, value) records.
  std::vector<KeyValue> records(std::size_t slot) const;
  std::size_t stored_total() const;
};

/// Runs the chain (no Sample ops; dataset loaded with item rate 1) and feeds
/// its keyed output through one reservoir per partition. The reservoir total
/// is split evenly over the selected partitions; a share below 1 is a
/// UsageError.
StratifiedSample asrs_transform(const PartitionedDataset& dataset, const TransformChain& chain,
                                std::size_t reservoir_total, unsigned threads = 0,
                                std::size_t reallocation_period =
                                    ReservoirState::kDefaultReallocationPeriod);

/// Two-stage estimate per key: partitions at level 1 (N known), reservoir
/// contents at level 2 treated as an SRS of m_i out of the exact stream count
/// M_i.
KeyEstimates stratified_estimate(const StratifiedSample& sample, const ConfidenceSpec& spec,
                                 Aggregation aggregation = Aggregation::Sum);

}  // namespace approxflow
