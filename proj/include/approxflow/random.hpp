#pragma once

#include <cstdint>
#include <limits>

namespace approxflow {

/// Counter-based random stream keyed by (seed, stream, stage).
///
/// Each partition draws from its own stream, so results do not depend on
/// which worker thread ran the partition or in what order. Satisfies
/// UniformRandomBitGenerator.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t stage);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, bound). `bound` must be nonzero.
  std::uint64_t below(std::uint64_t bound);
  bool bernoulli(double p) { return p >= 1.0 || uniform() < p; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Stream ids reserved for draws that do not belong to one partition.
namespace streams {
inline constexpr std::uint64_t kPartitionSelection = 0xFFFF'FFFF'FFFF'0001ULL;
inline constexpr std::uint64_t kPilotSelection = 0xFFFF'FFFF'FFFF'0002ULL;
}  // namespace streams

/// Stage ids used with a partition's original index as the stream id.
namespace stages {
inline constexpr std::uint64_t kItemSampling = 1;
inline constexpr std::uint64_t kReservoir = 1000;
/// Stage of the i-th transform in a chain is kTransformBase + i.
inline constexpr std::uint64_t kTransformBase = 2;
}  // namespace stages

}  // namespace approxflow
