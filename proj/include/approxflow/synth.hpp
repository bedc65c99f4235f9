#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace approxflow {

struct KeyDistribution {
  enum class Kind { Uniform, Zipf } kind = Kind::Uniform;
  double exponent = 1.0;  // zipf s > 0
};

struct ValueDistribution {
  enum class Kind { Uniform, Normal, Constant } kind = Kind::Uniform;
  double a = 0.0;  // uniform low, normal mean, constant value
  double b = 1.0;  // uniform high, normal sigma
};

/// "uniform" or "zipf(s)". Throws UsageError.
KeyDistribution parse_key_distribution(const std::string& text);
/// "uniform", "uniform(a,b)", "normal(mu,sigma)" or "constant(c)". Throws
/// UsageError.
ValueDistribution parse_value_distribution(const std::string& text);

std::string to_string(const KeyDistribution& d);
std::string to_string(const ValueDistribution& d);

struct SynthConfig {
  std::size_t keys = 100;
  std::size_t partitions = 10;
  std::size_t items_per_partition = 1000;
  KeyDistribution key_dist;
  ValueDistribution value_dist;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Key name of the 0-based rank: "k0001" for rank 0, zero-padded to at least
/// four digits.
std::string synth_key(std::size_t rank, std::size_t keys);

struct KeyTruth {
  std::size_t count = 0;
  double sum = 0.0;
};

/// Ground truth per key, in key order.
using SynthTruth = std::map<std::string, KeyTruth>;

/// Generated "key,value" lines of every partition. Deterministic in the
/// config. Key counts over the whole dataset are the largest-remainder
/// apportionment of the key distribution (so zipf frequencies are
/// nonincreasing in rank); items are shuffled across partitions and values
/// drawn per partition.
std::vector<std::vector<std::string>> synth_partitions(const SynthConfig& cfg,
                                                       SynthTruth* truth = nullptr);

/// Writes part-00000.txt ... and _manifest.json into `dir` (created if
/// missing).
SynthTruth write_synth(const SynthConfig& cfg, const std::filesystem::path& dir);

}  // namespace approxflow
