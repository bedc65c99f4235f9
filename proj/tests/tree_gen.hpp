// Random small provenance trees of depth 3 and their per-key oracle input.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "approxflow/provenance.hpp"
#include "approxflow/random.hpp"
#include "oracles.hpp"

namespace testing {

struct RandomTree3 {
  approxflow::ProvenanceTree tree;
  // key -> per selected partition -> per item holding the key -> leaf values
  std::map<std::string, std::vector<std::vector<std::vector<double>>>> by_key;
};

// Up to 4 partitions, 4 items per partition and 4 leaves per item; keys
// drawn from {a, b}; rates below 1 are chosen at random for levels 1..3.
inline RandomTree3 random_tree3(std::uint64_t seed) {
  approxflow::RandomStream rng(seed, 77, 0);
  RandomTree3 out;
  const std::size_t big_n = 2 + rng.below(5);           // 2..6 partitions in total
  const std::size_t n = 1 + rng.below(std::min<std::size_t>(big_n, 4));
  const double rates[] = {0.25, 0.5, 0.8, 1.0};
  const double p2 = rates[rng.below(4)];
  const double p3 = rates[rng.below(4)];
  out.tree.origin_partition_count = big_n;
  out.tree.rates.rate_by_level = {static_cast<double>(n) / static_cast<double>(big_n), p2, p3};

  const char* keys[] = {"a", "b"};
  for (const char* k : keys) out.by_key[k].assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    approxflow::PartitionSubtree sub;
    sub.original_index = i;
    const std::size_t items = 1 + rng.below(4);
    sub.internal_parents.push_back(std::vector<std::uint32_t>(items, 0));
    for (std::size_t j = 0; j < items; ++j) {
      std::map<std::string, std::vector<double>> leaves_of;
      const std::size_t leaves = 1 + rng.below(4);
      for (std::size_t l = 0; l < leaves; ++l) {
        const std::string key = keys[rng.below(2)];
        const double value = std::round(rng.uniform() * 200.0 - 50.0) / 4.0;
        sub.leaves.push_back({key, value});
        sub.leaf_parent.push_back(static_cast<std::uint32_t>(j));
        leaves_of[key].push_back(value);
      }
      for (auto& [key, vals] : leaves_of) out.by_key[key][i].push_back(vals);
    }
    out.tree.partitions.push_back(std::move(sub));
  }
  return out;
}

}  // namespace testing
