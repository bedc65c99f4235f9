#include "approxflow/asrs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "approxflow/error.hpp"
#include "approxflow/parallel.hpp"
#include "approxflow/pipeline.hpp"

namespace approxflow {

void KeyStratumStats::add(double y) {
  ++count;
  const double delta = y - mean;
  mean += delta / static_cast<double>(count);
  m2 += delta * (y - mean);
}

double KeyStratumStats::stddev() const {
  if (count < 2) return 0.0;
  return std::sqrt(std::max(0.0, m2 / static_cast<double>(count - 1)));
}

double KeyStratumStats::coefficient_of_variation() const {
  if (count < 2 || mean == 0.0) return 0.0;
  return stddev() / std::abs(mean);
}

std::vector<std::size_t> apportion(std::span<const double> weights, std::size_t total) {
  const std::size_t k = weights.size();
  std::vector<std::size_t> out(k, 0);
  if (k == 0) return out;
  double sum = 0.0;
  for (double w : weights) sum += std::max(0.0, w);
  std::vector<double> quota(k);
  for (std::size_t i = 0; i < k; ++i) {
    quota[i] = sum > 0.0 ? static_cast<double>(total) * std::max(0.0, weights[i]) / sum
                         : static_cast<double>(total) / static_cast<double>(k);
  }
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    out[i] = static_cast<std::size_t>(std::floor(quota[i]));
    assigned += out[i];
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return quota[a] - std::floor(quota[a]) > quota[b] - std::floor(quota[b]);
  });
  for (std::size_t r = 0; assigned < total && r < k; ++r, ++assigned) ++out[order[r]];
  return out;
}

namespace {

// Raises zero allocations to 1, taking each unit from the largest allocation
// that can spare one.
void enforce_floor(std::vector<std::size_t>& alloc) {
  for (auto& a : alloc) {
    if (a != 0) continue;
    auto donor = std::max_element(alloc.begin(), alloc.end());
    if (*donor > 1) --*donor;
    a = 1;
  }
}

}  // namespace

std::vector<std::size_t> allocate(std::span<const KeyStratumStats> stats, std::size_t total) {
  const std::size_t k = stats.size();
  if (k == 0) return {};
  if (total <= k) return std::vector<std::size_t>(k, 1);

  std::vector<double> cv(k);
  std::size_t zero_cv = 0;
  for (std::size_t i = 0; i < k; ++i) {
    cv[i] = stats[i].coefficient_of_variation();
    if (cv[i] <= 0.0) ++zero_cv;
  }
  std::vector<std::size_t> alloc;
  if (zero_cv == k) {
    alloc = apportion(std::vector<double>(k, 1.0), total);
  } else {
    alloc = apportion(cv, total - zero_cv);
    for (std::size_t i = 0; i < k; ++i) {
      if (cv[i] <= 0.0) alloc[i] = 1;
    }
  }
  enforce_floor(alloc);
  return alloc;
}

ReservoirState::ReservoirState(std::size_t total_size, std::size_t reallocation_period)
    : total_size_(total_size), period_(reallocation_period) {
  if (total_size_ == 0) throw UsageError("reservoir size must be >= 1");
}

const Stratum* ReservoirState::find(const std::string& key) const {
  auto it = index_.find(key);
  return it == index_.end() ? nullptr : &strata_[it->second];
}

std::size_t ReservoirState::allocated_total() const {
  std::size_t total = 0;
  for (const auto& s : strata_) total += s.allocation;
  return total;
}

std::size_t ReservoirState::stored_total() const {
  std::size_t total = 0;
  for (const auto& s : strata_) total += s.items.size();
  return total;
}

void ReservoirState::add_stratum(const KeyValue& item) {
  std::size_t initial = total_size_;
  if (!strata_.empty()) {
    std::vector<double> current;
    std::size_t sum = 0;
    for (const auto& s : strata_) {
      current.push_back(static_cast<double>(s.allocation));
      sum += s.allocation;
    }
    const double average = static_cast<double>(sum) / static_cast<double>(strata_.size());
    initial = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(average)));
    const std::size_t budget = total_size_ > initial ? total_size_ - initial : 0;
    auto shrunk = apportion(current, budget);
    enforce_floor(shrunk);
    for (std::size_t i = 0; i < strata_.size(); ++i) strata_[i].allocation = shrunk[i];
  }
  Stratum s;
  s.key = item.key;
  s.allocation = initial;
  s.stats.add(item.value);
  s.items.push_back(item.value);
  index_.emplace(item.key, strata_.size());
  strata_.push_back(std::move(s));
}

void ReservoirState::evict_excess(RandomStream& rng) {
  for (auto& s : strata_) {
    while (s.items.size() > s.allocation) {
      const auto victim = static_cast<std::size_t>(rng.below(s.items.size()));
      s.items[victim] = s.items.back();
      s.items.pop_back();
    }
  }
}

void ReservoirState::admit(const KeyValue& item, RandomStream& rng) {
  ++admitted_;
  auto it = index_.find(item.key);
  if (it == index_.end()) {
    add_stratum(item);
    evict_excess(rng);
  } else {
    Stratum& s = strata_[it->second];
    s.stats.add(item.value);
    if (s.items.size() < s.allocation) {
      s.items.push_back(item.value);
    } else {
      const auto slot = static_cast<std::size_t>(rng.below(s.stats.count));
      if (slot < s.items.size()) s.items[slot] = item.value;
    }
  }
  if (period_ != 0 && admitted_ % period_ == 0) reallocate(rng);
}

void ReservoirState::reallocate(RandomStream& rng) {
  std::vector<KeyStratumStats> stats;
  stats.reserve(strata_.size());
  for (const auto& s : strata_) stats.push_back(s.stats);
  const auto alloc = allocate(stats, total_size_);
  for (std::size_t i = 0; i < strata_.size(); ++i) strata_[i].allocation = alloc[i];
  evict_excess(rng);
}

std::vector<KeyValue> StratifiedSample::records(std::size_t slot) const {
  std::vector<KeyValue> out;
  for (const auto& s : partitions.at(slot).state.strata()) {
    for (double v : s.items) out.push_back({s.key, v});
  }
  return out;
}

std::size_t StratifiedSample::stored_total() const {
  std::size_t total = 0;
  for (const auto& p : partitions) total += p.state.stored_total();
  return total;
}

StratifiedSample asrs_transform(const PartitionedDataset& dataset, const TransformChain& chain,
                                std::size_t reservoir_total, unsigned threads,
                                std::size_t reallocation_period) {
  validate(chain);
  if (has_sample(chain)) throw UsageError("stratified reservoir sampling excludes sample transforms");
  const SamplingConfig& cfg = dataset.load_config();
  if (cfg.item_rate < 1.0) {
    throw UsageError("stratified reservoir sampling needs item rate 1 (it observes every item)");
  }
  const auto& parts = dataset.partitions();
  const std::size_t share = reservoir_total / parts.size();
  if (share < 1) {
    throw UsageError("reservoir size " + std::to_string(reservoir_total) +
                     " gives less than one slot per partition");
  }

  StratifiedSample out;
  out.origin_partition_count = dataset.origin_partition_count();
  out.partition_rate = cfg.partition_rate;
  out.partitions.reserve(parts.size());
  for (const auto& p : parts) {
    out.partitions.push_back({p.original_index, ReservoirState(share, reallocation_period)});
  }
  parallel_for(parts.size(), threads, [&](std::size_t slot) {
    RandomStream rng(cfg.seed, parts[slot].original_index, stages::kReservoir);
    auto& state = out.partitions[slot].state;
    for (const auto& kv : run_chain_exact(parts[slot].records, chain)) state.admit(kv, rng);
  });
  return out;
}

KeyEstimates stratified_estimate(const StratifiedSample& sample, const ConfidenceSpec& spec,
                                 Aggregation aggregation) {
  std::vector<PartitionSummary> summaries;
  summaries.reserve(sample.partitions.size());
  for (const auto& part : sample.partitions) {
    PartitionSummary summary;
    for (const auto& s : part.state.strata()) {
      ChildMoments totals;
      ChildMoments counts;
      for (double v : s.items) {
        totals.add(v);
        counts.add(1.0);
      }
      const PopulationEstimate stream = known_population(static_cast<double>(s.stats.count));
      summary.emplace_back(s.key, PartitionKeyStats{combine_level(totals, stream),
                                                    combine_level(counts, stream)});
    }
    std::sort(summary.begin(), summary.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    summaries.push_back(std::move(summary));
  }
  return merge_partitions(summaries, sample.origin_partition_count, aggregation, spec);
}

}  // namespace approxflow
