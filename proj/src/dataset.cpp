#include "approxflow/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "approxflow/error.hpp"
#include "approxflow/parallel.hpp"

namespace approxflow {
namespace fs = std::filesystem;

void SamplingConfig::validate() const {
  if (!(partition_rate > 0.0 && partition_rate <= 1.0)) {
    throw UsageError("partition rate must lie in (0, 1]");
  }
  if (!(item_rate > 0.0 && item_rate <= 1.0)) {
    throw UsageError("item rate must lie in (0, 1]");
  }
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw UsageError("confidence must lie in (0, 1)");
  }
}

std::size_t partition_sample_size(std::size_t total, double rate) {
  const auto n = static_cast<std::size_t>(std::llround(static_cast<double>(total) * rate));
  return std::clamp<std::size_t>(n, 1, total);
}

std::vector<std::size_t> sample_partition_indices(std::size_t total, double rate,
                                                  RandomStream& rng) {
  if (total == 0) throw UsageError("cannot sample partitions out of zero");
  const std::size_t n = partition_sample_size(total, rate);
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (n < total) {
    // Partial Fisher-Yates: the first n slots become the sample.
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(total - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

namespace {

void append_lines(const fs::path& file, std::vector<std::string>& out) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw InputError("cannot open " + file.string());
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(std::move(line));
  }
}

}  // namespace

std::vector<std::vector<std::string>> read_text_partitions(const fs::path& path,
                                                           std::size_t requested_partitions) {
  if (requested_partitions == 0) throw UsageError("requested partitions must be >= 1");
  std::error_code ec;
  if (!fs::exists(path, ec)) throw InputError("input path does not exist: " + path.string());

  std::vector<std::vector<std::string>> parts(requested_partitions);
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      const std::string name = entry.path().filename().string();
      if (name.empty() || name.front() == '.' || name.front() == '_') continue;
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (std::size_t f = 0; f < files.size(); ++f) {
      append_lines(files[f], parts[f % requested_partitions]);
    }
  } else {
    std::vector<std::string> lines;
    append_lines(path, lines);
    const std::size_t total = lines.size();
    for (std::size_t p = 0; p < requested_partitions; ++p) {
      const std::size_t begin = total * p / requested_partitions;
      const std::size_t end = total * (p + 1) / requested_partitions;
      parts[p].assign(std::make_move_iterator(lines.begin() + static_cast<std::ptrdiff_t>(begin)),
                      std::make_move_iterator(lines.begin() + static_cast<std::ptrdiff_t>(end)));
    }
  }
  return parts;
}

PartitionedDataset PartitionedDataset::from_partitions(std::vector<std::vector<std::string>> raw,
                                                       const SamplingConfig& cfg,
                                                       unsigned threads) {
  cfg.validate();
  if (raw.empty()) throw UsageError("at least one partition is required");
  const bool any = std::any_of(raw.begin(), raw.end(), [](const auto& p) { return !p.empty(); });
  if (!any) throw InputError("input is empty");

  PartitionedDataset ds;
  ds.config_ = cfg;
  ds.origin_partition_count_ = raw.size();

  RandomStream selection(cfg.seed, streams::kPartitionSelection, 0);
  const auto chosen = sample_partition_indices(raw.size(), cfg.partition_rate, selection);
  ds.partitions_.resize(chosen.size());

  parallel_for(chosen.size(), threads, [&](std::size_t slot) {
    const std::size_t index = chosen[slot];
    auto& lines = raw[index];
    Partition& part = ds.partitions_[slot];
    part.original_index = index;
    part.original_item_count = lines.size();
    RandomStream rng(cfg.seed, index, stages::kItemSampling);
    part.records.reserve(cfg.item_rate >= 1.0
                             ? lines.size()
                             : static_cast<std::size_t>(static_cast<double>(lines.size()) *
                                                        cfg.item_rate) + 1);
    for (auto& line : lines) {
      if (rng.bernoulli(cfg.item_rate)) part.records.emplace_back(std::move(line));
    }
  });
  return ds;
}

std::size_t PartitionedDataset::sampled_item_count() const {
  std::size_t total = 0;
  for (const auto& p : partitions_) total += p.records.size();
  return total;
}

std::size_t PartitionedDataset::original_item_count() const {
  std::size_t total = 0;
  for (const auto& p : partitions_) total += p.original_item_count;
  return total;
}

PartitionedDataset load_text(const fs::path& path, std::size_t requested_partitions,
                             const SamplingConfig& cfg, unsigned threads) {
  cfg.validate();
  return PartitionedDataset::from_partitions(read_text_partitions(path, requested_partitions),
                                             cfg, threads);
}

}  // namespace approxflow
