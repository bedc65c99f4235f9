#include "approxflow/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <stdexcept>

#include "approxflow/error.hpp"
#include "approxflow/parallel.hpp"

namespace approxflow {
namespace {

// Applies one op to `in`. outputs[i] was produced by in[source[i]].
void apply_op(const TransformOp& op, const std::string& label, const std::vector<Record>& in,
              RandomStream* rng, std::vector<Record>& outputs,
              std::vector<std::uint32_t>& source) {
  outputs.clear();
  source.clear();
  try {
    switch (kind_of(op)) {
      case OpKind::Map: {
        const auto& fn = std::get<MapOp>(op).fn;
        outputs.reserve(in.size());
        for (std::uint32_t i = 0; i < in.size(); ++i) {
          outputs.push_back(fn(in[i]));
          source.push_back(i);
        }
        break;
      }
      case OpKind::FlatMap: {
        const auto& fn = std::get<FlatMapOp>(op).fn;
        for (std::uint32_t i = 0; i < in.size(); ++i) {
          for (auto& out : fn(in[i])) {
            outputs.push_back(std::move(out));
            source.push_back(i);
          }
        }
        break;
      }
      case OpKind::MapValues: {
        const auto& fn = std::get<MapValuesOp>(op).fn;
        outputs.reserve(in.size());
        for (std::uint32_t i = 0; i < in.size(); ++i) {
          const auto* kv = std::get_if<KeyValue>(&in[i]);
          if (kv == nullptr) throw std::invalid_argument("mapValues needs (key, value) records");
          outputs.emplace_back(KeyValue{kv->key, fn(kv->value)});
          source.push_back(i);
        }
        break;
      }
      case OpKind::Filter: {
        const auto& pred = std::get<FilterOp>(op).pred;
        for (std::uint32_t i = 0; i < in.size(); ++i) {
          if (pred(in[i])) {
            outputs.push_back(in[i]);
            source.push_back(i);
          }
        }
        break;
      }
      case OpKind::Sample: {
        if (rng == nullptr) throw UsageError("sample is not allowed on an exact path");
        const double rate = std::get<SampleOp>(op).rate;
        for (std::uint32_t i = 0; i < in.size(); ++i) {
          if (rng->bernoulli(rate)) {
            outputs.push_back(in[i]);
            source.push_back(i);
          }
        }
        break;
      }
    }
  } catch (const PipelineError&) {
    throw;
  } catch (const UsageError& e) {
    throw PipelineError(label, e.what());
  } catch (const std::exception& e) {
    throw PipelineError(label, e.what());
  }
}

std::string final_stage_label(const TransformChain& chain) {
  return chain.ops.empty() ? std::string("load") : stage_label(chain, chain.ops.size() - 1);
}

[[noreturn]] void throw_unkeyed(const TransformChain& chain) {
  throw PipelineError(final_stage_label(chain), "final records are not (key, value) pairs");
}

}  // namespace

AggregationResult execute(const PartitionedDataset& dataset, const TransformChain& chain,
                          const ExecOptions& options) {
  validate(chain);
  const SamplingConfig& cfg = dataset.load_config();
  const auto& partitions = dataset.partitions();

  std::vector<std::size_t> selected;
  for (const auto& p : partitions) selected.push_back(p.original_index);
  const TreeRoot root = init_tree(selected, cfg.partition_rate, cfg.item_rate);
  const LevelRates planned = plan_levels(chain, cfg.partition_rate, cfg.item_rate);

  std::vector<std::string> labels;
  for (std::size_t i = 0; i < chain.ops.size(); ++i) labels.push_back(stage_label(chain, i));

  const std::size_t d = planned.depth();
  std::vector<PartitionSummary> summaries(partitions.size());
  std::vector<std::vector<std::size_t>> node_counts(partitions.size());
  std::vector<std::vector<std::string>> warnings(partitions.size());
  std::vector<PartitionSubtree> kept(options.keep_tree ? partitions.size() : 0);

  parallel_for(partitions.size(), options.threads, [&](std::size_t slot) {
    const Partition& part = partitions[slot];
    SubtreeBuilder builder(part.original_index, part.records, cfg.partition_rate, cfg.item_rate);
    std::vector<Record> outputs;
    std::vector<std::uint32_t> source;
    for (std::size_t i = 0; i < chain.ops.size(); ++i) {
      const TransformOp& op = chain.ops[i];
      RandomStream rng(cfg.seed, part.original_index, stages::kTransformBase + i);
      const bool had_records = !builder.frontier().empty();
      apply_op(op, labels[i], builder.frontier(), &rng, outputs, source);
      const double rate = kind_of(op) == OpKind::Sample ? std::get<SampleOp>(op).rate : 1.0;
      builder.on_transform(kind_of(op), rate, std::move(outputs), source);
      outputs = {};
      const OpKind kind = kind_of(op);
      if (had_records && builder.frontier().empty() &&
          (kind == OpKind::Sample || kind == OpKind::Filter)) {
        warnings[slot].push_back("partition " + std::to_string(part.original_index) + ": " +
                                 labels[i] + " eliminated every record");
      }
    }
    if (builder.first_unkeyed() != builder.frontier().size()) throw_unkeyed(chain);
    if (!(builder.rates() == planned)) throw Error(ErrorKind::Internal, "level plan mismatch");

    PartitionSubtree subtree = builder.finalize();
    auto& counts = node_counts[slot];
    counts.assign(d + 1, 0);
    for (std::size_t level = 1; level <= d; ++level) counts[level] = subtree.nodes_at(level);
    summaries[slot] = summarize_partition(subtree, planned);
    if (options.keep_tree) kept[slot] = std::move(subtree);
  });

  AggregationResult result;
  const ConfidenceSpec spec{cfg.confidence};
  result.per_key =
      merge_partitions(summaries, dataset.origin_partition_count(), chain.final_stage, spec);

  RunMetadata& meta = result.metadata;
  meta.partition_rate = cfg.partition_rate;
  meta.item_rate = cfg.item_rate;
  meta.seed = cfg.seed;
  meta.confidence = cfg.confidence;
  meta.aggregation = chain.final_stage;
  meta.origin_partitions = dataset.origin_partition_count();
  meta.selected_partitions = root.partitions.size();
  meta.shape.rates = planned;
  meta.shape.nodes_per_level.assign(d + 1, 0);
  meta.shape.nodes_per_level[0] = 1;
  for (const auto& counts : node_counts) {
    for (std::size_t level = 1; level <= d; ++level) meta.shape.nodes_per_level[level] += counts[level];
  }
  for (auto& w : warnings) {
    for (auto& msg : w) result.warnings.push_back(std::move(msg));
  }
  if (options.keep_tree) {
    result.tree = ProvenanceTree{dataset.origin_partition_count(), planned, std::move(kept)};
  }
  return result;
}

std::vector<KeyValue> run_chain_traced(const std::vector<Record>& records,
                                       const TransformChain& chain,
                                       std::vector<std::uint32_t>& input_of) {
  std::vector<Record> current = records;
  input_of.resize(records.size());
  for (std::uint32_t i = 0; i < records.size(); ++i) input_of[i] = i;
  std::vector<Record> outputs;
  std::vector<std::uint32_t> source;
  for (std::size_t i = 0; i < chain.ops.size(); ++i) {
    apply_op(chain.ops[i], stage_label(chain, i), current, nullptr, outputs, source);
    std::vector<std::uint32_t> next(source.size());
    for (std::size_t j = 0; j < source.size(); ++j) next[j] = input_of[source[j]];
    input_of = std::move(next);
    current = std::move(outputs);
    outputs = {};
  }
  std::vector<KeyValue> out;
  out.reserve(current.size());
  for (auto& rec : current) {
    auto* kv = std::get_if<KeyValue>(&rec);
    if (kv == nullptr) throw_unkeyed(chain);
    out.push_back(std::move(*kv));
  }
  return out;
}

std::vector<KeyValue> run_chain_exact(const std::vector<Record>& records,
                                      const TransformChain& chain) {
  std::vector<std::uint32_t> unused;
  return run_chain_traced(records, chain, unused);
}

ExactResult execute_exact(const PartitionedDataset& dataset, const TransformChain& chain,
                          unsigned threads) {
  validate(chain);
  const SamplingConfig& cfg = dataset.load_config();
  if (cfg.partition_rate < 1.0 || cfg.item_rate < 1.0) {
    throw UsageError("exact execution needs a dataset loaded at rates (1, 1)");
  }
  if (has_sample(chain)) throw UsageError("exact execution does not allow sample transforms");

  struct Accum {
    double sum = 0.0;
    double count = 0.0;
  };
  const auto& partitions = dataset.partitions();
  std::vector<std::map<std::string, Accum>> local(partitions.size());
  parallel_for(partitions.size(), threads, [&](std::size_t slot) {
    for (const auto& kv : run_chain_exact(partitions[slot].records, chain)) {
      auto& a = local[slot][kv.key];
      a.sum += kv.value;
      a.count += 1.0;
    }
  });
  std::map<std::string, Accum> merged;
  for (const auto& part : local) {
    for (const auto& [key, a] : part) {
      auto& m = merged[key];
      m.sum += a.sum;
      m.count += a.count;
    }
  }
  ExactResult out;
  for (const auto& [key, a] : merged) {
    out.emplace(key, chain.final_stage == Aggregation::Sum ? a.sum : a.sum / a.count);
  }
  return out;
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

std::vector<std::string> split_fields(std::string_view line, bool commas) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (is_space(line[i]) || (commas && line[i] == ','))) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j]) && !(commas && line[j] == ',')) ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view text) {
  text = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  }
  return v;
}

const std::string& as_text(const Record& rec) {
  const auto* s = std::get_if<std::string>(&rec);
  if (s == nullptr) throw std::invalid_argument("expected a text record");
  return *s;
}

KeyValue parse_key_value(const Record& rec) {
  const std::string& line = as_text(rec);
  const auto comma = line.rfind(',');
  if (comma == std::string::npos) throw std::invalid_argument("expected 'key,value': " + line);
  const std::string_view key = trim(std::string_view(line).substr(0, comma));
  if (key.empty()) throw std::invalid_argument("empty key: " + line);
  return {std::string(key), parse_number(std::string_view(line).substr(comma + 1))};
}

}  // namespace

TransformChain builtin_pipeline(const std::string& name, const PipelineParams& params) {
  TransformChain chain;
  if (name == "wordcount") {
    chain.ops.emplace_back(FlatMapOp{"tokenize", [](const Record& rec) {
      std::vector<Record> words;
      for (auto& w : split_fields(as_text(rec), false)) words.emplace_back(std::move(w));
      return words;
    }});
    chain.ops.emplace_back(MapOp{"word_one", [](const Record& rec) -> Record {
      return KeyValue{as_text(rec), 1.0};
    }});
  } else if (name == "cooccur") {
    chain.ops.emplace_back(MapOp{"parse_tags", [](const Record& rec) -> Record {
      Tokens tags = split_fields(as_text(rec), true);
      std::sort(tags.begin(), tags.end());
      tags.erase(std::unique(tags.begin(), tags.end()), tags.end());
      return tags;
    }});
    chain.ops.emplace_back(FlatMapOp{"tag_pairs", [](const Record& rec) {
      const auto* tags = std::get_if<Tokens>(&rec);
      if (tags == nullptr) throw std::invalid_argument("expected a tag list");
      std::vector<Record> pairs;
      for (std::size_t i = 0; i < tags->size(); ++i) {
        for (std::size_t j = i + 1; j < tags->size(); ++j) {
          pairs.emplace_back(Tokens{(*tags)[i], (*tags)[j]});
        }
      }
      return pairs;
    }});
    chain.ops.emplace_back(MapOp{"pair_one", [](const Record& rec) -> Record {
      const auto* pair = std::get_if<Tokens>(&rec);
      if (pair == nullptr || pair->size() != 2) throw std::invalid_argument("expected a tag pair");
      return KeyValue{(*pair)[0] + "|" + (*pair)[1], 1.0};
    }});
  } else if (name == "group-sum") {
    chain.ops.emplace_back(MapOp{"parse_edge", [](const Record& rec) -> Record {
      const std::string& line = as_text(rec);
      const auto first = line.find(',');
      const auto second = first == std::string::npos ? first : line.find(',', first + 1);
      if (second == std::string::npos) {
        throw std::invalid_argument("expected 'src,dst,count': " + line);
      }
      const std::string_view view(line);
      const std::string_view src = trim(view.substr(0, first));
      const std::string_view dst = trim(view.substr(first + 1, second - first - 1));
      return KeyValue{std::string(src) + "|" + std::string(dst),
                      parse_number(view.substr(second + 1))};
    }});
  } else if (name == "synth") {
    chain.ops.emplace_back(MapOp{"parse_key_value", [](const Record& rec) -> Record {
      return parse_key_value(rec);
    }});
    chain.final_stage = params.aggregation;
  } else {
    throw UsageError("unknown pipeline '" + name +
                     "' (expected wordcount, cooccur, group-sum or synth)");
  }
  return chain;
}

}  // namespace approxflow
