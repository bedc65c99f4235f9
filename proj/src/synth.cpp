#include "approxflow/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "approxflow/asrs.hpp"
#include "approxflow/error.hpp"
#include "approxflow/random.hpp"
#include "approxflow/report.hpp"

namespace approxflow {

namespace {

constexpr std::uint64_t kSynthShuffleStream = 0x5EED'0000'0000'0001ULL;

// Splits "name(a,b)" into name and arguments.
std::pair<std::string, std::vector<double>> parse_call(const std::string& text) {
  const auto open = text.find('(');
  if (open == std::string::npos) return {text, {}};
  if (text.back() != ')') throw UsageError("bad distribution '" + text + "'");
  std::vector<double> args;
  std::string inner = text.substr(open + 1, text.size() - open - 2);
  std::size_t start = 0;
  while (start <= inner.size()) {
    auto comma = inner.find(',', start);
    if (comma == std::string::npos) comma = inner.size();
    std::string part = inner.substr(start, comma - start);
    part.erase(0, part.find_first_not_of(' '));
    part.erase(part.find_last_not_of(' ') + 1);
    double v = 0.0;
    auto res = std::from_chars(part.data(), part.data() + part.size(), v);
    if (part.empty() || res.ec != std::errc() || res.ptr != part.data() + part.size() ||
        !std::isfinite(v)) {
      throw UsageError("bad distribution parameter '" + part + "' in '" + text + "'");
    }
    args.push_back(v);
    start = comma + 1;
  }
  return {text.substr(0, open), args};
}

}  // namespace

KeyDistribution parse_key_distribution(const std::string& text) {
  auto [name, args] = parse_call(text);
  if (name == "uniform" && args.empty()) return {};
  if (name == "zipf" && args.size() == 1) {
    if (!(args[0] > 0.0)) throw UsageError("zipf exponent must be positive");
    return {KeyDistribution::Kind::Zipf, args[0]};
  }
  throw UsageError("unknown key distribution '" + text + "' (uniform or zipf(s))");
}

ValueDistribution parse_value_distribution(const std::string& text) {
  auto [name, args] = parse_call(text);
  using K = ValueDistribution::Kind;
  if (name == "uniform" && args.empty()) return {K::Uniform, 0.0, 1.0};
  if (name == "uniform" && args.size() == 2) {
    if (!(args[0] < args[1])) throw UsageError("uniform(a,b) needs a < b");
    return {K::Uniform, args[0], args[1]};
  }
  if (name == "normal" && args.size() == 2) {
    if (!(args[1] >= 0.0)) throw UsageError("normal sigma must be nonnegative");
    return {K::Normal, args[0], args[1]};
  }
  if (name == "constant" && args.size() == 1) return {K::Constant, args[0], 0.0};
  throw UsageError("unknown value distribution '" + text +
                   "' (uniform, uniform(a,b), normal(mu,sigma), constant(c))");
}

std::string to_string(const KeyDistribution& d) {
  if (d.kind == KeyDistribution::Kind::Uniform) return "uniform";
  return "zipf(" + format_number(d.exponent) + ")";
}

std::string to_string(const ValueDistribution& d) {
  switch (d.kind) {
    case ValueDistribution::Kind::Uniform:
      return "uniform(" + format_number(d.a) + "," + format_number(d.b) + ")";
    case ValueDistribution::Kind::Normal:
      return "normal(" + format_number(d.a) + "," + format_number(d.b) + ")";
    case ValueDistribution::Kind::Constant:
      return "constant(" + format_number(d.a) + ")";
  }
  return "";
}

void SynthConfig::validate() const {
  if (keys == 0) throw UsageError("--keys must be at least 1");
  if (partitions == 0) throw UsageError("--partitions must be at least 1");
  if (items_per_partition == 0) throw UsageError("--items-per-partition must be at least 1");
}

std::string synth_key(std::size_t rank, std::size_t keys) {
  const std::size_t width = std::max<std::size_t>(4, std::to_string(keys).size());
  std::string digits = std::to_string(rank + 1);
  return "k" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

std::vector<std::vector<std::string>> synth_partitions(const SynthConfig& cfg, SynthTruth* truth) {
  cfg.validate();
  std::vector<double> weights(cfg.keys, 1.0);
  if (cfg.key_dist.kind == KeyDistribution::Kind::Zipf) {
    for (std::size_t r = 0; r < cfg.keys; ++r) {
      weights[r] = 1.0 / std::pow(static_cast<double>(r + 1), cfg.key_dist.exponent);
    }
  }
  // Exact key counts over the whole dataset, so frequencies never increase
  // with rank; the items are then shuffled across partitions.
  const std::size_t total = cfg.partitions * cfg.items_per_partition;
  const auto counts = apportion(weights, total);
  std::vector<std::uint32_t> ranks;
  ranks.reserve(total);
  for (std::size_t r = 0; r < cfg.keys; ++r) {
    ranks.insert(ranks.end(), counts[r], static_cast<std::uint32_t>(r));
  }
  RandomStream shuffle_rng(cfg.seed, kSynthShuffleStream, 0);
  for (std::size_t i = ranks.size(); i > 1; --i) {
    std::swap(ranks[i - 1], ranks[static_cast<std::size_t>(shuffle_rng.below(i))]);
  }

  std::vector<std::string> names(cfg.keys);
  for (std::size_t r = 0; r < cfg.keys; ++r) names[r] = synth_key(r, cfg.keys);

  std::vector<std::vector<std::string>> out(cfg.partitions);
  for (std::size_t p = 0; p < cfg.partitions; ++p) {
    RandomStream rng(cfg.seed, p, 0);
    auto& lines = out[p];
    lines.reserve(cfg.items_per_partition);
    for (std::size_t i = 0; i < cfg.items_per_partition; ++i) {
      const std::size_t rank = ranks[p * cfg.items_per_partition + i];
      double value = 0.0;
      const ValueDistribution& vd = cfg.value_dist;
      switch (vd.kind) {
        case ValueDistribution::Kind::Uniform:
          value = vd.a + (vd.b - vd.a) * rng.uniform();
          break;
        case ValueDistribution::Kind::Normal: {
          const double u1 = 1.0 - rng.uniform();
          const double u2 = rng.uniform();
          value = vd.a + vd.b * std::sqrt(-2.0 * std::log(u1)) *
                             std::cos(2.0 * std::numbers::pi * u2);
          break;
        }
        case ValueDistribution::Kind::Constant:
          value = vd.a;
          break;
      }
      lines.push_back(names[rank] + "," + format_number(value));
      if (truth) {
        auto& t = (*truth)[names[rank]];
        ++t.count;
        t.sum += value;
      }
    }
  }
  return out;
}

SynthTruth write_synth(const SynthConfig& cfg, const std::filesystem::path& dir) {
  SynthTruth truth;
  const auto parts = synth_partitions(cfg, &truth);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("cannot create " + dir.string() + ": " + ec.message());

  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  for (std::size_t p = 0; p < parts.size(); ++p) {
    char name[32];
    std::snprintf(name, sizeof name, "part-%05zu.txt", p);
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + (dir / name).string());
    for (const auto& line : parts[p]) out << line << '\n';
    files.push_back(name);
  }

  nlohmann::ordered_json m;
  m["schema"] = "approxflow.synth/1";
  m["params"] = {{"keys", cfg.keys},
                 {"partitions", cfg.partitions},
                 {"items_per_partition", cfg.items_per_partition},
                 {"distribution", to_string(cfg.key_dist)},
                 {"value_dist", to_string(cfg.value_dist)},
                 {"seed", cfg.seed}};
  m["files"] = files;
  nlohmann::ordered_json keys = nlohmann::ordered_json::object();
  for (const auto& [k, t] : truth) keys[k] = {{"count", t.count}, {"sum", t.sum}};
  m["truth"] = keys;
  std::ofstream out(dir / "_manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write manifest in " + dir.string());
  out << m.dump(2) << '\n';
  return truth;
}

}  // namespace approxflow
