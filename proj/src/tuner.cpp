#include "approxflow/tuner.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

#include <boost/math/distributions/chi_squared.hpp>

#include "approxflow/parallel.hpp"
#include "approxflow/random.hpp"

namespace approxflow {

namespace {

std::string num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, const std::string& what) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end || text.empty()) {
    throw UsageError("bad " + what + ": '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace

void ErrorTargets::validate() const {
  if (targets.empty()) throw UsageError("at least one error-bound target is required");
  double prev = 0.0;
  for (const auto& t : targets) {
    if (!(t.percentile > 0.0 && t.percentile <= 100.0)) {
      throw UsageError("target percentile must lie in (0, 100]: " + num(t.percentile));
    }
    if (!(t.percentile > prev)) {
      throw UsageError("target percentiles must be strictly increasing");
    }
    if (std::isnan(t.max_relative_bound)) throw UsageError("target bound is not a number");
    prev = t.percentile;
  }
}

ErrorTarget parse_target(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw UsageError("target must look like P=B, got '" + text + "'");
  std::string_view sv(text);
  return {parse_double(sv.substr(0, eq), "target percentile"),
          parse_double(sv.substr(eq + 1), "target bound")};
}

void RateSearchConfig::validate() const {
  if (!(step > 0.0 && step <= pilot_fraction && pilot_fraction <= 1.0)) {
    throw UsageError("need 0 < step <= pilot fraction <= 1");
  }
  if (!(min_rate >= step && min_rate <= 1.0)) throw UsageError("need step <= min rate <= 1");
  if (!(pilot_confidence > 0.0 && pilot_confidence < 1.0)) {
    throw UsageError("pilot confidence must lie in (0, 1)");
  }
}

InfeasibleTargets::InfeasibleTargets(double percentile, double predicted, double target)
    : Error(ErrorKind::Infeasible, "target p" + num(percentile) + " <= " + num(target) +
                                       " cannot be met: predicted " + num(predicted) +
                                       " at rates (1, 1)"),
      percentile_(percentile),
      predicted_(predicted),
      target_(target) {}

double empirical_quantile(std::vector<double> values, double percentile) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double k = static_cast<double>(values.size());
  auto idx = static_cast<std::size_t>(std::ceil(percentile / 100.0 * k - 1e-9));
  idx = std::clamp<std::size_t>(idx, 1, values.size());
  return values[idx - 1];
}

namespace {

struct PartitionKeyPilot {
  double count = 0.0;  // items holding the key
  double total = 0.0;
  double mean = 0.0;   // of per-item totals
  double m2 = 0.0;
};

using PilotPartition = std::map<std::string, PartitionKeyPilot>;

PilotPartition pilot_partition(const Partition& part, const TransformChain& chain) {
  std::vector<std::uint32_t> input_of;
  const auto out = run_chain_traced(part.records, chain, input_of);
  // per-item totals of each key
  std::map<std::string, std::map<std::uint32_t, double>> item_totals;
  for (std::size_t i = 0; i < out.size(); ++i) item_totals[out[i].key][input_of[i]] += out[i].value;
  PilotPartition result;
  for (const auto& [key, items] : item_totals) {
    PartitionKeyPilot s;
    for (const auto& [item, y] : items) {
      s.count += 1.0;
      s.total += y;
      const double delta = y - s.mean;
      s.mean += delta / s.count;
      s.m2 += delta * (y - s.mean);
    }
    result.emplace(key, s);
  }
  return result;
}

}  // namespace

PilotStats run_pilot(const PartitionedDataset& full, const TransformChain& chain,
                     const RateSearchConfig& cfg, unsigned threads) {
  cfg.validate();
  validate(chain);
  if (has_sample(chain)) {
    throw UsageError("the tuner searches load-time rates only; remove sample transforms");
  }
  const SamplingConfig& load = full.load_config();
  if (load.partition_rate < 1.0 || load.item_rate < 1.0) {
    throw UsageError("pilot needs a dataset loaded at rates (1, 1)");
  }
  const std::size_t n_total = full.origin_partition_count();
  RandomStream rng(load.seed, streams::kPilotSelection, 0);
  const auto chosen = sample_partition_indices(n_total, cfg.pilot_fraction, rng);
  if (chosen.size() < 2) {
    throw UsageError("pilot fraction " + num(cfg.pilot_fraction) + " of " +
                     std::to_string(n_total) + " partitions selects fewer than 2 partitions");
  }

  std::vector<PilotPartition> per_partition(chosen.size());
  parallel_for(chosen.size(), threads, [&](std::size_t slot) {
    per_partition[slot] = pilot_partition(full.partitions()[chosen[slot]], chain);
  });

  std::map<std::string, std::vector<const PartitionKeyPilot*>> by_key;
  for (const auto& part : per_partition) {
    for (const auto& [key, s] : part) by_key[key].push_back(&s);
  }
  if (by_key.empty()) throw PipelineError("pilot", "no keyed output on the pilot partitions");

  PilotStats stats;
  stats.origin_partitions = n_total;
  stats.pilot_partitions = chosen.size();
  const double n_pilot = static_cast<double>(chosen.size());
  const double scale = static_cast<double>(n_total) / n_pilot;
  double all_items = 0.0;
  double top_items = 0.0;
  for (const auto& [key, parts] : by_key) {
    PilotKeyStats k;
    k.key = key;
    k.partitions_present = parts.size();
    double within_ss = 0.0;
    double within_df = 0.0;
    double item_sum = 0.0;
    ChildMoments totals;
    for (const auto* s : parts) {
      k.item_count += s->count;
      item_sum += s->total;
      within_ss += s->m2;
      within_df += s->count - 1.0;
      totals.add(s->total);
    }
    totals.add_zeros(chosen.size() - parts.size());
    k.population = k.item_count * scale;
    k.item_mean = item_sum / k.item_count;
    k.intra_degenerate = within_df < 1.0;
    k.intra_variance = k.intra_degenerate ? 0.0 : within_ss / within_df;
    k.inter_variance = totals.m2 / (n_pilot - 1.0);
    k.inter_degenerate = parts.size() < 2;
    k.total_estimate = static_cast<double>(n_total) * totals.mean;
    all_items += k.item_count;
    top_items = std::max(top_items, k.item_count);
    stats.keys.push_back(std::move(k));
  }

  PilotKeyStats& avg = stats.average;
  avg.key = "";
  std::size_t intra_keys = 0;
  for (const auto& k : stats.keys) {
    avg.item_count += k.item_count;
    avg.population += k.population;
    avg.inter_variance += k.inter_variance;
    avg.item_mean += k.item_mean;
    avg.total_estimate += k.total_estimate;
    avg.partitions_present += k.partitions_present;
    if (!k.intra_degenerate) {
      avg.intra_variance += k.intra_variance;
      ++intra_keys;
    }
  }
  const double nk = static_cast<double>(stats.keys.size());
  avg.item_count /= nk;
  avg.population /= nk;
  avg.inter_variance /= nk;
  avg.item_mean /= nk;
  avg.total_estimate /= nk;
  avg.partitions_present = static_cast<std::size_t>(
      std::llround(static_cast<double>(avg.partitions_present) / nk));
  avg.intra_degenerate = intra_keys == 0;
  if (intra_keys > 0) avg.intra_variance /= static_cast<double>(intra_keys);

  if (top_items > 0.5 * all_items && stats.keys.size() > 1) {
    stats.warnings.push_back(
        "pilot key counts are highly skewed (top key holds more than half of the items); "
        "predicted bounds assume evenly distributed keys");
  }
  return stats;
}

double variance_upper_factor(double df, double level) {
  if (!(df >= 1.0)) return 1.0;
  boost::math::chi_squared dist(df);
  return df / boost::math::quantile(dist, 1.0 - level);
}

namespace {

class CriticalCache {
 public:
  explicit CriticalCache(const ConfidenceSpec& spec) : spec_(spec) {}
  double operator()(std::size_t df) {
    if (df >= cache_.size()) cache_.resize(df + 1, -1.0);
    if (cache_[df] < 0.0) cache_[df] = spec_.critical(static_cast<double>(df));
    return cache_[df];
  }

 private:
  ConfidenceSpec spec_;
  std::vector<double> cache_;
};

struct UpperFactors {
  double inter = 1.0;
  double level = 0.5;
};

double predict_one(const PilotKeyStats& k, const PilotKeyStats& avg, double n_total, double n,
                   double n_pilot, double p2, const UpperFactors& upper,
                   CriticalCache& critical) {
  const double presence = static_cast<double>(k.partitions_present) / n_pilot;

  // expected key items per partition holding the key, and their sample size
  const double m_full = k.item_count / static_cast<double>(k.partitions_present);
  const double m = m_full * p2;
  double s_i2 = k.intra_degenerate ? avg.intra_variance : k.intra_variance;
  if (!k.intra_degenerate && p2 < 1.0) {
    s_i2 *= variance_upper_factor(k.item_count - static_cast<double>(k.partitions_present),
                                  upper.level);
  }
  double v_i = 0.0;
  if (p2 < 1.0 && m > 0.0) {
    v_i = product_variance(m_full, m * (1.0 - p2) / (p2 * p2), k.item_mean,
                           (1.0 - p2) * s_i2 / m);
  }
  // The run measures the spread of estimated partition totals, which carries
  // the item-sampling noise of the partitions holding the key.
  const double inter = n_total * (n_total - n) * (upper.inter * k.inter_variance + presence * v_i) / n;
  const double v = inter + n_total * presence * v_i;
  if (v <= 0.0) return 0.0;
  const auto n_level1 = static_cast<std::size_t>(std::llround(n * presence));
  if (n_level1 < 2) return std::numeric_limits<double>::infinity();
  if (k.total_estimate == 0.0) return std::numeric_limits<double>::infinity();
  return critical(n_level1 - 1) * std::sqrt(v) / std::abs(k.total_estimate);
}

std::vector<double> predict_cached(const PilotStats& stats, double p1, double p2,
                                   double pilot_confidence, CriticalCache& critical) {
  UpperFactors upper;
  upper.level = pilot_confidence;
  upper.inter = variance_upper_factor(static_cast<double>(stats.pilot_partitions) - 1.0,
                                      pilot_confidence);
  const double n_total = static_cast<double>(stats.origin_partitions);
  const double n = static_cast<double>(partition_sample_size(stats.origin_partitions, p1));
  const double n_pilot = static_cast<double>(stats.pilot_partitions);
  std::vector<double> out;
  out.reserve(stats.keys.size());
  for (const auto& k : stats.keys) {
    out.push_back(predict_one(k, stats.average, n_total, n, n_pilot, p2, upper, critical));
  }
  return out;
}

// Index of the first violated target, or targets.size().
std::size_t first_violation(const std::vector<double>& bounds, const ErrorTargets& targets,
                            std::vector<PredictedPoint>* points) {
  std::vector<double> sorted = bounds;
  std::sort(sorted.begin(), sorted.end());
  std::size_t bad = targets.targets.size();
  if (points) points->clear();
  for (std::size_t i = 0; i < targets.targets.size(); ++i) {
    const auto& t = targets.targets[i];
    const double q = empirical_quantile(sorted, t.percentile);
    if (points) points->push_back({t.percentile, q, t.max_relative_bound});
    if (!(q <= t.max_relative_bound) || t.max_relative_bound <= 0.0) {
      if (bad == targets.targets.size()) bad = i;
    }
  }
  return bad;
}

}  // namespace

std::vector<double> predict_bounds(const PilotStats& stats, double p1, double p2,
                                   const ConfidenceSpec& spec, double pilot_confidence) {
  if (!(p1 > 0.0 && p1 <= 1.0 && p2 > 0.0 && p2 <= 1.0)) {
    throw UsageError("rates must lie in (0, 1]");
  }
  CriticalCache critical(spec);
  return predict_cached(stats, p1, p2, pilot_confidence, critical);
}

RateChoice search_rates(const PilotStats& stats, const ErrorTargets& targets,
                        const RateSearchConfig& cfg, const ConfidenceSpec& spec) {
  targets.validate();
  cfg.validate();
  CriticalCache critical(spec);

  const auto steps_total = static_cast<long>(std::llround(1.0 / cfg.step));
  const auto min_steps = static_cast<long>(std::ceil(cfg.min_rate / cfg.step - 1e-9));
  auto rate_of = [&](long k) { return k >= steps_total ? 1.0 : static_cast<double>(k) * cfg.step; };
  auto feasible = [&](double p1, double p2) {
    const auto bounds = predict_cached(stats, p1, p2, cfg.pilot_confidence, critical);
    return first_violation(bounds, targets, nullptr) == targets.targets.size();
  };

  {
    std::vector<PredictedPoint> points;
    const auto bounds = predict_cached(stats, 1.0, 1.0, cfg.pilot_confidence, critical);
    const auto bad = first_violation(bounds, targets, &points);
    if (bad != targets.targets.size()) {
      throw InfeasibleTargets(points[bad].percentile, points[bad].predicted, points[bad].target);
    }
  }

  long k1 = steps_total;
  while (k1 - 1 >= min_steps && feasible(rate_of(k1 - 1), 1.0)) --k1;
  const double p1 = rate_of(k1);
  long k2 = steps_total;
  while (k2 - 1 >= min_steps && feasible(p1, rate_of(k2 - 1))) --k2;

  RateChoice choice;
  choice.partition_rate = p1;
  choice.item_rate = rate_of(k2);
  first_violation(predict_cached(stats, choice.partition_rate, choice.item_rate, cfg.pilot_confidence,
                                 critical), targets,
                  &choice.predicted);
  return choice;
}

TunedRun run_with_targets(const std::filesystem::path& input, std::size_t partitions,
                          const TransformChain& chain, const ErrorTargets& targets,
                          const RateSearchConfig& cfg, const SamplingConfig& base,
                          unsigned threads) {
  if (chain.final_stage != Aggregation::Sum) {
    throw UsageError("rate tuning supports sum aggregation only");
  }
  targets.validate();
  cfg.validate();
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();

  SamplingConfig full_cfg = base;
  full_cfg.partition_rate = 1.0;
  full_cfg.item_rate = 1.0;
  full_cfg.validate();
  const auto raw = read_text_partitions(input, partitions);

  TunedRun out;
  {
    const auto full = PartitionedDataset::from_partitions(raw, full_cfg, threads);
    out.pilot = run_pilot(full, chain, cfg, threads);
  }
  const ConfidenceSpec spec{base.confidence};
  out.choice = search_rates(out.pilot, targets, cfg, spec);
  const auto t1 = Clock::now();

  SamplingConfig run_cfg = base;
  run_cfg.partition_rate = out.choice.partition_rate;
  run_cfg.item_rate = out.choice.item_rate;
  const auto dataset = PartitionedDataset::from_partitions(raw, run_cfg, threads);
  out.result = execute(dataset, chain, ExecOptions{threads, false});
  for (const auto& w : out.pilot.warnings) out.result.warnings.push_back(w);
  const auto t2 = Clock::now();

  out.pilot_seconds = std::chrono::duration<double>(t1 - t0).count();
  out.run_seconds = std::chrono::duration<double>(t2 - t1).count();
  return out;
}

}  // namespace approxflow
