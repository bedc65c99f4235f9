#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "approxflow/dataset.hpp"
#include "approxflow/error.hpp"
#include "approxflow/estimator.hpp"
#include "approxflow/pipeline.hpp"
#include "approxflow/transform.hpp"

namespace approxflow {

struct ErrorTarget {
  double percentile = 50.0;          // (0, 100]
  double max_relative_bound = 0.1;
};

/// Targets on the CDF of per-key relative bounds.
struct ErrorTargets {
  std::vector<ErrorTarget> targets;

  /// Throws UsageError when empty or when percentiles are outside (0, 100]
  /// or not strictly increasing. Nonpositive bounds are accepted here and
  /// reported as infeasible by search_rates.
  void validate() const;
};

/// Parses "P=B", e.g. "90=0.2". Throws UsageError.
ErrorTarget parse_target(const std::string& text);

struct RateSearchConfig {
  double pilot_fraction = 0.10;
  double step = 0.001;
  double min_rate = 0.001;
  /// One-sided level of the chi-square upper limits applied to pilot
  /// variances before prediction; 0.5 uses the median-unbiased value.
  double pilot_confidence = 0.75;

  /// Throws UsageError unless 0 < step <= pilot_fraction <= 1,
  /// step <= min_rate <= 1 and 0 < pilot_confidence < 1.
  void validate() const;
};

/// Targets cannot be met even at rates (1, 1).
class InfeasibleTargets : public Error {
 public:
  InfeasibleTargets(double percentile, double predicted, double target);

  double percentile() const noexcept { return percentile_; }
  double predicted() const noexcept { return predicted_; }
  double target() const noexcept { return target_; }

 private:
  double percentile_;
  double predicted_;
  double target_;
};

struct PilotKeyStats {
  std::string key;
  double item_count = 0.0;          // pilot items holding the key
  double population = 0.0;          // M-hat: item_count scaled to all N partitions
  double intra_variance = 0.0;      // pooled S_i^2 of per-item key totals
  bool intra_degenerate = false;    // fewer than 2 items in every pilot partition
  double inter_variance = 0.0;      // S_u^2 of per-partition totals (zeros included)
  bool inter_degenerate = false;    // seen in fewer than 2 pilot partitions
  double item_mean = 0.0;           // mean per-item key total
  std::size_t partitions_present = 0;
  double total_estimate = 0.0;      // N * mean pilot partition total
};

struct PilotStats {
  std::size_t origin_partitions = 0;  // N
  std::size_t pilot_partitions = 0;
  std::vector<PilotKeyStats> keys;    // sorted by key
  /// Averages over observed keys; stands in for statistics a key could not
  /// provide (e.g. S_i^2 of keys with single-item partitions).
  PilotKeyStats average;
  std::vector<std::string> warnings;
};

/// Value at 1-based index ceil(P/100 * K) of the ascending values.
double empirical_quantile(std::vector<double> values, double percentile);

/// Runs the chain at full item rate on a random pilot subset of the
/// partitions of `full` (a dataset loaded at rates (1, 1)).
PilotStats run_pilot(const PartitionedDataset& full, const TransformChain& chain,
                     const RateSearchConfig& cfg, unsigned threads = 0);

/// Scale (df / chi2_{1 - level, df}) turning a sample variance with `df`
/// degrees of freedom into its one-sided upper confidence limit.
double variance_upper_factor(double df, double level);

/// Predicted relative bound of every pilot key at rates (p1, p2): the
/// expected reported variance, with pilot variances raised to their upper
/// limits at `pilot_confidence`.
std::vector<double> predict_bounds(const PilotStats& stats, double p1, double p2,
                                   const ConfidenceSpec& spec, double pilot_confidence = 0.5);

struct PredictedPoint {
  double percentile = 0.0;
  double predicted = 0.0;
  double target = 0.0;
};

struct RateChoice {
  double partition_rate = 1.0;
  double item_rate = 1.0;
  std::vector<PredictedPoint> predicted;  // one per target
};

/// Greedy search: lowers the partition rate by `step` while every target
/// holds, then the item rate. Throws InfeasibleTargets when a target fails
/// at (1, 1).
RateChoice search_rates(const PilotStats& stats, const ErrorTargets& targets,
                        const RateSearchConfig& cfg, const ConfidenceSpec& spec);

struct TunedRun {
  RateChoice choice;
  PilotStats pilot;
  AggregationResult result;
  double pilot_seconds = 0.0;
  double run_seconds = 0.0;
};

/// Pilot, search, then a fresh run at the chosen rates. `base` supplies the
/// seed and confidence; its rates are ignored. Sum aggregation only.
TunedRun run_with_targets(const std::filesystem::path& input, std::size_t partitions,
                          const TransformChain& chain, const ErrorTargets& targets,
                          const RateSearchConfig& cfg, const SamplingConfig& base,
                          unsigned threads = 0);

}  // namespace approxflow
