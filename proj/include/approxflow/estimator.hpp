#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "approxflow/provenance.hpp"
#include "approxflow/transform.hpp"

namespace approxflow {

/// Estimated size of a cluster population from a Bernoulli(rate) sample of
/// it: value n / rate, variance n (1 - rate) / rate^2 (negative binomial).
struct PopulationEstimate {
  double value = 0.0;
  double variance = 0.0;
  bool exact = false;  // rate == 1: the population was observed in full
};

PopulationEstimate estimate_population(std::size_t sample_count, double rate);

/// Known population; no estimation variance.
inline PopulationEstimate known_population(double size) { return {size, 0.0, true}; }

/// Var(XY) for independent X, Y: Ex^2 Vy + Ey^2 Vx + Vx Vy.
double product_variance(double ex, double vx, double ey, double vy);

struct VarianceEstimate {
  double value = 0.0;
  bool degenerate = false;  // a needed sample variance had fewer than 2 observations
};

/// Unbiased (count - 1) sample variance; fewer than two values give 0 and
/// the degenerate flag.
VarianceEstimate sample_variance(std::span<const double> values);

/// One sampled first-stage cluster: M_i (population) and the m_i sampled
/// values.
struct ClusterSample {
  double population = 0.0;
  std::vector<double> values;
};

/// tau = (N/n) sum_i (M_i/m_i) sum_j v_ij.
double two_stage_sum(double total_clusters, std::span<const ClusterSample> clusters);

/// V = N(N-n) Su^2/n + (N/n) sum_i M_i(M_i-m_i) Si^2/m_i.
VarianceEstimate two_stage_variance(double total_clusters, std::span<const ClusterSample> clusters);

/// Two-stage variance where both N and every M_i are
/// estimated from the sample (rates p1 and p2) and the estimation
/// uncertainty enters through the product rule.
VarianceEstimate nb_augmented_two_stage_variance(double p1, double p2,
                                                 std::span<const std::vector<double>> clusters);

/// Node of an explicit multi-stage cluster tree. A leaf holds a sampled
/// value; an internal node holds its population size (N_Ik or M_Ik) and the
/// sampled sub-clusters.
struct ClusterNode {
  double population = 0.0;
  double value = 0.0;
  bool leaf = false;
  std::vector<ClusterNode> children;

  static ClusterNode make_leaf(double v) { return {0.0, v, true, {}}; }
  static ClusterNode make_cluster(double population, std::vector<ClusterNode> children) {
    return {population, 0.0, false, std::move(children)};
  }
};

struct NodeEstimate {
  double tau = 0.0;
  double variance = 0.0;
  bool degenerate = false;
};

/// Multi-stage sum and variance recurrences evaluated bottom-up. A node
/// whose children are all leaves is a last-stage cluster (M, m, Si^2); any
/// other internal node uses (N, n, Su^2). Children must be all leaves or all
/// internal. An internal node with no children has total 0.
NodeEstimate multistage_estimate(const ClusterNode& node);
double multistage_sum(const ClusterNode& node);
VarianceEstimate multistage_variance(const ClusterNode& node);

/// Streaming moments of the child estimates under one node.
struct ChildMoments {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;            // sum of squared deviations of child totals
  double variance_sum = 0.0;  // sum of child variances
  bool degenerate = false;

  void add(double tau, double variance = 0.0, bool child_degenerate = false);
  /// Adds `k` children whose total and variance are 0.
  void add_zeros(std::size_t k);
};

/// Level-local combination used by compute_tree: sum
/// tau = N * mean, variance N^2 Var(mean) + (N/n) sum V_j, where
/// Var(mean) = (1 - n/N) s^2 / n. When N is estimated, the inter-cluster term
/// becomes product_variance(N, Var N, mean, Var(mean)).
NodeEstimate combine_level(const ChildMoments& children, const PopulationEstimate& population);

/// Critical value t_{df, 1 - (1 - level)/2}. df may be infinite.
double t_critical(double df, double level);

struct ConfidenceSpec {
  double level = 0.95;
  double critical(double df) const { return t_critical(df, level); }
};

struct Interval {
  double epsilon = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool unbounded = false;  // fewer than two level-1 clusters and nonzero variance
};

/// epsilon = t_{n-1} sqrt(v). Zero variance always yields epsilon = 0.
Interval confidence_interval(double tau, double variance, std::size_t n_level1,
                             const ConfidenceSpec& spec);

struct KeyEstimate {
  std::string key;
  double tau_hat = 0.0;
  double v_hat = 0.0;
  double epsilon = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double relative_bound = 0.0;  // epsilon / |tau_hat|
  bool relative_bound_defined = true;
  bool epsilon_unbounded = false;
  std::size_t n_level1 = 0;  // participating level-1 clusters
  bool degenerate = false;
  /// Estimated number of final records with this key, and its variance.
  double population = 0.0;
  double population_variance = 0.0;
};

using KeyEstimates = std::map<std::string, KeyEstimate>;

/// Per-key statistics of one partition node.
struct PartitionKeyStats {
  NodeEstimate total;  // value sum
  NodeEstimate count;  // leaf count (population of the key)
};

/// Sorted by key.
using PartitionSummary = std::vector<std::pair<std::string, PartitionKeyStats>>;

/// Bottom-up traversal of one partition subtree for every key it holds.
PartitionSummary summarize_partition(const PartitionSubtree& subtree, const LevelRates& rates);

/// Root of the tree: merges partition summaries (in partition order) with
/// the known partition count N. Partitions lacking a key contribute a zero
/// cluster total.
KeyEstimates merge_partitions(std::span<const PartitionSummary> summaries,
                              std::size_t origin_partition_count, Aggregation aggregation,
                              const ConfidenceSpec& spec);

/// Finishes a key at the root: applies the aggregation and the interval.
KeyEstimate finish_key(std::string key, const NodeEstimate& total, const NodeEstimate& count,
                       std::size_t n_level1, Aggregation aggregation, const ConfidenceSpec& spec);

/// Estimates and intervals for every distinct leaf key of a finished tree.
KeyEstimates compute_tree(const ProvenanceTree& tree, const ConfidenceSpec& spec,
                          Aggregation aggregation = Aggregation::Sum, unsigned threads = 0);

}  // namespace approxflow
