#include "approxflow/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "approxflow/error.hpp"
#include "approxflow/parallel.hpp"

namespace approxflow {

PopulationEstimate estimate_population(std::size_t sample_count, double rate) {
  if (!(rate > 0.0 && rate <= 1.0)) throw UsageError("population rate must lie in (0, 1]");
  const auto n = static_cast<double>(sample_count);
  if (rate >= 1.0) return {n, 0.0, true};
  if (sample_count == 0) return {0.0, 0.0, false};
  return {n / rate, n * (1.0 - rate) / (rate * rate), false};
}

double product_variance(double ex, double vx, double ey, double vy) {
  return ex * ex * vy + ey * ey * vx + vx * vy;
}

VarianceEstimate sample_variance(std::span<const double> values) {
  if (values.size() < 2) return {0.0, true};
  ChildMoments m;
  for (double v : values) m.add(v);
  return {m.m2 / static_cast<double>(m.count - 1), false};
}

void ChildMoments::add(double tau, double variance, bool child_degenerate) {
  ++count;
  const double delta = tau - mean;
  mean += delta / static_cast<double>(count);
  m2 += delta * (tau - mean);
  variance_sum += variance;
  degenerate = degenerate || child_degenerate;
}

void ChildMoments::add_zeros(std::size_t k) {
  if (k == 0) return;
  const auto na = static_cast<double>(count);
  const auto nb = static_cast<double>(k);
  const double n = na + nb;
  const double delta = -mean;
  m2 += delta * delta * na * nb / n;
  mean = mean * na / n;
  count += k;
}

NodeEstimate combine_level(const ChildMoments& children, const PopulationEstimate& population) {
  NodeEstimate out;
  out.degenerate = children.degenerate;
  if (children.count == 0) return out;

  const auto n = static_cast<double>(children.count);
  const double big_n = population.value;
  const double s2 = children.count >= 2 ? children.m2 / (n - 1.0) : 0.0;
  const double fpc = big_n > n ? (big_n - n) / big_n : 0.0;
  if (children.count < 2 && (fpc > 0.0 || population.variance > 0.0)) out.degenerate = true;

  const double var_mean = fpc * s2 / n;
  out.tau = big_n * children.mean;
  out.variance = product_variance(big_n, population.variance, children.mean, var_mean) +
                 (big_n / n) * children.variance_sum;
  return out;
}

double two_stage_sum(double total_clusters, std::span<const ClusterSample> clusters) {
  if (clusters.empty()) throw UsageError("two-stage estimate needs n >= 1");
  for (const auto& c : clusters) {
    if (c.values.empty()) throw UsageError("two-stage estimate needs m_i >= 1");
    if (static_cast<double>(c.values.size()) > c.population) {
      throw UsageError("two-stage estimate needs m_i <= M_i");
    }
  }
  if (static_cast<double>(clusters.size()) > total_clusters) {
    throw UsageError("two-stage estimate needs n <= N");
  }

  double sum = 0.0;
  for (const auto& c : clusters) {
    const double within = std::accumulate(c.values.begin(), c.values.end(), 0.0);
    sum += c.population / static_cast<double>(c.values.size()) * within;
  }
  return total_clusters / static_cast<double>(clusters.size()) * sum;
}

VarianceEstimate two_stage_variance(double total_clusters, std::span<const ClusterSample> clusters) {
  (void)two_stage_sum(total_clusters, clusters);  // precondition checks
  const auto n = static_cast<double>(clusters.size());
  std::vector<double> cluster_totals;
  VarianceEstimate out;
  double intra = 0.0;
  for (const auto& c : clusters) {
    const auto m = static_cast<double>(c.values.size());
    const double within = std::accumulate(c.values.begin(), c.values.end(), 0.0);
    cluster_totals.push_back(c.population / m * within);
    const auto si2 = sample_variance(c.values);
    if (si2.degenerate && c.population > m) out.degenerate = true;
    intra += c.population * (c.population - m) * si2.value / m;
  }
  const auto su2 = sample_variance(cluster_totals);
  if (su2.degenerate && total_clusters > n) out.degenerate = true;
  out.value = total_clusters * (total_clusters - n) * su2.value / n + total_clusters / n * intra;
  return out;
}

VarianceEstimate nb_augmented_two_stage_variance(double p1, double p2,
                                                 std::span<const std::vector<double>> clusters) {
  VarianceEstimate out;
  if (clusters.empty()) return out;
  std::vector<double> totals;
  double intra = 0.0;
  for (const auto& values : clusters) {
    if (values.empty()) {
      totals.push_back(0.0);
      continue;
    }
    const auto m = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / m;
    const auto si2 = sample_variance(values);
    if (si2.degenerate && p2 < 1.0) out.degenerate = true;
    const PopulationEstimate items = estimate_population(values.size(), p2);
    totals.push_back(items.value * mean);
    const double var_mean = (1.0 - p2) * si2.value / m;
    intra += product_variance(items.value, items.variance, mean, var_mean);
  }
  const auto n = static_cast<double>(totals.size());
  const double tau_bar = std::accumulate(totals.begin(), totals.end(), 0.0) / n;
  const auto st2 = sample_variance(totals);
  if (st2.degenerate && p1 < 1.0) out.degenerate = true;
  const PopulationEstimate clusters_est = estimate_population(totals.size(), p1);
  const double var_tau_bar = (1.0 - p1) * st2.value / n;
  const double inter = product_variance(clusters_est.value, clusters_est.variance, tau_bar,
                                        var_tau_bar);
  out.value = inter + intra / p1;
  return out;
}

NodeEstimate multistage_estimate(const ClusterNode& node) {
  if (node.leaf) return {node.value, 0.0, false};
  ChildMoments moments;
  const bool leaf_children = !node.children.empty() && node.children.front().leaf;
  for (const auto& child : node.children) {
    if (child.leaf != leaf_children) {
      throw UsageError("cluster node mixes leaves and sub-clusters");
    }
    const NodeEstimate est = multistage_estimate(child);
    moments.add(est.tau, est.variance, est.degenerate);
  }
  return combine_level(moments, known_population(node.population));
}

double multistage_sum(const ClusterNode& node) { return multistage_estimate(node).tau; }

VarianceEstimate multistage_variance(const ClusterNode& node) {
  const NodeEstimate est = multistage_estimate(node);
  return {est.variance, est.degenerate};
}

double t_critical(double df, double level) {
  if (!(level > 0.0 && level < 1.0)) throw UsageError("confidence level must lie in (0, 1)");
  const double upper = 1.0 - (1.0 - level) / 2.0;
  if (!(df > 0.0)) return std::numeric_limits<double>::infinity();
  if (std::isinf(df) || df > 1e10) {
    return boost::math::quantile(boost::math::normal_distribution<double>(), upper);
  }
  return boost::math::quantile(boost::math::students_t_distribution<double>(df), upper);
}

Interval confidence_interval(double tau, double variance, std::size_t n_level1,
                             const ConfidenceSpec& spec) {
  Interval out;
  if (variance <= 0.0) {
    out.lo = out.hi = tau;
    return out;
  }
  if (n_level1 < 2) {
    const double inf = std::numeric_limits<double>::infinity();
    out.epsilon = inf;
    out.lo = -inf;
    out.hi = inf;
    out.unbounded = true;
    return out;
  }
  out.epsilon = spec.critical(static_cast<double>(n_level1 - 1)) * std::sqrt(variance);
  out.lo = tau - out.epsilon;
  out.hi = tau + out.epsilon;
  return out;
}

namespace {

struct NodeStats {
  std::uint32_t index = 0;
  NodeEstimate total;
  NodeEstimate count;
};

// Groups `nodes` (already sorted by parent) into parent nodes.
template <class ParentOf>
std::vector<NodeStats> combine_into_parents(const std::vector<NodeStats>& nodes,
                                            ParentOf parent_of, double child_rate) {
  std::vector<NodeStats> parents;
  std::size_t begin = 0;
  while (begin < nodes.size()) {
    const std::uint32_t parent = parent_of(nodes[begin].index);
    ChildMoments totals;
    ChildMoments counts;
    std::size_t end = begin;
    while (end < nodes.size() && parent_of(nodes[end].index) == parent) {
      totals.add(nodes[end].total.tau, nodes[end].total.variance, nodes[end].total.degenerate);
      counts.add(nodes[end].count.tau, nodes[end].count.variance, nodes[end].count.degenerate);
      ++end;
    }
    const PopulationEstimate pop = estimate_population(end - begin, child_rate);
    parents.push_back({parent, combine_level(totals, pop), combine_level(counts, pop)});
    begin = end;
  }
  return parents;
}

}  // namespace

PartitionSummary summarize_partition(const PartitionSubtree& subtree, const LevelRates& rates) {
  const std::size_t d = rates.depth();
  if (subtree.depth() != d) throw UsageError("subtree depth does not match level rates");
  if (subtree.leaf_parent.size() != subtree.leaves.size()) {
    throw UsageError("subtree leaf parents and leaves differ in size");
  }

  std::vector<std::uint32_t> order(subtree.leaves.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    const int c = subtree.leaves[a].key.compare(subtree.leaves[b].key);
    if (c != 0) return c < 0;
    if (subtree.leaf_parent[a] != subtree.leaf_parent[b]) {
      return subtree.leaf_parent[a] < subtree.leaf_parent[b];
    }
    return a < b;
  });

  PartitionSummary summary;
  std::size_t begin = 0;
  while (begin < order.size()) {
    const std::string& key = subtree.leaves[order[begin]].key;
    std::size_t end = begin;
    while (end < order.size() && subtree.leaves[order[end]].key == key) ++end;

    // Level d - 1: clusters of leaves.
    std::vector<NodeStats> level;
    for (std::size_t i = begin; i < end;) {
      const std::uint32_t parent = subtree.leaf_parent[order[i]];
      ChildMoments totals;
      ChildMoments counts;
      std::size_t j = i;
      for (; j < end && subtree.leaf_parent[order[j]] == parent; ++j) {
        totals.add(subtree.leaves[order[j]].value);
        counts.add(1.0);
      }
      const PopulationEstimate pop = estimate_population(j - i, rates.rate(d));
      level.push_back({parent, combine_level(totals, pop), combine_level(counts, pop)});
      i = j;
    }

    // Levels d - 2 .. 1.
    for (std::size_t lvl = d - 1; lvl > 1; --lvl) {
      const auto& parent_of_level = subtree.internal_parents[lvl - 2];
      auto parent_of = [&](std::uint32_t idx) { return parent_of_level[idx]; };
      std::stable_sort(level.begin(), level.end(), [&](const NodeStats& a, const NodeStats& b) {
        return parent_of(a.index) < parent_of(b.index);
      });
      level = combine_into_parents(level, parent_of, rates.rate(lvl));
    }

    if (level.size() != 1) throw UsageError("subtree does not converge to one partition node");
    summary.emplace_back(key, PartitionKeyStats{level.front().total, level.front().count});
    begin = end;
  }
  return summary;
}

KeyEstimate finish_key(std::string key, const NodeEstimate& total, const NodeEstimate& count,
                       std::size_t n_level1, Aggregation aggregation, const ConfidenceSpec& spec) {
  KeyEstimate est;
  est.key = std::move(key);
  est.n_level1 = n_level1;
  est.population = count.tau;
  est.population_variance = count.variance;
  est.degenerate = total.degenerate;
  if (aggregation == Aggregation::Sum) {
    est.tau_hat = total.tau;
    est.v_hat = total.variance;
  } else {
    est.tau_hat = count.tau > 0.0 ? total.tau / count.tau : 0.0;
    est.v_hat = count.tau > 0.0 ? total.variance / (count.tau * count.tau) : 0.0;
  }
  Interval ci = confidence_interval(est.tau_hat, est.v_hat, n_level1, spec);
  // A zero variance that only comes from a missing sample variance is not a
  // zero error.
  if (n_level1 < 2 && total.degenerate && !ci.unbounded) {
    ci = confidence_interval(est.tau_hat, std::numeric_limits<double>::infinity(), n_level1, spec);
  }
  est.epsilon = ci.epsilon;
  est.ci_lo = ci.lo;
  est.ci_hi = ci.hi;
  est.epsilon_unbounded = ci.unbounded;
  if (ci.unbounded) est.degenerate = true;
  if (est.tau_hat == 0.0) {
    est.relative_bound_defined = false;
    est.relative_bound = std::numeric_limits<double>::quiet_NaN();
  } else {
    est.relative_bound = est.epsilon / std::abs(est.tau_hat);
  }
  return est;
}

KeyEstimates merge_partitions(std::span<const PartitionSummary> summaries,
                              std::size_t origin_partition_count, Aggregation aggregation,
                              const ConfidenceSpec& spec) {
  struct Accum {
    ChildMoments totals;
    ChildMoments counts;
  };
  std::map<std::string, Accum> accum;
  for (const auto& summary : summaries) {
    for (const auto& [key, stats] : summary) {
      auto& a = accum[key];
      a.totals.add(stats.total.tau, stats.total.variance, stats.total.degenerate);
      a.counts.add(stats.count.tau, stats.count.variance, stats.count.degenerate);
    }
  }
  const std::size_t n = summaries.size();
  const PopulationEstimate partitions = known_population(static_cast<double>(origin_partition_count));
  KeyEstimates out;
  for (auto& [key, a] : accum) {
    const std::size_t participating = a.totals.count;
    a.totals.add_zeros(n - participating);
    a.counts.add_zeros(n - participating);
    const NodeEstimate total = combine_level(a.totals, partitions);
    const NodeEstimate count = combine_level(a.counts, partitions);
    out.emplace(key, finish_key(key, total, count, participating, aggregation, spec));
  }
  return out;
}

KeyEstimates compute_tree(const ProvenanceTree& tree, const ConfidenceSpec& spec,
                          Aggregation aggregation, unsigned threads) {
  std::vector<PartitionSummary> summaries(tree.partitions.size());
  parallel_for(tree.partitions.size(), threads, [&](std::size_t i) {
    summaries[i] = summarize_partition(tree.partitions[i], tree.rates);
  });
  return merge_partitions(summaries, tree.origin_partition_count, aggregation, spec);
}

}  // namespace approxflow
