// approxflow command-line front end. Talks to the engine only through the C
// interface.
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "approxflow/approxflow.h"

namespace {

struct CommonFlags {
  std::string pipeline;
  std::string input;
  std::size_t partitions = 8;
  double partition_rate = 1.0;
  double item_rate = 1.0;
  double confidence = 0.95;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "csv";
  unsigned threads = 0;
  std::string dump_provenance;
  bool asrs = false;
  std::size_t reservoir_size = 0;
  std::string aggregation = "sum";
};

int exit_code(af_status status) {
  switch (status) {
    case AF_OK: return 0;
    case AF_ERR_USAGE: return 2;
    case AF_ERR_PIPELINE:
    case AF_ERR_INPUT: return 3;
    case AF_ERR_INFEASIBLE: return 4;
    default: return 1;
  }
}

int report_failure(af_status status) {
  std::fprintf(stderr, "approxflow: %s\n", af_last_error());
  return exit_code(status);
}

void add_input_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--pipeline", f.pipeline, "wordcount | cooccur | group-sum | synth")->required();
  cmd->add_option("--input", f.input, "input file or directory")->required();
  cmd->add_option("--partitions", f.partitions, "number of partitions")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--aggregation", f.aggregation, "sum | mean (mean: synth only)")
      ->check(CLI::IsMember({"sum", "mean"}));
  cmd->add_option("--threads", f.threads, "worker threads (0 = logical cores)");
  cmd->add_option("--out", f.out, "output file")->required();
  cmd->add_option("--format", f.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
}

void add_sampling_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--partition-rate", f.partition_rate, "partition sampling rate in (0, 1]");
  cmd->add_option("--item-rate", f.item_rate, "item sampling rate in (0, 1]");
  cmd->add_option("--confidence", f.confidence, "confidence level, e.g. 0.95");
  cmd->add_option("--seed", f.seed, "random seed (APPROXFLOW_SEED overrides)");
  cmd->add_option("--dump-provenance", f.dump_provenance, "write the provenance tree shape here");
}

af_run_options to_options(const CommonFlags& f) {
  af_run_options o;
  af_run_options_init(&o);
  o.pipeline = f.pipeline.c_str();
  o.input = f.input.c_str();
  o.partitions = f.partitions;
  o.partition_rate = f.partition_rate;
  o.item_rate = f.item_rate;
  o.confidence = f.confidence;
  o.seed = f.seed;
  o.aggregation = f.aggregation.c_str();
  o.threads = f.threads;
  o.asrs = f.asrs ? 1 : 0;
  o.reservoir_size = f.reservoir_size;
  return o;
}

// Writes the report and optional provenance dump, then frees the result.
int finish_result(af_result* result, const CommonFlags& f) {
  for (std::size_t i = 0; i < af_result_warning_count(result); ++i) {
    std::fprintf(stderr, "warning: %s\n", af_result_warning(result, i));
  }
  af_status status = af_result_write(result, f.out.c_str(), f.format.c_str());
  if (status == AF_OK && !f.dump_provenance.empty()) {
    std::ofstream dump(f.dump_provenance, std::ios::binary | std::ios::trunc);
    if (!dump) {
      std::fprintf(stderr, "approxflow: cannot write %s\n", f.dump_provenance.c_str());
      af_result_free(result);
      return 3;
    }
    dump << af_result_provenance(result);
  }
  const std::size_t rows = af_result_row_count(result);
  af_result_free(result);
  if (status != AF_OK) return report_failure(status);
  std::fprintf(stderr, "wrote %s (%zu keys)\n", f.out.c_str(), rows);
  return 0;
}

// APPROXFLOW_SEED, when set, replaces --seed.
bool apply_seed_env(std::uint64_t& seed) {
  const char* env = std::getenv("APPROXFLOW_SEED");
  if (env == nullptr) return true;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*env == '\0' || *end != '\0' || errno != 0 || *env == '-') {
    std::fprintf(stderr, "approxflow: APPROXFLOW_SEED is not an unsigned integer: '%s'\n", env);
    return false;
  }
  seed = v;
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"approxflow: approximate keyed aggregation with error bounds"};
  app.require_subcommand(1);
  app.set_version_flag("--version", af_version());

  CommonFlags run_flags;
  auto* run = app.add_subcommand("run", "approximate run at the given sampling rates");
  add_input_flags(run, run_flags);
  add_sampling_flags(run, run_flags);
  run->add_flag("--asrs", run_flags.asrs, "stratified reservoir sampling instead of item sampling");
  run->add_option("--reservoir-size", run_flags.reservoir_size, "total reservoir size for --asrs");

  CommonFlags exact_flags;
  auto* exact = app.add_subcommand("exact", "exact result (ground truth)");
  add_input_flags(exact, exact_flags);

  std::string cmp_approx, cmp_exact, cmp_out, cmp_format = "json";
  auto* cmp = app.add_subcommand("compare", "compare an approximate report with an exact result");
  cmp->add_option("--approx", cmp_approx, "approximate report (csv or json)")->required();
  cmp->add_option("--exact", cmp_exact, "exact result file")->required();
  cmp->add_option("--out", cmp_out, "comparison report")->required();
  cmp->add_option("--format", cmp_format, "csv | json")->check(CLI::IsMember({"csv", "json"}));

  CommonFlags tune_flags;
  std::vector<std::string> targets;
  double pilot_fraction = 0.10;
  double step = 0.001;
  double pilot_confidence = 0.75;
  auto* tune = app.add_subcommand("tune", "pick sampling rates that meet error-bound targets");
  add_input_flags(tune, tune_flags);
  add_sampling_flags(tune, tune_flags);
  tune->add_option("--target", targets, "P=B: p-th percentile of relative bounds at most B")
      ->required();
  tune->add_option("--pilot-fraction", pilot_fraction, "fraction of partitions in the pilot");
  tune->add_option("--step", step, "rate search step");
  tune->add_option("--pilot-confidence", pilot_confidence,
                   "upper-limit level for pilot variances, in (0, 1)");

  af_synth_options synth_opts;
  af_synth_options_init(&synth_opts);
  std::string distribution = "uniform", value_dist = "uniform", synth_out;
  auto* synth = app.add_subcommand("synth", "generate a synthetic key,value dataset");
  synth->add_option("--keys", synth_opts.keys, "distinct keys")->check(CLI::PositiveNumber);
  synth->add_option("--partitions", synth_opts.partitions, "files to write")
      ->check(CLI::PositiveNumber);
  synth->add_option("--items-per-partition", synth_opts.items_per_partition, "lines per file")
      ->check(CLI::PositiveNumber);
  synth->add_option("--distribution", distribution, "uniform | zipf(s)");
  synth->add_option("--value-dist", value_dist,
                    "uniform | uniform(a,b) | normal(mu,sigma) | constant(c)");
  synth->add_option("--seed", synth_opts.seed, "random seed (APPROXFLOW_SEED overrides)");
  synth->add_option("--out", synth_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*run) {
    if (!apply_seed_env(run_flags.seed)) return 2;
    af_run_options o = to_options(run_flags);
    af_result* result = nullptr;
    const af_status status = af_run(&o, &result);
    if (status != AF_OK) return report_failure(status);
    return finish_result(result, run_flags);
  }
  if (*exact) {
    af_run_options o = to_options(exact_flags);
    af_result* result = nullptr;
    const af_status status = af_run_exact(&o, &result);
    if (status != AF_OK) return report_failure(status);
    return finish_result(result, exact_flags);
  }
  if (*cmp) {
    af_compare_summary s{};
    const af_status status = af_compare_files(cmp_approx.c_str(), cmp_exact.c_str(),
                                              cmp_out.c_str(), cmp_format.c_str(), &s);
    if (status != AF_OK) return report_failure(status);
    std::printf("exact_keys=%zu approx_keys=%zu shared=%zu lost=%zu key_loss=%g ci_containment=%g\n",
                s.exact_keys, s.approx_keys, s.shared_keys, s.lost_keys, s.key_loss,
                s.ci_containment);
    return 0;
  }
  if (*tune) {
    if (!apply_seed_env(tune_flags.seed)) return 2;
    std::vector<double> pcts, bounds;
    for (const auto& t : targets) {
      const auto eq = t.find('=');
      char* end1 = nullptr;
      char* end2 = nullptr;
      if (eq == std::string::npos) {
        std::fprintf(stderr, "approxflow: --target must look like P=B, got '%s'\n", t.c_str());
        return 2;
      }
      const std::string p = t.substr(0, eq), b = t.substr(eq + 1);
      pcts.push_back(std::strtod(p.c_str(), &end1));
      bounds.push_back(std::strtod(b.c_str(), &end2));
      if (p.empty() || b.empty() || *end1 != '\0' || *end2 != '\0') {
        std::fprintf(stderr, "approxflow: --target must look like P=B, got '%s'\n", t.c_str());
        return 2;
      }
    }
    af_run_options o = to_options(tune_flags);
    af_result* result = nullptr;
    const af_status status = af_tune(&o, pcts.data(), bounds.data(), pcts.size(), pilot_fraction,
                                     step, pilot_confidence, &result);
    if (status != AF_OK) return report_failure(status);
    double p1 = 0.0, p2 = 0.0;
    af_result_rates(result, &p1, &p2);
    std::printf("partition_rate=%g item_rate=%g\n", p1, p2);
    return finish_result(result, tune_flags);
  }
  if (*synth) {
    if (!apply_seed_env(synth_opts.seed)) return 2;
    synth_opts.distribution = distribution.c_str();
    synth_opts.value_dist = value_dist.c_str();
    const af_status status = af_synth(&synth_opts, synth_out.c_str());
    if (status != AF_OK) return report_failure(status);
    std::fprintf(stderr, "wrote %zu partitions to %s\n", synth_opts.partitions, synth_out.c_str());
    return 0;
  }
  return 2;
}
