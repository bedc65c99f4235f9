#include "approxflow/app.hpp"

#include <chrono>

#include "approxflow/asrs.hpp"
#include "approxflow/error.hpp"
#include "approxflow/pipeline.hpp"

namespace approxflow {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

RunReport run_asrs(const RunRequest& request, const TransformChain& chain) {
  if (request.sampling.item_rate < 1.0) {
    throw UsageError("--asrs replaces item sampling; use --item-rate 1");
  }
  if (request.reservoir_size == 0) throw UsageError("--asrs needs --reservoir-size");
  const auto dataset = load_text(request.input, request.partitions, request.sampling,
                                 request.threads);
  const auto sample = asrs_transform(dataset, chain, request.reservoir_size, request.threads);
  const ConfidenceSpec spec{request.sampling.confidence};
  const KeyEstimates estimates = stratified_estimate(sample, spec, chain.final_stage);

  std::size_t admitted = 0;
  for (const auto& p : sample.partitions) admitted += p.state.admitted();
  const std::size_t stored = sample.stored_total();

  RunReport report;
  report.pipeline = request.pipeline;
  report.mode = "asrs";
  report.input = request.input.string();
  RunMetadata& m = report.metadata;
  m.partition_rate = request.sampling.partition_rate;
  m.item_rate = request.sampling.item_rate;
  m.seed = request.sampling.seed;
  m.confidence = request.sampling.confidence;
  m.aggregation = chain.final_stage;
  m.origin_partitions = dataset.origin_partition_count();
  m.selected_partitions = dataset.partitions().size();
  const double kept = admitted == 0 ? 1.0 : static_cast<double>(stored) / static_cast<double>(admitted);
  m.shape.rates.rate_by_level = {request.sampling.partition_rate, kept};
  m.shape.nodes_per_level = {1, dataset.partitions().size(), stored};
  report.reservoir_size = request.reservoir_size;
  report.stored_items = stored;
  for (const auto& [key, est] : estimates) report.rows.push_back(to_row(est));
  return report;
}

}  // namespace

Aggregation parse_aggregation(const std::string& text) {
  if (text == "sum") return Aggregation::Sum;
  if (text == "mean") return Aggregation::Mean;
  throw UsageError("unknown aggregation '" + text + "' (sum or mean)");
}

TransformChain request_chain(const RunRequest& request) {
  if (request.aggregation != Aggregation::Sum && request.pipeline != "synth") {
    throw UsageError("pipeline '" + request.pipeline + "' only supports sum aggregation");
  }
  return builtin_pipeline(request.pipeline, PipelineParams{request.aggregation});
}

RunReport run_command(const RunRequest& request) {
  const auto start = Clock::now();
  request.sampling.validate();
  const TransformChain chain = request_chain(request);
  RunReport report;
  if (request.asrs) {
    report = run_asrs(request, chain);
  } else {
    const auto dataset = load_text(request.input, request.partitions, request.sampling,
                                   request.threads);
    const auto result = execute(dataset, chain, ExecOptions{request.threads, false});
    report = make_report(result, request.pipeline, request.input.string());
  }
  report.wall_seconds = seconds_since(start);
  return report;
}

ExactValues exact_command(const RunRequest& request) {
  SamplingConfig full = request.sampling;
  full.partition_rate = 1.0;
  full.item_rate = 1.0;
  full.validate();
  const TransformChain chain = request_chain(request);
  const auto dataset = load_text(request.input, request.partitions, full, request.threads);
  const ExactResult exact = execute_exact(dataset, chain, request.threads);
  return ExactValues(exact.begin(), exact.end());
}

RunReport tune_command(const RunRequest& request, const ErrorTargets& targets,
                       const RateSearchConfig& search) {
  const auto start = Clock::now();
  if (request.asrs) throw UsageError("--asrs cannot be combined with targets");
  request.sampling.validate();
  const TransformChain chain = request_chain(request);
  TunedRun tuned = run_with_targets(request.input, request.partitions, chain, targets, search,
                                    request.sampling, request.threads);
  RunReport report = make_report(tuned.result, request.pipeline, request.input.string());
  report.mode = "tuned";
  TunerInfo info;
  info.targets = targets.targets;
  info.choice = tuned.choice;
  info.pilot_partitions = tuned.pilot.pilot_partitions;
  info.pilot_seconds = tuned.pilot_seconds;
  info.run_seconds = tuned.run_seconds;
  report.tuner = std::move(info);
  report.wall_seconds = seconds_since(start);
  return report;
}

CompareReport compare_command(const std::filesystem::path& approx,
                              const std::filesystem::path& exact) {
  return compare(read_report_rows(approx), read_exact(exact));
}

}  // namespace approxflow
