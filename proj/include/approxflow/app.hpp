#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "approxflow/dataset.hpp"
#include "approxflow/report.hpp"
#include "approxflow/tuner.hpp"

namespace approxflow {

/// Parameters shared by the run, exact and tune commands.
struct RunRequest {
  std::string pipeline;
  std::filesystem::path input;
  std::size_t partitions = 8;
  SamplingConfig sampling;
  Aggregation aggregation = Aggregation::Sum;
  unsigned threads = 0;
  bool asrs = false;
  std::size_t reservoir_size = 0;
};

/// "sum" or "mean". Throws UsageError.
Aggregation parse_aggregation(const std::string& text);

/// Built-in chain for the request; mean aggregation is only valid for synth.
TransformChain request_chain(const RunRequest& request);

RunReport run_command(const RunRequest& request);
ExactValues exact_command(const RunRequest& request);
RunReport tune_command(const RunRequest& request, const ErrorTargets& targets,
                       const RateSearchConfig& search);
CompareReport compare_command(const std::filesystem::path& approx,
                              const std::filesystem::path& exact);

}  // namespace approxflow
