#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "approxflow/pipeline.hpp"
#include "approxflow/tuner.hpp"

namespace approxflow {

inline constexpr const char* kReportSchema = "approxflow.report/1";
inline constexpr const char* kExactSchema = "approxflow.exact/1";
inline constexpr const char* kCompareSchema = "approxflow.compare/1";
inline constexpr const char* kCsvHeader =
    "key,estimate,variance,ci_lo,ci_hi,epsilon,relative_bound,n_level1,degenerate";

enum class ReportFormat { Csv, Json };

/// Parses "csv" or "json". Throws UsageError.
ReportFormat parse_format(const std::string& text);

/// One output row per key.
struct ReportRow {
  std::string key;
  double estimate = 0.0;
  double variance = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double epsilon = 0.0;         // inf when unbounded
  double relative_bound = 0.0;  // nan when undefined (estimate 0)
  std::size_t n_level1 = 0;
  bool degenerate = false;
};

ReportRow to_row(const KeyEstimate& est);

struct TunerInfo {
  std::vector<ErrorTarget> targets;
  RateChoice choice;
  std::size_t pilot_partitions = 0;
  double pilot_seconds = 0.0;
  double run_seconds = 0.0;
};

/// Everything a run writes out.
struct RunReport {
  std::string pipeline;
  std::string mode = "approximate";  // approximate | asrs | tuned
  std::string input;
  RunMetadata metadata;
  std::vector<ReportRow> rows;  // sorted by key
  std::vector<std::string> warnings;
  std::optional<std::size_t> reservoir_size;
  std::optional<std::size_t> stored_items;
  std::optional<TunerInfo> tuner;
  double wall_seconds = 0.0;
};

RunReport make_report(const AggregationResult& result, std::string pipeline, std::string input);

/// Relative-bound percentiles at 10, 50, 90, 100 over rows with a defined
/// bound; empty when no row has one.
std::vector<std::pair<double, double>> bound_percentiles(const std::vector<ReportRow>& rows);

/// Text form of a number: shortest round-trip decimal, "inf", "-inf", "nan".
std::string format_number(double v);
/// Inverse of format_number. Throws InputError.
double parse_number(const std::string& text);

/// CSV field with RFC 4180 quoting when needed.
std::string csv_field(const std::string& text);
/// Splits one CSV line (RFC 4180 quoting, no embedded newlines).
std::vector<std::string> split_csv_line(const std::string& line);

void write_csv(std::ostream& out, const RunReport& report);
/// JSON summary written next to a CSV report.
std::string summary_json(const RunReport& report);
std::string report_json(const RunReport& report);
/// Writes the report; CSV also writes `<path>.summary.json`.
void write_report(const std::filesystem::path& path, const RunReport& report, ReportFormat format);

/// Rows of a CSV or JSON report file. Throws InputError.
std::vector<ReportRow> read_report_rows(const std::filesystem::path& path);

using ExactValues = std::vector<std::pair<std::string, double>>;  // sorted by key

void write_exact(const std::filesystem::path& path, const ExactValues& values,
                 ReportFormat format);
ExactValues read_exact(const std::filesystem::path& path);

struct CompareRow {
  std::string key;
  double estimate = 0.0;
  double exact = 0.0;
  double actual_relative_error = 0.0;  // |1 - estimate/exact|; nan when exact is 0
  double relative_bound = 0.0;
  bool ci_contains = false;
};

struct CompareReport {
  std::vector<CompareRow> rows;  // keys present in both, sorted
  std::vector<std::string> lost_keys;   // exact keys missing from the approximation
  std::vector<std::string> extra_keys;  // approximate keys absent from the exact result
  std::size_t exact_keys = 0;
  std::size_t approx_keys = 0;
  double key_loss = 0.0;              // lost / exact keys
  double ci_containment = 0.0;        // over shared keys
  std::vector<std::pair<double, double>> bound_percentiles;
  std::vector<std::pair<double, double>> error_percentiles;
};

/// Throws InputError when both sides have keys but none in common (the key
/// formats disagree).
CompareReport compare(const std::vector<ReportRow>& approx, const ExactValues& exact);

void write_compare(const std::filesystem::path& path, const CompareReport& report,
                   ReportFormat format);
std::string compare_json(const CompareReport& report);

}  // namespace approxflow
