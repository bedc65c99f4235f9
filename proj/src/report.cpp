#include "approxflow/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "approxflow/error.hpp"

namespace approxflow {

using json = nlohmann::ordered_json;

namespace {

json jnum(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

double from_json_number(const json& j, bool nan_when_null = false) {
  if (j.is_null()) {
    return nan_when_null ? std::numeric_limits<double>::quiet_NaN()
                         : std::numeric_limits<double>::infinity();
  }
  return j.get<double>();
}

json percentiles_json(const std::vector<std::pair<double, double>>& pcts) {
  json out = json::object();
  for (const auto& [p, v] : pcts) out["p" + format_number(p)] = jnum(v);
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

bool looks_like_json(const std::string& text) {
  auto pos = text.find_first_not_of(" \t\r\n");
  return pos != std::string::npos && text[pos] == '{';
}

json parse_json(const std::string& text, const std::filesystem::path& path) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::filesystem::path sidecar(const std::filesystem::path& path) {
  return path.string() + ".summary.json";
}

}  // namespace

ReportFormat parse_format(const std::string& text) {
  if (text == "csv") return ReportFormat::Csv;
  if (text == "json") return ReportFormat::Json;
  throw UsageError("unknown format '" + text + "' (csv or json)");
}

ReportRow to_row(const KeyEstimate& est) {
  ReportRow r;
  r.key = est.key;
  r.estimate = est.tau_hat;
  r.variance = est.v_hat;
  r.ci_lo = est.ci_lo;
  r.ci_hi = est.ci_hi;
  r.epsilon = est.epsilon;
  r.relative_bound = est.relative_bound_defined ? est.relative_bound
                                                : std::numeric_limits<double>::quiet_NaN();
  r.n_level1 = est.n_level1;
  r.degenerate = est.degenerate;
  return r;
}

RunReport make_report(const AggregationResult& result, std::string pipeline, std::string input) {
  RunReport report;
  report.pipeline = std::move(pipeline);
  report.input = std::move(input);
  report.metadata = result.metadata;
  report.warnings = result.warnings;
  report.rows.reserve(result.per_key.size());
  for (const auto& [key, est] : result.per_key) report.rows.push_back(to_row(est));
  return report;
}

std::vector<std::pair<double, double>> bound_percentiles(const std::vector<ReportRow>& rows) {
  std::vector<double> bounds;
  for (const auto& r : rows) {
    if (!std::isnan(r.relative_bound)) bounds.push_back(r.relative_bound);
  }
  std::vector<std::pair<double, double>> out;
  if (bounds.empty()) return out;
  for (double p : {10.0, 50.0, 90.0, 100.0}) out.emplace_back(p, empirical_quantile(bounds, p));
  return out;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_number(const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto res = std::from_chars(text.data(), end, v);
  if (text.empty() || res.ec != std::errc() || res.ptr != end) {
    throw InputError("not a number: '" + text + "'");
  }
  return v;
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\r\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw InputError("unterminated quote in CSV line");
  fields.push_back(std::move(cur));
  return fields;
}

void write_csv(std::ostream& out, const RunReport& report) {
  out << kCsvHeader << '\n';
  for (const auto& r : report.rows) {
    out << csv_field(r.key) << ',' << format_number(r.estimate) << ','
        << format_number(r.variance) << ',' << format_number(r.ci_lo) << ','
        << format_number(r.ci_hi) << ',' << format_number(r.epsilon) << ','
        << format_number(r.relative_bound) << ',' << r.n_level1 << ','
        << (r.degenerate ? "true" : "false") << '\n';
  }
}

namespace {

json metadata_json(const RunReport& report) {
  const RunMetadata& m = report.metadata;
  json j;
  j["pipeline"] = report.pipeline;
  j["mode"] = report.mode;
  j["input"] = report.input;
  j["aggregation"] = to_string(m.aggregation);
  j["partition_rate"] = m.partition_rate;
  j["item_rate"] = m.item_rate;
  j["seed"] = m.seed;
  j["confidence"] = m.confidence;
  j["origin_partitions"] = m.origin_partitions;
  j["selected_partitions"] = m.selected_partitions;
  j["depth"] = m.depth();
  j["level_rates"] = m.shape.rates.rate_by_level;
  j["nodes_per_level"] = m.shape.nodes_per_level;
  if (report.reservoir_size) j["reservoir_size"] = *report.reservoir_size;
  if (report.stored_items) j["stored_items"] = *report.stored_items;
  if (report.tuner) {
    const TunerInfo& t = *report.tuner;
    json tj;
    json targets = json::array();
    for (const auto& target : t.targets) {
      targets.push_back({{"percentile", target.percentile},
                         {"max_relative_bound", jnum(target.max_relative_bound)}});
    }
    tj["targets"] = targets;
    json predicted = json::array();
    for (const auto& p : t.choice.predicted) {
      predicted.push_back({{"percentile", p.percentile},
                           {"predicted", jnum(p.predicted)},
                           {"target", jnum(p.target)}});
    }
    tj["predicted"] = predicted;
    tj["chosen_partition_rate"] = t.choice.partition_rate;
    tj["chosen_item_rate"] = t.choice.item_rate;
    tj["pilot_partitions"] = t.pilot_partitions;
    j["tuner"] = tj;
  }
  return j;
}

json summary_object(const RunReport& report) {
  json s;
  s["keys_present"] = report.rows.size();
  std::size_t degenerate = 0;
  std::size_t unbounded = 0;
  for (const auto& r : report.rows) {
    degenerate += r.degenerate ? 1 : 0;
    unbounded += std::isinf(r.epsilon) ? 1 : 0;
  }
  s["degenerate_keys"] = degenerate;
  s["unbounded_keys"] = unbounded;
  s["relative_bound_percentiles"] = percentiles_json(bound_percentiles(report.rows));
  s["warnings"] = report.warnings;
  json timing;
  timing["wall_seconds"] = report.wall_seconds;
  if (report.tuner) {
    timing["pilot_seconds"] = report.tuner->pilot_seconds;
    timing["run_seconds"] = report.tuner->run_seconds;
  }
  s["timing"] = timing;
  return s;
}

}  // namespace

std::string summary_json(const RunReport& report) {
  json j;
  j["schema"] = std::string(kReportSchema) + "#summary";
  j["metadata"] = metadata_json(report);
  j["summary"] = summary_object(report);
  return j.dump(2) + "\n";
}

std::string report_json(const RunReport& report) {
  json j;
  j["schema"] = kReportSchema;
  j["metadata"] = metadata_json(report);
  j["summary"] = summary_object(report);
  json rows = json::array();
  for (const auto& r : report.rows) {
    json row;
    row["key"] = r.key;
    row["estimate"] = r.estimate;
    row["variance"] = r.variance;
    row["ci_lo"] = jnum(r.ci_lo);
    row["ci_hi"] = jnum(r.ci_hi);
    row["epsilon"] = jnum(r.epsilon);
    row["relative_bound"] = jnum(r.relative_bound);
    row["n_level1"] = r.n_level1;
    row["degenerate"] = r.degenerate;
    row["epsilon_unbounded"] = std::isinf(r.epsilon);
    row["relative_bound_defined"] = !std::isnan(r.relative_bound);
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  return j.dump(2) + "\n";
}

void write_report(const std::filesystem::path& path, const RunReport& report,
                  ReportFormat format) {
  if (format == ReportFormat::Json) {
    auto out = open_out(path);
    out << report_json(report);
    return;
  }
  {
    auto out = open_out(path);
    write_csv(out, report);
  }
  auto side = open_out(sidecar(path));
  side << summary_json(report);
}

std::vector<ReportRow> read_report_rows(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::vector<ReportRow> rows;
  if (looks_like_json(text)) {
    const json j = parse_json(text, path);
    if (j.value("schema", "") != kReportSchema || !j.contains("rows")) {
      throw InputError(path.string() + ": not an approximate report");
    }
    try {
      for (const auto& r : j.at("rows")) {
        ReportRow row;
        row.key = r.at("key").get<std::string>();
        row.estimate = r.at("estimate").get<double>();
        row.variance = r.at("variance").get<double>();
        const bool unbounded = r.value("epsilon_unbounded", false);
        row.epsilon = from_json_number(r.at("epsilon"));
        row.ci_lo = unbounded ? -std::numeric_limits<double>::infinity()
                              : from_json_number(r.at("ci_lo"));
        row.ci_hi = from_json_number(r.at("ci_hi"));
        row.relative_bound = from_json_number(r.at("relative_bound"), !unbounded);
        row.n_level1 = r.at("n_level1").get<std::size_t>();
        row.degenerate = r.at("degenerate").get<bool>();
        rows.push_back(std::move(row));
      }
    } catch (const json::exception& e) {
      throw InputError(path.string() + ": " + e.what());
    }
  } else {
    const auto lines = lines_of(text);
    if (lines.empty() || lines.front() != kCsvHeader) {
      throw InputError(path.string() + ": missing report header '" + kCsvHeader + "'");
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const auto f = split_csv_line(lines[i]);
      if (f.size() != 9) {
        throw InputError(path.string() + ": line " + std::to_string(i + 1) + " has " +
                         std::to_string(f.size()) + " fields, expected 9");
      }
      ReportRow row;
      row.key = f[0];
      row.estimate = parse_number(f[1]);
      row.variance = parse_number(f[2]);
      row.ci_lo = parse_number(f[3]);
      row.ci_hi = parse_number(f[4]);
      row.epsilon = parse_number(f[5]);
      row.relative_bound = parse_number(f[6]);
      row.n_level1 = static_cast<std::size_t>(parse_number(f[7]));
      if (f[8] != "true" && f[8] != "false") throw InputError("bad degenerate flag: " + f[8]);
      row.degenerate = f[8] == "true";
      rows.push_back(std::move(row));
    }
  }
  std::sort(rows.begin(), rows.end(),
            [](const ReportRow& a, const ReportRow& b) { return a.key < b.key; });
  return rows;
}

void write_exact(const std::filesystem::path& path, const ExactValues& values,
                 ReportFormat format) {
  auto out = open_out(path);
  if (format == ReportFormat::Json) {
    json j;
    j["schema"] = kExactSchema;
    json rows = json::array();
    for (const auto& [k, v] : values) rows.push_back({{"key", k}, {"value", v}});
    j["rows"] = std::move(rows);
    out << j.dump(2) << '\n';
    return;
  }
  out << "key,value\n";
  for (const auto& [k, v] : values) out << csv_field(k) << ',' << format_number(v) << '\n';
}

ExactValues read_exact(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  ExactValues values;
  if (looks_like_json(text)) {
    const json j = parse_json(text, path);
    if (j.value("schema", "") != kExactSchema) {
      throw InputError(path.string() + ": not an exact result");
    }
    try {
      for (const auto& r : j.at("rows")) {
        values.emplace_back(r.at("key").get<std::string>(), r.at("value").get<double>());
      }
    } catch (const json::exception& e) {
      throw InputError(path.string() + ": " + e.what());
    }
  } else {
    const auto lines = lines_of(text);
    if (lines.empty() || lines.front() != "key,value") {
      throw InputError(path.string() + ": missing exact header 'key,value'");
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const auto f = split_csv_line(lines[i]);
      if (f.size() != 2) {
        throw InputError(path.string() + ": line " + std::to_string(i + 1) +
                         " is not a key,value pair");
      }
      values.emplace_back(f[0], parse_number(f[1]));
    }
  }
  std::sort(values.begin(), values.end());
  return values;
}

CompareReport compare(const std::vector<ReportRow>& approx, const ExactValues& exact) {
  std::map<std::string, const ReportRow*> by_key;
  for (const auto& r : approx) by_key.emplace(r.key, &r);

  CompareReport out;
  out.exact_keys = exact.size();
  out.approx_keys = approx.size();
  std::size_t contained = 0;
  std::vector<ReportRow> shared_rows;
  std::vector<double> errors;
  std::map<std::string, bool> seen;
  for (const auto& [key, value] : exact) {
    auto it = by_key.find(key);
    if (it == by_key.end()) {
      out.lost_keys.push_back(key);
      continue;
    }
    seen[key] = true;
    const ReportRow& r = *it->second;
    CompareRow row;
    row.key = key;
    row.estimate = r.estimate;
    row.exact = value;
    row.actual_relative_error = value != 0.0 ? std::abs(1.0 - r.estimate / value)
                                             : std::numeric_limits<double>::quiet_NaN();
    row.relative_bound = r.relative_bound;
    row.ci_contains = r.ci_lo <= value && value <= r.ci_hi;
    contained += row.ci_contains ? 1 : 0;
    if (!std::isnan(row.actual_relative_error)) errors.push_back(row.actual_relative_error);
    shared_rows.push_back(r);
    out.rows.push_back(std::move(row));
  }
  for (const auto& r : approx) {
    if (!seen.count(r.key)) out.extra_keys.push_back(r.key);
  }
  if (!exact.empty() && !approx.empty() && out.rows.empty()) {
    throw InputError("approximate and exact results share no keys; key formats differ");
  }
  out.key_loss = exact.empty() ? 0.0
                               : static_cast<double>(out.lost_keys.size()) /
                                     static_cast<double>(exact.size());
  out.ci_containment = out.rows.empty() ? 0.0
                                        : static_cast<double>(contained) /
                                              static_cast<double>(out.rows.size());
  out.bound_percentiles = bound_percentiles(shared_rows);
  if (!errors.empty()) {
    for (double p : {10.0, 50.0, 90.0, 100.0}) {
      out.error_percentiles.emplace_back(p, empirical_quantile(errors, p));
    }
  }
  return out;
}

namespace {

json compare_summary(const CompareReport& report) {
  json s;
  s["exact_keys"] = report.exact_keys;
  s["approx_keys"] = report.approx_keys;
  s["shared_keys"] = report.rows.size();
  s["lost_keys"] = report.lost_keys.size();
  s["extra_keys"] = report.extra_keys.size();
  s["key_loss"] = report.key_loss;
  s["fraction_present"] = 1.0 - report.key_loss;
  s["ci_containment"] = report.ci_containment;
  s["relative_bound_percentiles"] = percentiles_json(report.bound_percentiles);
  s["actual_error_percentiles"] = percentiles_json(report.error_percentiles);
  s["lost"] = report.lost_keys;
  return s;
}

}  // namespace

std::string compare_json(const CompareReport& report) {
  json j;
  j["schema"] = kCompareSchema;
  j["summary"] = compare_summary(report);
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"key", r.key},
                    {"estimate", r.estimate},
                    {"exact", r.exact},
                    {"actual_relative_error", jnum(r.actual_relative_error)},
                    {"relative_bound", jnum(r.relative_bound)},
                    {"ci_contains", r.ci_contains}});
  }
  j["rows"] = std::move(rows);
  return j.dump(2) + "\n";
}

void write_compare(const std::filesystem::path& path, const CompareReport& report,
                   ReportFormat format) {
  if (format == ReportFormat::Json) {
    auto out = open_out(path);
    out << compare_json(report);
    return;
  }
  {
    auto out = open_out(path);
    out << "key,estimate,exact,actual_relative_error,relative_bound,ci_contains\n";
    for (const auto& r : report.rows) {
      out << csv_field(r.key) << ',' << format_number(r.estimate) << ','
          << format_number(r.exact) << ',' << format_number(r.actual_relative_error) << ','
          << format_number(r.relative_bound) << ',' << (r.ci_contains ? "true" : "false")
          << '\n';
    }
  }
  json s;
  s["schema"] = std::string(kCompareSchema) + "#summary";
  s["summary"] = compare_summary(report);
  auto side = open_out(sidecar(path));
  side << s.dump(2) << '\n';
}

}  // namespace approxflow
