#include "approxflow/approxflow.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>

#include "approxflow/app.hpp"
#include "approxflow/error.hpp"
#include "approxflow/pipeline.hpp"
#include "approxflow/provenance.hpp"
#include "approxflow/report.hpp"
#include "approxflow/synth.hpp"

using namespace approxflow;

struct af_dataset {
  PartitionedDataset data;
  std::string input;
};

struct af_result {
  RunReport report;
  std::optional<ExactValues> exact;
  std::string provenance;
};

namespace {

thread_local std::string last_error;

af_status fail(af_status status, const std::string& message) {
  last_error = message;
  return status;
}

template <class Fn>
af_status guarded(Fn&& fn) {
  try {
    last_error.clear();
    fn();
    return AF_OK;
  } catch (const Error& e) {
    switch (e.kind()) {
      case ErrorKind::Usage: return fail(AF_ERR_USAGE, e.what());
      case ErrorKind::Input: return fail(AF_ERR_INPUT, e.what());
      case ErrorKind::Pipeline: return fail(AF_ERR_PIPELINE, e.what());
      case ErrorKind::Infeasible: return fail(AF_ERR_INFEASIBLE, e.what());
      case ErrorKind::Internal: break;
    }
    return fail(AF_ERR_INTERNAL, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(AF_ERR_INPUT, e.what());
  } catch (const std::exception& e) {
    return fail(AF_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(AF_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw UsageError(std::string(what) + " must not be null");
}

RunRequest to_request(const af_run_options* o) {
  require(o, "options");
  require(o->pipeline, "pipeline");
  require(o->input, "input");
  RunRequest r;
  r.pipeline = o->pipeline;
  r.input = o->input;
  r.partitions = o->partitions;
  if (r.partitions == 0) throw UsageError("partitions must be at least 1");
  r.sampling.partition_rate = o->partition_rate;
  r.sampling.item_rate = o->item_rate;
  r.sampling.confidence = o->confidence;
  r.sampling.seed = o->seed;
  r.aggregation = parse_aggregation(o->aggregation ? o->aggregation : "sum");
  r.threads = o->threads;
  r.asrs = o->asrs != 0;
  r.reservoir_size = o->reservoir_size;
  return r;
}

af_result* wrap(RunReport report) {
  auto* out = new af_result{std::move(report), std::nullopt, {}};
  out->provenance = render(out->report.metadata.shape);
  return out;
}

}  // namespace

extern "C" {

const char* af_version(void) { return "0.1.0"; }

const char* af_last_error(void) { return last_error.c_str(); }

void af_run_options_init(af_run_options* o) {
  if (o == nullptr) return;
  *o = af_run_options{};
  o->partitions = 8;
  o->partition_rate = 1.0;
  o->item_rate = 1.0;
  o->confidence = 0.95;
}

void af_synth_options_init(af_synth_options* o) {
  if (o == nullptr) return;
  *o = af_synth_options{};
  o->keys = 100;
  o->partitions = 10;
  o->items_per_partition = 1000;
}

af_status af_dataset_load(const af_run_options* options, af_dataset** out) {
  return guarded([&] {
    require(out, "out");
    const RunRequest r = to_request(options);
    r.sampling.validate();
    auto data = load_text(r.input, r.partitions, r.sampling, r.threads);
    *out = new af_dataset{std::move(data), r.input.string()};
  });
}

size_t af_dataset_origin_partitions(const af_dataset* d) {
  return d ? d->data.origin_partition_count() : 0;
}

size_t af_dataset_selected_partitions(const af_dataset* d) {
  return d ? d->data.partitions().size() : 0;
}

size_t af_dataset_sampled_items(const af_dataset* d) {
  return d ? d->data.sampled_item_count() : 0;
}

void af_dataset_free(af_dataset* d) { delete d; }

af_status af_dataset_execute(const af_dataset* dataset, const char* pipeline,
                             const char* aggregation, unsigned threads, af_result** out) {
  return guarded([&] {
    require(dataset, "dataset");
    require(pipeline, "pipeline");
    require(out, "out");
    RunRequest r;
    r.pipeline = pipeline;
    r.aggregation = parse_aggregation(aggregation ? aggregation : "sum");
    const auto result = execute(dataset->data, request_chain(r), ExecOptions{threads, false});
    *out = wrap(make_report(result, pipeline, dataset->input));
  });
}

af_status af_run(const af_run_options* options, af_result** out) {
  return guarded([&] {
    require(out, "out");
    *out = wrap(run_command(to_request(options)));
  });
}

af_status af_run_exact(const af_run_options* options, af_result** out) {
  return guarded([&] {
    require(out, "out");
    const RunRequest r = to_request(options);
    ExactValues values = exact_command(r);
    RunReport report;
    report.pipeline = r.pipeline;
    report.mode = "exact";
    report.input = r.input.string();
    for (const auto& [key, v] : values) {
      ReportRow row;
      row.key = key;
      row.estimate = v;
      row.ci_lo = v;
      row.ci_hi = v;
      report.rows.push_back(std::move(row));
    }
    *out = wrap(std::move(report));
    (*out)->exact = std::move(values);
  });
}

af_status af_tune(const af_run_options* options, const double* percentiles, const double* bounds,
                  size_t count, double pilot_fraction, double step, double pilot_confidence,
                  af_result** out) {
  return guarded([&] {
    require(out, "out");
    if (count > 0) {
      require(percentiles, "percentiles");
      require(bounds, "bounds");
    }
    ErrorTargets targets;
    for (size_t i = 0; i < count; ++i) targets.targets.push_back({percentiles[i], bounds[i]});
    RateSearchConfig search;
    search.pilot_fraction = pilot_fraction;
    search.step = step;
    search.min_rate = step;
    search.pilot_confidence = pilot_confidence;
    *out = wrap(tune_command(to_request(options), targets, search));
  });
}

size_t af_result_row_count(const af_result* result) {
  return result ? result->report.rows.size() : 0;
}

namespace {

void fill_row(const ReportRow& r, af_row* row) {
  row->key = r.key.c_str();
  row->estimate = r.estimate;
  row->variance = r.variance;
  row->ci_lo = r.ci_lo;
  row->ci_hi = r.ci_hi;
  row->epsilon = r.epsilon;
  row->relative_bound = r.relative_bound;
  row->n_level1 = r.n_level1;
  row->degenerate = r.degenerate ? 1 : 0;
}

}  // namespace

af_status af_result_row(const af_result* result, size_t index, af_row* row) {
  return guarded([&] {
    require(result, "result");
    require(row, "row");
    if (index >= result->report.rows.size()) throw UsageError("row index out of range");
    fill_row(result->report.rows[index], row);
  });
}

af_status af_result_find(const af_result* result, const char* key, af_row* row) {
  return guarded([&] {
    require(result, "result");
    require(key, "key");
    require(row, "row");
    const auto& rows = result->report.rows;
    auto it = std::lower_bound(rows.begin(), rows.end(), std::string(key),
                               [](const ReportRow& r, const std::string& k) { return r.key < k; });
    if (it == rows.end() || it->key != key) throw UsageError(std::string("no key '") + key + "'");
    fill_row(*it, row);
  });
}

size_t af_result_warning_count(const af_result* result) {
  return result ? result->report.warnings.size() : 0;
}

const char* af_result_warning(const af_result* result, size_t index) {
  if (result == nullptr || index >= result->report.warnings.size()) return nullptr;
  return result->report.warnings[index].c_str();
}

void af_result_rates(const af_result* result, double* partition_rate, double* item_rate) {
  if (result == nullptr) return;
  if (partition_rate) *partition_rate = result->report.metadata.partition_rate;
  if (item_rate) *item_rate = result->report.metadata.item_rate;
}

size_t af_result_depth(const af_result* result) {
  return result ? result->report.metadata.depth() : 0;
}

const char* af_result_provenance(const af_result* result) {
  return result ? result->provenance.c_str() : "";
}

af_status af_result_write(const af_result* result, const char* path, const char* format) {
  return guarded([&] {
    require(result, "result");
    require(path, "path");
    const ReportFormat f = parse_format(format ? format : "csv");
    if (result->exact) {
      write_exact(path, *result->exact, f);
    } else {
      write_report(path, result->report, f);
    }
  });
}

void af_result_free(af_result* result) { delete result; }

af_status af_compare_files(const char* approx_path, const char* exact_path, const char* out_path,
                           const char* format, af_compare_summary* summary) {
  return guarded([&] {
    require(approx_path, "approx_path");
    require(exact_path, "exact_path");
    const ReportFormat f = parse_format(format ? format : "json");
    const CompareReport report = compare_command(approx_path, exact_path);
    if (out_path) write_compare(out_path, report, f);
    if (summary) {
      summary->exact_keys = report.exact_keys;
      summary->approx_keys = report.approx_keys;
      summary->shared_keys = report.rows.size();
      summary->lost_keys = report.lost_keys.size();
      summary->key_loss = report.key_loss;
      summary->ci_containment = report.ci_containment;
    }
  });
}

af_status af_synth(const af_synth_options* o, const char* out_dir) {
  return guarded([&] {
    require(o, "options");
    require(out_dir, "out_dir");
    SynthConfig cfg;
    cfg.keys = o->keys;
    cfg.partitions = o->partitions;
    cfg.items_per_partition = o->items_per_partition;
    cfg.key_dist = parse_key_distribution(o->distribution ? o->distribution : "uniform");
    cfg.value_dist = parse_value_distribution(o->value_dist ? o->value_dist : "uniform");
    cfg.seed = o->seed;
    write_synth(cfg, out_dir);
  });
}

}  // extern "C"
