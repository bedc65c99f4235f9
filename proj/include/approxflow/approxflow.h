/* C interface of the approxflow engine. All handles are opaque; every
 * fallible call returns an af_status and leaves a message for
 * af_last_error() on failure. */
#ifndef APPROXFLOW_H
#define APPROXFLOW_H

#include <stddef.h>
#include <stdint.h>

#if defined(AF_BUILDING_LIBRARY)
#define AF_API __attribute__((visibility("default")))
#else
#define AF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum af_status {
  AF_OK = 0,
  AF_ERR_USAGE = 2,      /* bad argument or precondition */
  AF_ERR_PIPELINE = 3,   /* a transform failed or produced unkeyed records */
  AF_ERR_INFEASIBLE = 4, /* error-bound targets cannot be met */
  AF_ERR_INPUT = 5,      /* missing, unreadable or empty input */
  AF_ERR_INTERNAL = 6
} af_status;

typedef struct af_dataset af_dataset;
typedef struct af_result af_result;

typedef struct af_run_options {
  const char* pipeline;    /* wordcount | cooccur | group-sum | synth */
  const char* input;       /* file or directory */
  size_t partitions;       /* default 8 */
  double partition_rate;   /* (0, 1], default 1 */
  double item_rate;        /* (0, 1], default 1 */
  double confidence;       /* default 0.95 */
  uint64_t seed;
  const char* aggregation; /* "sum" (default) or "mean"; NULL = sum */
  unsigned threads;        /* 0 = one per logical core */
  int asrs;                /* nonzero: stratified reservoir instead of item sampling */
  size_t reservoir_size;   /* total reservoir size with asrs */
} af_run_options;

typedef struct af_row {
  const char* key; /* valid until the result is freed */
  double estimate;
  double variance;
  double ci_lo;
  double ci_hi;
  double epsilon;        /* inf when unbounded */
  double relative_bound; /* nan when undefined */
  size_t n_level1;
  int degenerate;
} af_row;

typedef struct af_compare_summary {
  size_t exact_keys;
  size_t approx_keys;
  size_t shared_keys;
  size_t lost_keys;
  double key_loss;
  double ci_containment;
} af_compare_summary;

typedef struct af_synth_options {
  size_t keys;
  size_t partitions;
  size_t items_per_partition;
  const char* distribution; /* "uniform" or "zipf(s)"; NULL = uniform */
  const char* value_dist;   /* "uniform", "uniform(a,b)", "normal(m,s)", "constant(c)" */
  uint64_t seed;
} af_synth_options;

AF_API const char* af_version(void);
/* Message of the last failed call on this thread; "" when none. */
AF_API const char* af_last_error(void);

AF_API void af_run_options_init(af_run_options* options);
AF_API void af_synth_options_init(af_synth_options* options);

/* Loads and samples the input at the options' rates. */
AF_API af_status af_dataset_load(const af_run_options* options, af_dataset** out);
AF_API size_t af_dataset_origin_partitions(const af_dataset* dataset);
AF_API size_t af_dataset_selected_partitions(const af_dataset* dataset);
AF_API size_t af_dataset_sampled_items(const af_dataset* dataset);
AF_API void af_dataset_free(af_dataset* dataset);
/* Runs a built-in pipeline over a loaded dataset. */
AF_API af_status af_dataset_execute(const af_dataset* dataset, const char* pipeline,
                                    const char* aggregation, unsigned threads,
                                    af_result** out);

/* Load, run and estimate in one call. */
AF_API af_status af_run(const af_run_options* options, af_result** out);
/* Ground truth at rates (1, 1); rows carry the exact value as the estimate. */
AF_API af_status af_run_exact(const af_run_options* options, af_result** out);
/* Pilot, rate search, then a run at the chosen rates. `percentiles` and
 * `bounds` hold `count` targets. `pilot_confidence` in (0, 1) sets how
 * conservatively pilot variances are treated (0.75 is the default). */
AF_API af_status af_tune(const af_run_options* options, const double* percentiles,
                         const double* bounds, size_t count, double pilot_fraction,
                         double step, double pilot_confidence, af_result** out);

AF_API size_t af_result_row_count(const af_result* result);
AF_API af_status af_result_row(const af_result* result, size_t index, af_row* row);
/* Looks up a key; AF_ERR_USAGE when absent. */
AF_API af_status af_result_find(const af_result* result, const char* key, af_row* row);
AF_API size_t af_result_warning_count(const af_result* result);
AF_API const char* af_result_warning(const af_result* result, size_t index);
/* Rates used by the run; the chosen ones after af_tune. */
AF_API void af_result_rates(const af_result* result, double* partition_rate, double* item_rate);
AF_API size_t af_result_depth(const af_result* result);
/* Tree-shape rendering; valid until the result is freed. */
AF_API const char* af_result_provenance(const af_result* result);
/* format: "csv" or "json". CSV reports also get a <path>.summary.json. */
AF_API af_status af_result_write(const af_result* result, const char* path, const char* format);
AF_API void af_result_free(af_result* result);

AF_API af_status af_compare_files(const char* approx_path, const char* exact_path,
                                  const char* out_path, const char* format,
                                  af_compare_summary* summary);
AF_API af_status af_synth(const af_synth_options* options, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif
