/* volprop: slice-propagation segmentation of CT volumes, C interface.
 *
 * Every function returns a volprop_status. On failure the thread-local
 * volprop_last_error() / volprop_last_error_subject() describe it until the
 * next call on the same thread. Strings returned through char** are heap
 * allocated and released with volprop_string_free. */
#ifndef VOLPROP_VOLPROP_H
#define VOLPROP_VOLPROP_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define VOLPROP_API __declspec(dllexport)
#else
#define VOLPROP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum volprop_status {
  VOLPROP_OK = 0,
  VOLPROP_INVALID_ARGUMENT,
  VOLPROP_IO_FAILURE,
  VOLPROP_MALFORMED_HEADER,
  VOLPROP_UNSUPPORTED_DATATYPE,
  VOLPROP_DIMENSION_MISMATCH,
  VOLPROP_EMPTY_ROI,
  VOLPROP_TILE_TOO_SMALL,
  VOLPROP_EMPTY_MASK,
  VOLPROP_EXTENT_TOO_SMALL,
  VOLPROP_SLOT_OVERFLOW,
  VOLPROP_EMPTY_PROMPTS,
  VOLPROP_BACKEND_FAILURE,
  VOLPROP_MISSING_GRAPH,
  VOLPROP_SIGNATURE_MISMATCH,
  VOLPROP_RUNTIME_UNAVAILABLE,
  VOLPROP_BOTH_EMPTY,
  VOLPROP_EITHER_EMPTY,
  VOLPROP_ZERO_VECTOR,
  VOLPROP_INSUFFICIENT_CANDIDATES,
  VOLPROP_CONFIG_INVALID,
  VOLPROP_MANIFEST_MISSING,
  VOLPROP_GRID_INVALID,
  VOLPROP_NO_RESULTS,
  VOLPROP_INTERNAL = 99
} volprop_status;

typedef struct volprop_config volprop_config;
typedef struct volprop_grid volprop_grid;

/* Receives one line of progress text (no trailing newline). */
typedef void (*volprop_log_fn)(void* user, const char* line);

VOLPROP_API const char* volprop_version(void);
VOLPROP_API const char* volprop_status_name(volprop_status status);
VOLPROP_API const char* volprop_last_error(void);
VOLPROP_API const char* volprop_last_error_subject(void);
VOLPROP_API void volprop_string_free(char* text);

/* ---- run configuration ---- */
VOLPROP_API volprop_status volprop_config_load(const char* path, volprop_config** out);
VOLPROP_API volprop_status volprop_config_parse(const char* json_text, volprop_config** out);
VOLPROP_API volprop_status volprop_config_preset(const char* name, volprop_config** out);
/* key is dotted ("memory.tau"), value is a JSON literal ("0.3", "true", "\"fml\""). */
VOLPROP_API volprop_status volprop_config_set(volprop_config* config, const char* key, const char* json_value);
/* "synthetic" or "onnx:<dir>". */
VOLPROP_API volprop_status volprop_config_set_backend(volprop_config* config, const char* flag);
VOLPROP_API volprop_status volprop_config_id(const volprop_config* config, char** out);
VOLPROP_API volprop_status volprop_config_to_json(const volprop_config* config, char** out);
VOLPROP_API void volprop_config_free(volprop_config* config);

/* ---- running ---- */
typedef struct volprop_run_options {
  const char* out_dir;
  size_t workers;      /* 0 behaves as 1 */
  int keep_going;      /* record failing entries and continue */
  int profile;         /* write per-stage timings */
  const char* cache_dir; /* embedding cache; NULL disables */
  volprop_log_fn log;
  void* log_user;
} volprop_run_options;

typedef struct volprop_run_summary {
  char config_id[32];
  size_t records;
  size_t failures;
  double mean_dice;
} volprop_run_summary;

/* Segments every manifest entry; results go to <out_dir>/<config_id>/. */
VOLPROP_API volprop_status volprop_run(const volprop_config* config, const char* manifest_path,
                                       const volprop_run_options* options, volprop_run_summary* summary);

/* ---- ablation grids ---- */
VOLPROP_API volprop_status volprop_grid_load(const char* path, volprop_grid** out);
VOLPROP_API size_t volprop_grid_size(const volprop_grid* grid);
/* Borrowed strings, valid until volprop_grid_free. */
VOLPROP_API volprop_status volprop_grid_row(const volprop_grid* grid, size_t index, const char** experiment,
                                            const char** label, const char** config_id);
VOLPROP_API void volprop_grid_free(volprop_grid* grid);

typedef struct volprop_ablate_summary {
  size_t rows;
  size_t distinct;
  size_t executed;
  size_t skipped;
} volprop_ablate_summary;

/* Runs each distinct config once; completed configs are skipped. */
VOLPROP_API volprop_status volprop_ablate(const volprop_grid* grid, const char* manifest_path,
                                          const volprop_run_options* options, volprop_ablate_summary* summary);

/* ---- reports ---- */
/* Writes <out_dir>/report.md and report.json; markdown may be NULL. */
VOLPROP_API volprop_status volprop_report(const char* out_dir, const char* baseline, char** markdown);

/* Aggregates <out_dir>/<id>/timings.csv files into a per-stage summary. */
VOLPROP_API volprop_status volprop_profile_report(const char* out_dir, const char* format, const char* path);

/* ---- datasets ---- */
typedef struct volprop_curate_options {
  const char* dataset_root;
  const char* out_dir;
  const char* rules_path; /* NULL: built-in bone table */
  int verbose;
  volprop_log_fn log;
  void* log_user;
} volprop_curate_options;

typedef struct volprop_curate_summary {
  size_t cases_scanned;
  size_t candidates;
  size_t ineligible;
} volprop_curate_summary;

/* Aggregates labels, filters eligible masks, writes <out_dir>/candidates.jsonl. */
VOLPROP_API volprop_status volprop_curate(const volprop_curate_options* options, volprop_curate_summary* summary);

/* Samples a balanced split from a candidates manifest. split is
 * "ablation500", "final2500" or a custom name (then per_class and seed are
 * required). per_class / seed of 0 keep the split's defaults. */
VOLPROP_API volprop_status volprop_build_split(const char* candidates_path, const char* split, size_t per_class,
                                               uint64_t seed, const char* out_path, size_t* entries);

/* Number of (case, class) pairs shared by two manifests. */
VOLPROP_API volprop_status volprop_manifest_overlap(const char* a_path, const char* b_path, size_t* shared);

VOLPROP_API volprop_status volprop_manifest_count(const char* path, size_t* entries);

/* Writes count sphere phantoms and <dir>/manifest.jsonl. */
VOLPROP_API volprop_status volprop_phantom_suite(const char* dir, size_t count);

/* Checks a model directory against the graph signature manifest. */
VOLPROP_API volprop_status volprop_onnx_check(const char* model_dir);

#ifdef __cplusplus
}
#endif

#endif /* VOLPROP_VOLPROP_H */
