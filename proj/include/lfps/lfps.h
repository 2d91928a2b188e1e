/* C interface to the LFPS sparse-indexing library.
 *
 * Objects are opaque handles released with the matching *_free function.
 * Every fallible call returns an lfps_status; on failure a message is kept
 * per thread and can be read with lfps_last_error(). */
#ifndef LFPS_LFPS_H
#define LFPS_LFPS_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LFPS_API __declspec(dllexport)
#else
#define LFPS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lfps_status {
  LFPS_OK = 0,
  LFPS_E_INVALID_ARGUMENT = 1,
  LFPS_E_DIMENSION_MISMATCH = 2,
  LFPS_E_NUMERIC = 3,
  LFPS_E_INVALID_STATE = 4,
  LFPS_E_IO = 5,
  LFPS_E_BAD_MAGIC = 6,
  LFPS_E_BAD_VERSION = 7,
  LFPS_E_BAD_CHECKSUM = 8,
  LFPS_E_TRUNCATED = 9,
  LFPS_E_STRUCTURE = 10,
  LFPS_E_INTERNAL = 99
} lfps_status;

typedef enum lfps_bypass_mode { LFPS_BYPASS_MEAN_ONLY = 0, LFPS_BYPASS_SINK_AVERAGE = 1 } lfps_bypass_mode;

typedef enum lfps_run_mode { LFPS_MODE_LFPS = 0, LFPS_MODE_TOPK_ORACLE = 1, LFPS_MODE_FULL = 2 } lfps_run_mode;

#define LFPS_MAX_OFFSETS 32
#define LFPS_MAX_PATTERNS 64

LFPS_API const char* lfps_status_name(lfps_status status);
/* Message of the most recent failure on this thread, "" if none. */
LFPS_API const char* lfps_last_error(void);
LFPS_API const char* lfps_version(void);

typedef struct lfps_config {
  size_t d;
  size_t s;
  double r;
  double epsilon;
  double a;
  int64_t expansion_offsets[LFPS_MAX_OFFSETS];
  size_t offset_count;
  size_t sink_count;
  size_t local_window;
  int bypass_mode; /* lfps_bypass_mode */
  int exhaustive_fallback;
} lfps_config;

LFPS_API void lfps_config_default(lfps_config* config);

/* ---- traces ---- */

typedef struct lfps_synthetic_spec {
  size_t layers;
  size_t heads;
  size_t n_prefill;
  size_t steps;
  size_t d;
  size_t prefill_window;
  size_t sink_count;
  size_t vertical_positions[LFPS_MAX_PATTERNS];
  size_t vertical_count;
  size_t slash_offsets[LFPS_MAX_PATTERNS];
  size_t slash_count;
  size_t slash_band;
  double signal_gain;
  double slash_gain;
  double noise_scale;
  double query_coherence;
  double pattern_strength;
  size_t cluster_width;
  double sink_gain;
  uint64_t seed;
} lfps_synthetic_spec;

LFPS_API void lfps_synthetic_default(lfps_synthetic_spec* spec);

typedef struct lfps_trace_info {
  uint64_t layers;
  uint64_t heads;
  uint64_t d;
  uint64_t n_prefill;
  uint64_t steps;
  uint64_t prefill_window;
  uint64_t sink_count;
  uint64_t value_encoding;
  uint32_t checksum; /* CRC-32 stored in the serialized trailer */
  uint64_t byte_size;
} lfps_trace_info;

typedef struct lfps_trace lfps_trace;

LFPS_API lfps_status lfps_trace_generate(const lfps_synthetic_spec* spec, lfps_trace** out);
LFPS_API lfps_status lfps_trace_read(const char* path, lfps_trace** out);
LFPS_API lfps_status lfps_trace_read_memory(const uint8_t* bytes, size_t size, lfps_trace** out);
LFPS_API lfps_status lfps_trace_write(const lfps_trace* trace, const char* path);
/* Serializes into buf when capacity suffices; *size receives the byte count
 * either way. Pass buf = NULL to query the size. */
LFPS_API lfps_status lfps_trace_serialize(const lfps_trace* trace, uint8_t* buf, size_t capacity,
                                          size_t* size);
LFPS_API lfps_status lfps_trace_info_get(const lfps_trace* trace, lfps_trace_info* info);
LFPS_API void lfps_trace_free(lfps_trace* trace);

/* ---- single-head sessions ---- */

typedef struct lfps_session lfps_session;

typedef struct lfps_step_info {
  uint64_t n;
  uint64_t k;
  uint64_t c0;
  uint64_t c1;
  uint64_t c2;
  uint64_t probe;
  uint64_t dot_products;
  uint64_t clamps;
  int bypassed;
  double rho;
} lfps_step_info;

/* Bootstraps a session from the prefill of head `head_index` (layer-major).
 * config->d, s and sink_count of 0 adopt the trace values. */
LFPS_API lfps_status lfps_session_create(const lfps_trace* trace, size_t head_index,
                                         const lfps_config* config, lfps_session** out);
/* q, key, value and output hold d doubles; output and info may be NULL.
 * A failed step leaves the session unchanged. */
LFPS_API lfps_status lfps_session_step(lfps_session* session, const double* q, const double* key,
                                       const double* value, double k_fraction, double* output,
                                       lfps_step_info* info);
LFPS_API uint64_t lfps_session_state_hash(const lfps_session* session);
LFPS_API size_t lfps_session_size(const lfps_session* session);
LFPS_API void lfps_session_free(lfps_session* session);

/* ---- trace runs and reports ---- */

typedef struct lfps_run_options {
  int mode; /* lfps_run_mode */
  double k_fraction;
  lfps_config config;
  int oracle;
  size_t threads;
  int snapshot;
} lfps_run_options;

/* Defaults leave config d, s and sink_count at 0 (taken from the trace). */
LFPS_API void lfps_run_options_default(lfps_run_options* options);

typedef struct lfps_aggregates {
  uint64_t records;
  double mean_eta;
  double median_eta;
  double mean_candidate_fraction;
  double bypass_rate;
  double mean_output_error;
  double steps_per_sec_per_head;
  double tokens_per_sec;
  double reference_steps_per_sec_per_head;
  double reference_tokens_per_sec;
  uint64_t oracle_calls;
  uint64_t table_clamps;
  uint64_t c0_not_in_c1;
} lfps_aggregates;

typedef struct lfps_report lfps_report;

LFPS_API lfps_status lfps_run(const lfps_trace* trace, const lfps_run_options* options,
                              lfps_report** out);
LFPS_API lfps_status lfps_report_aggregates(const lfps_report* report, lfps_aggregates* out);
/* NUL-terminated canonical JSON / CSV owned by the report, valid until free. */
LFPS_API const char* lfps_report_json(const lfps_report* report);
LFPS_API const char* lfps_report_csv(const lfps_report* report);
LFPS_API lfps_status lfps_report_write_json(const lfps_report* report, const char* path);
LFPS_API lfps_status lfps_report_write_csv(const lfps_report* report, const char* path);
LFPS_API void lfps_report_free(lfps_report* report);

#ifdef __cplusplus
}
#endif

#endif
