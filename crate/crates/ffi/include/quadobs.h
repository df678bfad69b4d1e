#ifndef QUADOBS_H
#define QUADOBS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call. Values 2 to 4 match the command-line exit codes.
typedef enum QoStatus {
  QO_STATUS_OK = 0,
  QO_STATUS_NULL_POINTER = 1,
  QO_STATUS_CONFIG = 2,
  QO_STATUS_NUMERICAL = 3,
  QO_STATUS_IO = 4,
  QO_STATUS_INVALID_UTF8 = 5,
  QO_STATUS_OUT_OF_RANGE = 6,
  QO_STATUS_PANIC = 7,
} QoStatus;

typedef enum QoCondition {
  QO_CONDITION_GRAMIAN_DEF3 = 0,
  QO_CONDITION_PROP2 = 1,
  QO_CONDITION_PROP3 = 2,
  QO_CONDITION_PROP4 = 3,
  QO_CONDITION_PROP5 = 4,
  QO_CONDITION_RANK_THM2 = 5,
} QoCondition;

// Opaque list of PE reports.
typedef struct QoPeReports QoPeReports;

// Opaque scenario handle.
typedef struct QoScenario QoScenario;

// Opaque simulation trace handle.
typedef struct QoTrace QoTrace;

// Scalar columns of one trace row.
typedef struct QoTraceRow {
  double t;
  double y;
  double yhat;
  double err_x;
  double err_z;
  double riccati_min_eig;
} QoTraceRow;

// One PE report row. `margin` is NaN for skipped rows.
typedef struct QoPeEntry {
  enum QoCondition condition;
  double window_start;
  double delta;
  double margin;
  double threshold;
  bool pass;
  bool skipped;
} QoPeEntry;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread, or NULL. The pointer
// stays valid until the next `qo_*` call on the same thread.
const char *qo_last_error(void);

// Library version as a static NUL-terminated string.
const char *qo_version(void);

// Loads a scenario file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum QoStatus qo_scenario_load(const char *path, struct QoScenario **out);

// Parses a scenario from TOML text.
//
// # Safety
// `toml` must be a NUL-terminated string and `out` a valid pointer.
enum QoStatus qo_scenario_from_toml(const char *toml, struct QoScenario **out);

// The built-in vehicle scenario in `n` dimensions.
//
// # Safety
// `out` must be a valid pointer.
enum QoStatus qo_scenario_vehicle(size_t n, struct QoScenario **out);

// # Safety
// `sc` must come from a `qo_scenario_*` constructor or be NULL.
void qo_scenario_free(struct QoScenario *sc);

// Plant dimension `n`, input count `p` and nilpotency index `m`.
//
// # Safety
// All pointers must be valid.
enum QoStatus qo_scenario_dims(const struct QoScenario *sc, size_t *n, size_t *p, size_t *m);

// Replaces the time grid with `[t_start, horizon]` at `step`.
//
// # Safety
// `sc` must be a valid scenario handle.
enum QoStatus qo_scenario_set_grid(struct QoScenario *sc, double step, double horizon);

// Sets the Riccati forgetting factor.
//
// # Safety
// `sc` must be a valid scenario handle.
enum QoStatus qo_scenario_set_theta(struct QoScenario *sc, double theta);

// Runs the plant/observer co-simulation.
//
// # Safety
// `sc` must be a valid scenario handle and `out` a valid pointer.
enum QoStatus qo_simulate(const struct QoScenario *sc, struct QoTrace **out);

// # Safety
// `trace` must come from `qo_simulate` or be NULL.
void qo_trace_free(struct QoTrace *trace);

// Number of rows; 0 for NULL.
//
// # Safety
// `trace` must be a valid trace handle or NULL.
size_t qo_trace_len(const struct QoTrace *trace);

// Scalar columns of row `k`.
//
// # Safety
// `trace` must be a valid trace handle and `out` a valid pointer.
enum QoStatus qo_trace_row(const struct QoTrace *trace, size_t k, struct QoTraceRow *out);

// Copies the true plant state and its estimate at row `k` into two buffers
// of `len` entries each; `len` must equal the plant dimension.
//
// # Safety
// `x` and `xhat` must each point to `len` writable doubles.
enum QoStatus qo_trace_states(const struct QoTrace *trace,
                              size_t k,
                              double *x,
                              double *xhat,
                              size_t len);

// Writes the trace CSV.
//
// # Safety
// `trace` must be a valid trace handle and `path` a NUL-terminated string.
enum QoStatus qo_trace_write_csv(const struct QoTrace *trace, const char *path);

// Runs every PE check on the scenario windows.
//
// # Safety
// `sc` must be a valid scenario handle and `out` a valid pointer.
enum QoStatus qo_run_pe_suite(const struct QoScenario *sc, struct QoPeReports **out);

// # Safety
// `reports` must come from `qo_run_pe_suite` or be NULL.
void qo_pe_free(struct QoPeReports *reports);

// Number of report rows; 0 for NULL.
//
// # Safety
// `reports` must be a valid report handle or NULL.
size_t qo_pe_len(const struct QoPeReports *reports);

// # Safety
// `reports` must be a valid report handle and `out` a valid pointer.
enum QoStatus qo_pe_get(const struct QoPeReports *reports, size_t k, struct QoPeEntry *out);

// Writes the PE report CSV.
//
// # Safety
// `reports` must be a valid report handle and `path` a NUL-terminated string.
enum QoStatus qo_pe_write_csv(const struct QoPeReports *reports, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QUADOBS_H */
