#ifndef PLAGUESIM_H
#define PLAGUESIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum PsStatus {
  PS_STATUS_OK = 0,
  PS_STATUS_NULL_POINTER = 1,
  PS_STATUS_INVALID_UTF8 = 2,
  PS_STATUS_PARSE = 3,
  PS_STATUS_VALIDATION = 4,
  PS_STATUS_REJECTED = 5,
  PS_STATUS_INVALID = 6,
  PS_STATUS_IO = 7,
  PS_STATUS_PANIC = 8,
} PsStatus;

/**
 * Opaque simulation handle.
 */
typedef struct PlagueSimulation PlagueSimulation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL if none. Free with
 * [`ps_string_free`].
 */
char *ps_last_error(void);

/**
 * Crate version as a static string; do not free.
 */
const char *ps_version(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void ps_string_free(char *s);

/**
 * Builds a simulation at tick 0.
 *
 * # Safety
 * `scenario_text` must be a NUL-terminated string; `out` must be writable.
 */
enum PsStatus ps_simulation_new(const char *scenario_text,
                                uint64_t seed,
                                bool record_events,
                                struct PlagueSimulation **out);

/**
 * Destroys a handle. NULL is ignored.
 *
 * # Safety
 * `sim` must come from [`ps_simulation_new`] and not be used afterwards.
 */
void ps_simulation_free(struct PlagueSimulation *sim);

/**
 * Advances up to `n` ticks, stopping early once the run is finished. Writes
 * the current tick to `out_tick` when it is not NULL.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum PsStatus ps_simulation_step(struct PlagueSimulation *sim, uint64_t n, uint64_t *out_tick);

/**
 * Steps until the run is finished.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum PsStatus ps_simulation_run_to_end(struct PlagueSimulation *sim);

/**
 * # Safety
 * `sim` must be a live handle; `out_tick` and `out_finished` must be writable.
 */
enum PsStatus ps_simulation_status(struct PlagueSimulation *sim,
                                   uint64_t *out_tick,
                                   bool *out_finished);

/**
 * Queues an intervention (JSON, same shape as a scenario schedule entry
 * without `tick`) for the next tick. Writes that tick to `out_applies_at`
 * when it is not NULL.
 *
 * # Safety
 * `sim` must be a live handle and `intervention_json` NUL-terminated.
 */
enum PsStatus ps_simulation_submit(struct PlagueSimulation *sim,
                                   const char *intervention_json,
                                   uint64_t *out_applies_at);

/**
 * Latest tick snapshot as JSON.
 *
 * # Safety
 * `sim` must be a live handle; `out` must be writable.
 */
enum PsStatus ps_simulation_snapshot_json(struct PlagueSimulation *sim, char **out);

/**
 * Run summary so far as JSON.
 *
 * # Safety
 * `sim` must be a live handle; `out` must be writable.
 */
enum PsStatus ps_simulation_summary_json(struct PlagueSimulation *sim, char **out);

/**
 * Event log as NDJSON; empty unless the handle records events.
 *
 * # Safety
 * `sim` must be a live handle; `out` must be writable.
 */
enum PsStatus ps_simulation_events_ndjson(struct PlagueSimulation *sim, char **out);

/**
 * Runs a scenario to the end in one call and returns its summary as JSON.
 *
 * # Safety
 * `scenario_text` must be NUL-terminated; `out` must be writable.
 */
enum PsStatus ps_run_summary_json(const char *scenario_text, uint64_t seed, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PLAGUESIM_H */
