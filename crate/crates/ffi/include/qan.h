#ifndef QAN_H
#define QAN_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QanStatus {
  QAN_STATUS_OK = 0,
  QAN_STATUS_NULL_POINTER = 1,
  QAN_STATUS_INVALID_UTF8 = 2,
  QAN_STATUS_INVALID_CONFIG = 3,
  QAN_STATUS_EVALUATION = 4,
  QAN_STATUS_IO = 5,
  QAN_STATUS_PANIC = 6,
} QanStatus;

/**
 * Opaque scenario handle.
 */
typedef struct QanScenario QanScenario;

/**
 * Headline numbers of a single-point evaluation.
 */
typedef struct QanPlanSummary {
  double link_loss_db;
  double raman_per_gate;
  double q_mu;
  double e_mu;
  double r_bps;
  bool feasible;
} QanPlanSummary;

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *qan_last_error(void);

/**
 * Library version as a static string.
 */
const char *qan_version(void);

/**
 * Parses and validates a scenario.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a writable pointer.
 */
enum QanStatus qan_scenario_from_json(const char *json, struct QanScenario **out);

/**
 * Reads, parses and validates a scenario file.
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` a writable pointer.
 */
enum QanStatus qan_scenario_load(const char *path, struct QanScenario **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void qan_scenario_free(struct QanScenario *s);

/**
 * Sets the number at JSON pointer `path` (for example
 * `/scheme/feeder_km`) and revalidates. The handle is unchanged on error.
 *
 * # Safety
 * `s` must be a live handle and `path` a nul-terminated string.
 */
enum QanStatus qan_scenario_set_number(struct QanScenario *s, const char *path, double value);

/**
 * Evaluates the scenario's configuration.
 *
 * # Safety
 * `s` must be a live handle and `out` writable.
 */
enum QanStatus qan_plan(const struct QanScenario *s, struct QanPlanSummary *out);

/**
 * Quantum link loss in dB.
 *
 * # Safety
 * `s` must be a live handle and `out` writable.
 */
enum QanStatus qan_link_loss_db(const struct QanScenario *s, double *out);

/**
 * Secure key rate per user in bit/s; 0 when infeasible.
 *
 * # Safety
 * `s` must be a live handle and `out` writable.
 */
enum QanStatus qan_key_rate_bps(const struct QanScenario *s, double *out);

/**
 * Full plan report as JSON.
 *
 * # Safety
 * `s` must be a live handle and `out` writable.
 */
enum QanStatus qan_plan_json(const struct QanScenario *s, char **out);

/**
 * Sweep over the scenario's axes as versioned CSV.
 *
 * # Safety
 * `s` must be a live handle and `out` writable.
 */
enum QanStatus qan_sweep_csv(const struct QanScenario *s, char **out);

/**
 * Releases a string returned by this library; null is ignored.
 *
 * # Safety
 * `p` must come from this library and not be used afterwards.
 */
void qan_string_free(char *p);

#endif  /* QAN_H */
