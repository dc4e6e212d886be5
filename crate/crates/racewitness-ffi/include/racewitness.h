#ifndef RACEWITNESS_H
#define RACEWITNESS_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. Zero is success.
 */
typedef enum RwStatus {
  RW_STATUS_OK = 0,
  RW_STATUS_NULL_ARGUMENT = 1,
  RW_STATUS_PARSE_ERROR = 2,
  RW_STATUS_IO_ERROR = 3,
  RW_STATUS_OUT_OF_RANGE = 4,
  RW_STATUS_INVALID_ARGUMENT = 5,
  RW_STATUS_BUFFER_TOO_SMALL = 6,
  RW_STATUS_PANIC = 7,
} RwStatus;

typedef enum RwFormat {
  RW_FORMAT_SIMPLE = 0,
  RW_FORMAT_STD = 1,
} RwFormat;

/**
 * The outcome of an analysis.
 */
typedef struct RwResult RwResult;

/**
 * A parsed trace.
 */
typedef struct RwTrace RwTrace;

/**
 * Analysis options; pass NULL for defaults.
 */
typedef struct RwOptions {
  /**
   * Worker threads, 0 for one per core.
   */
  size_t jobs;
  /**
   * Candidate pair budget, 0 for unlimited.
   */
  size_t max_pairs;
} RwOptions;

/**
 * One reported race.
 */
typedef struct RwRace {
  uint32_t e1;
  uint32_t e2;
  /**
   * Critical-section completion enlarged a cone for this pair.
   */
  bool cp4_used;
  bool inserted;
} RwRace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread. Valid until the next
 * call on the same thread; never NULL.
 */
const char *rw_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rw_version(void);

/**
 * Parse `len` bytes of trace text.
 *
 * # Safety
 * `data` must point to `len` readable bytes; `out` must be writable.
 */
enum RwStatus rw_trace_parse(const uint8_t *data,
                             size_t len,
                             enum RwFormat format,
                             bool init_writes,
                             struct RwTrace **out);

/**
 * Read and parse a trace file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum RwStatus rw_trace_load(const char *path,
                            enum RwFormat format,
                            bool init_writes,
                            struct RwTrace **out);

/**
 * # Safety
 * `t` must come from `rw_trace_parse` or `rw_trace_load`, or be NULL.
 */
void rw_trace_free(struct RwTrace *t);

/**
 * Number of input events, 0 for NULL.
 *
 * # Safety
 * `t` must be a live trace handle or NULL.
 */
size_t rw_trace_event_count(const struct RwTrace *t);

/**
 * Run the analysis.
 *
 * # Safety
 * `t` must be a live trace handle, `opts` NULL or readable, `out` writable.
 */
enum RwStatus rw_analyze(const struct RwTrace *t,
                         const struct RwOptions *opts,
                         struct RwResult **out);

/**
 * # Safety
 * `r` must come from `rw_analyze`, or be NULL.
 */
void rw_result_free(struct RwResult *r);

/**
 * Number of reported races (before location deduplication).
 *
 * # Safety
 * `r` must be a live result handle or NULL.
 */
size_t rw_result_race_count(const struct RwResult *r);

/**
 * Number of pairs left unresolved.
 *
 * # Safety
 * `r` must be a live result handle or NULL.
 */
size_t rw_result_unresolved_count(const struct RwResult *r);

/**
 * True when no race can have been missed.
 *
 * # Safety
 * `r` must be a live result handle or NULL.
 */
bool rw_result_complete(const struct RwResult *r);

/**
 * Fetch race `i`, in report order.
 *
 * # Safety
 * `t` and `r` must be live handles, `r` produced from `t`; `out` writable.
 */
enum RwStatus rw_result_race(const struct RwTrace *t,
                             const struct RwResult *r,
                             size_t i,
                             struct RwRace *out);

/**
 * Copy the witness of race `i` into `buf` as event indices, init writes
 * omitted. `*len` receives the full length; when it exceeds `cap` nothing
 * is copied and `BufferTooSmall` is returned, so a NULL `buf` with `cap`
 * 0 queries the size.
 *
 * # Safety
 * `t` and `r` must be live handles, `r` produced from `t`; `buf` must hold
 * `cap` writable elements; `len` must be writable.
 */
enum RwStatus rw_result_witness(const struct RwTrace *t,
                                const struct RwResult *r,
                                size_t i,
                                uint32_t *buf,
                                size_t cap,
                                size_t *len);

/**
 * Decide one pair given by input indices.
 *
 * # Safety
 * `t` must be a live trace handle; `is_race` must be writable.
 */
enum RwStatus rw_check_pair(const struct RwTrace *t, uint32_t i1, uint32_t i2, bool *is_race);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RACEWITNESS_H */
