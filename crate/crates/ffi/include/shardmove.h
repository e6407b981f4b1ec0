#ifndef SHARDMOVE_H
#define SHARDMOVE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define SP_POLICY_HASH 0

#define SP_POLICY_PARTITION 1

#define SP_POLICY_SCHEDULER 2

#define SP_MODE_2PC 0

#define SP_MODE_MUTEX 1

#define SP_LOAD_VIEW_LIVE 0

#define SP_LOAD_VIEW_BEACON 1

/**
 * Result codes.
 */
typedef enum SpStatus {
  SP_STATUS_OK = 0,
  SP_STATUS_NULL_ARGUMENT = 1,
  SP_STATUS_INVALID_UTF8 = 2,
  SP_STATUS_CONFIG = 3,
  SP_STATUS_IO = 4,
  SP_STATUS_PARSE = 5,
  SP_STATUS_SIMULATION = 6,
  SP_STATUS_PANIC = 7,
} SpStatus;

/**
 * The result of one simulation run.
 */
typedef struct SpRun SpRun;

/**
 * A loaded or generated workload.
 */
typedef struct SpWorkload SpWorkload;

/**
 * Simulation parameters. Start from [`sp_sim_params_default`].
 */
typedef struct SpSimParams {
  uint32_t shards;
  uint64_t cross_shard_cost;
  uint64_t capacity;
  double mempool_ratio;
  uint32_t window;
  /**
   * One of the `SP_POLICY_*` constants.
   */
  uint32_t policy;
  /**
   * One of the `SP_MODE_*` constants.
   */
  uint32_t mode;
  bool ca_migration;
  bool economics;
  uint64_t epoch_length;
  uint32_t miners_per_shard;
  uint64_t seed;
  /**
   * 0 runs until the workload drains.
   */
  uint64_t max_rounds;
  /**
   * One of the `SP_LOAD_VIEW_*` constants.
   */
  uint32_t load_view;
} SpSimParams;

typedef struct SpSummary {
  uint64_t rounds;
  uint64_t executed;
  uint64_t cross_shard;
  uint64_t migrations;
  double throughput;
  double mean_latency;
  uint64_t wasted_capacity;
  double cross_shard_ratio;
  uint64_t pending;
} SpSummary;

typedef struct SpRoundStats {
  uint64_t round;
  uint64_t executed;
  uint64_t wasted;
  uint64_t cross_shard;
  uint64_t migrations;
} SpRoundStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Default parameters.
 */
struct SpSimParams sp_sim_params_default(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *sp_last_error(void);

/**
 * Loads a trace file.
 *
 * # Safety
 * `path` must be NULL or a NUL-terminated string; `out` must be NULL or
 * writable.
 */
enum SpStatus sp_workload_load_trace(const char *path, struct SpWorkload **out);

/**
 * Generates a named synthetic workload (`zipf`, `communities`, ...) with
 * default generator parameters. `shards` is only read by `all-intra` and
 * `all-cross`.
 *
 * # Safety
 * `name` must be NULL or a NUL-terminated string; `out` must be NULL or
 * writable.
 */
enum SpStatus sp_workload_generate(const char *name,
                                   size_t accounts,
                                   size_t txs,
                                   uint32_t shards,
                                   uint64_t seed,
                                   struct SpWorkload **out);

/**
 * Number of transactions, 0 for NULL.
 *
 * # Safety
 * `workload` must be NULL or a live handle.
 */
size_t sp_workload_len(const struct SpWorkload *workload);

/**
 * # Safety
 * `workload` must be NULL or a handle not yet freed.
 */
void sp_workload_free(struct SpWorkload *workload);

/**
 * Runs a simulation to completion.
 *
 * # Safety
 * Pointers must be NULL or valid; `out` writable.
 */
enum SpStatus sp_run(const struct SpSimParams *params,
                     const struct SpWorkload *workload,
                     struct SpRun **out);

/**
 * # Safety
 * `run` must be NULL or a live handle; `out` NULL or writable.
 */
enum SpStatus sp_run_summary(const struct SpRun *run, struct SpSummary *out);

/**
 * Number of simulated rounds, 0 for NULL.
 *
 * # Safety
 * `run` must be NULL or a live handle.
 */
size_t sp_run_round_count(const struct SpRun *run);

/**
 * Statistics of round `index`.
 *
 * # Safety
 * `run` must be NULL or a live handle; `out` NULL or writable.
 */
enum SpStatus sp_run_round(const struct SpRun *run, size_t index, struct SpRoundStats *out);

/**
 * Writes `rounds.csv`, `summary.csv` and, with economics on, `epochs.csv`
 * into `dir` (created if missing).
 *
 * # Safety
 * `run` must be NULL or a live handle; `dir` NULL or a NUL-terminated
 * string.
 */
enum SpStatus sp_run_write_csv(const struct SpRun *run, const char *dir);

/**
 * # Safety
 * `run` must be NULL or a handle not yet freed.
 */
void sp_run_free(struct SpRun *run);

/**
 * Hash placement of a 32-byte account id over `k` shards.
 *
 * # Safety
 * `id` must be NULL or point to 32 readable bytes; `out` NULL or writable.
 */
enum SpStatus sp_hash_place(const uint8_t *id, uint32_t k, uint32_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHARDMOVE_H */
