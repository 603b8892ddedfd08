#ifndef ARNOLD_H
#define ARNOLD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ArnoldStatus {
  ARNOLD_STATUS_OK = 0,
  ARNOLD_STATUS_NULL_POINTER = 1,
  ARNOLD_STATUS_INVALID_UTF8 = 2,
  // Malformed JSON or a value that fails validation.
  ARNOLD_STATUS_INVALID_INPUT = 3,
  // Not enough free capacity for the request.
  ARNOLD_STATUS_INFEASIBLE = 4,
  // The time limit was hit; the output holds the best placement found.
  ARNOLD_STATUS_TIMEOUT = 5,
  // A call that does not fit the scheduler's current state.
  ARNOLD_STATUS_INVALID_STATE = 6,
  ARNOLD_STATUS_INTERNAL = 7,
} ArnoldStatus;

typedef enum ArnoldUnit {
  ARNOLD_UNIT_ROW = 0,
  ARNOLD_UNIT_COLUMN = 1,
} ArnoldUnit;

// A stateful queue scheduler with an oracle JCT predictor.
typedef struct ArnoldScheduler ArnoldScheduler;

// A built cluster topology.
typedef struct ArnoldTopology ArnoldTopology;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static string. Do not free.
const char *arnold_version(void);

// Message for the last failed call on this thread, or null. Valid until the
// next call into the library from the same thread. Do not free.
const char *arnold_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void arnold_string_free(char *s);

// Builds a topology from its JSON description.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum ArnoldStatus arnold_topology_from_json(const char *json, struct ArnoldTopology **out);

// # Safety
// `topo` must come from `arnold_topology_from_json` and not be freed twice.
void arnold_topology_free(struct ArnoldTopology *topo);

// Node count, or 0 for null.
//
// # Safety
// `topo` must be null or a live handle.
uintptr_t arnold_topology_node_count(const struct ArnoldTopology *topo);

// Minipod count, or 0 for null.
//
// # Safety
// `topo` must be null or a live handle.
uintptr_t arnold_topology_minipod_count(const struct ArnoldTopology *topo);

// Places a job on an otherwise empty cluster.
//
// `alpha` is the DP weight; pass NaN to look it up in the bundled profiles.
// On success `*out_json` holds the placement and `*out_score` (if non-null)
// its weighted spread. `ARNOLD_STATUS_TIMEOUT` also sets both outputs.
//
// # Safety
// `topo` must be a live handle, `job_json` a NUL-terminated string and
// `out_json` writable.
enum ArnoldStatus arnold_schedule(const struct ArnoldTopology *topo,
                                  const char *job_json,
                                  double alpha,
                                  enum ArnoldUnit unit,
                                  double time_limit,
                                  char **out_json,
                                  double *out_score);

// Solves a MIP instance given as JSON and writes the solution as JSON.
//
// # Safety
// `instance_json` must be a NUL-terminated string and `out_json` writable.
enum ArnoldStatus arnold_solve(const char *instance_json, double time_limit, char **out_json);

// Creates a queue scheduler over a copy of `topo`. `alpha` weights the LPJ
// reservation; `noise` and `seed` configure the oracle JCT predictor.
//
// # Safety
// `topo` must be a live handle and `out` writable.
enum ArnoldStatus arnold_scheduler_new(const struct ArnoldTopology *topo,
                                       double alpha,
                                       uint32_t noise,
                                       uint64_t seed,
                                       struct ArnoldScheduler **out);

// # Safety
// `s` must come from `arnold_scheduler_new` and not be freed twice.
void arnold_scheduler_free(struct ArnoldScheduler *s);

// Queues a job (trace JSON object). An LPJ reserves its zone at once.
//
// # Safety
// `s` must be a live handle and `job_json` a NUL-terminated string.
enum ArnoldStatus arnold_scheduler_submit(struct ArnoldScheduler *s, const char *job_json);

// Runs one policy pass at time `now` and writes the outcome as JSON:
// `{"scheduled": [{"job", "nodes", "branch"}], "delayed": [...]}`.
//
// # Safety
// `s` must be a live handle and `out_json` writable.
enum ArnoldStatus arnold_scheduler_step(struct ArnoldScheduler *s, uint64_t now, char **out_json);

// Marks a running job finished. If this frees the last node a waiting LPJ
// needed, `*out_json` receives its start as JSON, otherwise `null`.
// `out_json` may be null.
//
// # Safety
// `s` must be a live handle; `out_json` null or writable.
enum ArnoldStatus arnold_scheduler_complete(struct ArnoldScheduler *s,
                                            uint64_t job,
                                            uint64_t now,
                                            char **out_json);

// Handles the LPJ's arrival: evicts preemptible jobs from its zone and
// reports violations, as JSON `{"preempted", "violations", "started"}`.
//
// # Safety
// `s` must be a live handle and `out_json` writable.
enum ArnoldStatus arnold_scheduler_lpj_arrival(struct ArnoldScheduler *s,
                                               uint64_t now,
                                               char **out_json);

// Current allocation and retention rates. Either output may be null.
//
// # Safety
// `s` must be a live handle; outputs null or writable.
enum ArnoldStatus arnold_scheduler_rates(const struct ArnoldScheduler *s,
                                         double *allocation,
                                         double *retention);

// Replays a JSON-lines trace and writes the per-pass time series as CSV.
//
// # Safety
// `topo` must be a live handle, `trace_jsonl` a NUL-terminated string and
// `out_csv` writable.
enum ArnoldStatus arnold_simulate(const struct ArnoldTopology *topo,
                                  const char *trace_jsonl,
                                  double alpha,
                                  uint32_t noise,
                                  uint64_t seed,
                                  char **out_csv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ARNOLD_H */
