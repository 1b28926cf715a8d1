#ifndef FEDGRAPH_H
#define FEDGRAPH_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FgStatus {
  FG_STATUS_OK = 0,
  FG_STATUS_NULL_POINTER = 1,
  FG_STATUS_INVALID_UTF8 = 2,
  FG_STATUS_INVALID_ARGUMENT = 3,
  FG_STATUS_CONFIG = 4,
  FG_STATUS_NOT_FOUND = 5,
  FG_STATUS_INVALID_TRANSITION = 6,
  FG_STATUS_IO = 7,
  FG_STATUS_PROTOCOL = 8,
  FG_STATUS_PRIVACY = 9,
  FG_STATUS_BUFFER_TOO_SMALL = 10,
  FG_STATUS_PANIC = 11,
  FG_STATUS_INTERNAL = 12,
} FgStatus;

typedef enum FgRunStatus {
  FG_RUN_STATUS_CONFIGURED = 0,
  FG_RUN_STATUS_RUNNING = 1,
  FG_RUN_STATUS_PAUSED = 2,
  FG_RUN_STATUS_STOPPED = 3,
  FG_RUN_STATUS_FINISHED = 4,
  FG_RUN_STATUS_FAILED = 5,
} FgRunStatus;

typedef enum FgComponent {
  FG_COMPONENT_EMBEDDING = 0,
  FG_COMPONENT_STRUCTURE = 1,
  FG_COMPONENT_ATTRIBUTE = 2,
} FgComponent;

/**
 * A finished run and its final representation.
 */
typedef struct FgRun FgRun;

/**
 * A run service over a directory of run records.
 */
typedef struct FgService FgService;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *fg_last_error_message(void);

const char *fg_version(void);

/**
 * Run every party in process and keep the outcome. `data_dir` may be null
 * (the current directory); relative data paths resolve against it.
 *
 * # Safety
 * `config_toml` and a non-null `data_dir` must be NUL-terminated strings;
 * `out` must be writable.
 */
enum FgStatus fg_run_simulate(const char *config_toml,
                              const char *data_dir,
                              struct FgRun **out_run);

/**
 * # Safety
 * `run` must come from `fg_run_simulate` and not be used afterwards.
 */
void fg_run_free(struct FgRun *run);

/**
 * Node count and width of the final embedding rows.
 *
 * # Safety
 * `run` must be a live handle; the out pointers must be writable.
 */
enum FgStatus fg_run_shape(const struct FgRun *run, size_t *nodes, size_t *dim);

/**
 * # Safety
 * `run` must be a live handle; `round` must be writable.
 */
enum FgStatus fg_run_last_round(const struct FgRun *run, uint64_t *round);

/**
 * Copy the row-major embedding into `buf`, which holds `len` floats.
 *
 * # Safety
 * `buf` must be valid for `len` writes.
 */
enum FgStatus fg_run_embedding(const struct FgRun *run, float *buf, size_t len);

/**
 * # Safety
 * `run` must be a live handle; `count` must be writable.
 */
enum FgStatus fg_run_edge_count(const struct FgRun *run, size_t *count);

/**
 * Reconstructed edges as row pairs, flattened: `buf` holds `len` values,
 * two per edge.
 *
 * # Safety
 * `buf` must be valid for `len` writes.
 */
enum FgStatus fg_run_edges(const struct FgRun *run, uint32_t *buf, size_t len);

/**
 * Public id of the node at `row`.
 *
 * # Safety
 * `buf` must be valid for `len` bytes; `needed` may be null.
 */
enum FgStatus fg_run_node_id(const struct FgRun *run,
                             size_t row,
                             char *buf,
                             size_t len,
                             size_t *needed);

/**
 * Released attribute histograms as JSON.
 *
 * # Safety
 * `buf` must be valid for `len` bytes; `needed` may be null.
 */
enum FgStatus fg_run_histograms_json(const struct FgRun *run,
                                     char *buf,
                                     size_t len,
                                     size_t *needed);

/**
 * Write the representation export directory.
 *
 * # Safety
 * `dir` must be a NUL-terminated string.
 */
enum FgStatus fg_run_export(const struct FgRun *run, const char *dir);

/**
 * Open (or create) a run store. `data_dir` may be null.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out_service` must be writable.
 */
enum FgStatus fg_service_open(const char *store_dir,
                              const char *data_dir,
                              struct FgService **out_service);

/**
 * # Safety
 * `service` must come from `fg_service_open` and not be used afterwards.
 * Runs still in progress keep going on their own threads.
 */
void fg_service_free(struct FgService *service);

/**
 * Create a run from a configuration document and write its id. The run is
 * only created when `buf` is large enough; on `FG_STATUS_BUFFER_TOO_SMALL`
 * nothing happened and `needed` holds a size that always suffices.
 *
 * # Safety
 * `config_toml` must be NUL-terminated; `buf` valid for `len` bytes.
 */
enum FgStatus fg_service_create_run(const struct FgService *service,
                                    const char *config_toml,
                                    bool simulated,
                                    char *buf,
                                    size_t len,
                                    size_t *needed);

/**
 * # Safety
 * `id` must be NUL-terminated.
 */
enum FgStatus fg_service_start(const struct FgService *service, const char *id);

/**
 * # Safety
 * `id` must be NUL-terminated.
 */
enum FgStatus fg_service_pause(const struct FgService *service, const char *id);

/**
 * # Safety
 * `id` must be NUL-terminated.
 */
enum FgStatus fg_service_resume(const struct FgService *service, const char *id);

/**
 * # Safety
 * `id` must be NUL-terminated.
 */
enum FgStatus fg_service_early_stop(const struct FgService *service, const char *id);

/**
 * # Safety
 * `id` must be NUL-terminated; `status` writable.
 */
enum FgStatus fg_service_status(const struct FgService *service,
                                const char *id,
                                enum FgRunStatus *status);

/**
 * Block until the run's worker exits, then report its status.
 *
 * # Safety
 * `id` must be NUL-terminated; `status` may be null.
 */
enum FgStatus fg_service_wait(const struct FgService *service,
                              const char *id,
                              enum FgRunStatus *status);

/**
 * One component of a run's representation as JSON. `checkpoint < 0` means
 * the latest; `selection_json` and `options_json` may be null.
 *
 * # Safety
 * String arguments must be NUL-terminated; `buf` valid for `len` bytes.
 */
enum FgStatus fg_service_query(const struct FgService *service,
                               const char *id,
                               int64_t checkpoint,
                               enum FgComponent component,
                               const char *selection_json,
                               const char *options_json,
                               char *buf,
                               size_t len,
                               size_t *needed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FEDGRAPH_H */
