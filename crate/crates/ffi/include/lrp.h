#ifndef LRP_H
#define LRP_H

/* Generated by cbindgen from crates/ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. The nonzero core codes match the `lrp` exit codes.
 */
typedef enum LrpStatus {
  LRP_STATUS_OK = 0,
  LRP_STATUS_ERROR = 1,
  LRP_STATUS_INVARIANT_VIOLATION = 2,
  LRP_STATUS_INFEASIBLE = 3,
  LRP_STATUS_IO = 4,
  LRP_STATUS_NULL_ARGUMENT = 5,
  LRP_STATUS_INVALID_ARGUMENT = 6,
  LRP_STATUS_BUFFER_TOO_SMALL = 7,
  LRP_STATUS_PANIC = 8,
} LrpStatus;

/**
 * Walk clock for heat-kernel queries.
 */
typedef enum LrpMode {
  LRP_MODE_DISCRETE = 0,
  LRP_MODE_LAZY = 1,
  LRP_MODE_CONTINUOUS = 2,
} LrpMode;

/**
 * A sampled or loaded graph on a box or torus region.
 */
typedef struct LrpGraph LrpGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *lrp_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length
 * without the terminator, or 0 when there is no error.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
uintptr_t lrp_last_error_message(char *buf, uintptr_t len);

/**
 * Samples a configuration with `p = 1 - exp(-beta |x-y|^{-s})` on the box
 * (`torus == 0`) or torus of side `2n+1` in dimension `d`.
 *
 * # Safety
 * `out` must be a valid pointer; on success it receives a handle to free
 * with [`lrp_graph_free`].
 */
enum LrpStatus lrp_graph_sample(uint32_t d,
                                uint64_t n,
                                double s,
                                double beta,
                                int32_t torus,
                                uint64_t seed,
                                struct LrpGraph **out);

/**
 * Loads an `lrp v1` edge-list file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LrpStatus lrp_graph_read(const char *path, struct LrpGraph **out);

/**
 * Writes the graph as an `lrp v1` edge-list file.
 *
 * # Safety
 * `g` must be a live handle and `path` a NUL-terminated string.
 */
enum LrpStatus lrp_graph_write(const struct LrpGraph *g, const char *path);

/**
 * # Safety
 * `g` must be null or a handle not yet freed.
 */
void lrp_graph_free(struct LrpGraph *g);

/**
 * # Safety
 * `g` must be a live handle and `out` a valid pointer.
 */
enum LrpStatus lrp_graph_num_vertices(const struct LrpGraph *g, uint64_t *out);

/**
 * # Safety
 * `g` must be a live handle and `out` a valid pointer.
 */
enum LrpStatus lrp_graph_num_edges(const struct LrpGraph *g, uint64_t *out);

/**
 * Copies edges as `u0, v0, u1, v1, ...` with `u < v`. `*len` holds the
 * buffer capacity in `u32` slots on entry and the required count on
 * return; a short buffer gives `BufferTooSmall` and copies nothing.
 *
 * # Safety
 * `buf` must point to `*len` writable slots (or be null with `*len == 0`).
 */
enum LrpStatus lrp_graph_edges(const struct LrpGraph *g, uint32_t *buf, uintptr_t *len);

/**
 * Sizes of the largest and second-largest clusters.
 *
 * # Safety
 * `g` must be a live handle; outputs must be valid pointers.
 */
enum LrpStatus lrp_cluster_sizes(const struct LrpGraph *g, uint64_t *c1, uint64_t *c2);

/**
 * Spectral gap `1 - λ₂` of the simple random walk on the largest cluster.
 *
 * # Safety
 * `g` must be a live handle; outputs must be valid pointers.
 */
enum LrpStatus lrp_spectral_gap(const struct LrpGraph *g,
                                double tol,
                                double *gap,
                                double *error_bound);

/**
 * `ψ_t = P_{2t}(x,x)/deg(x)` at each of `count` times, written to `out`.
 *
 * # Safety
 * `times` and `out` must each point to `count` elements.
 */
enum LrpStatus lrp_heat_kernel_psi(const struct LrpGraph *g,
                                   uint32_t x,
                                   enum LrpMode mode,
                                   const double *times,
                                   uintptr_t count,
                                   double *out);

/**
 * Runs one experiment kind (`"sample"`, `"cluster-stats"`, `"partition"`,
 * `"gap-scaling"`, `"diameter-scaling"`, `"heatkernel"`, `"verify-bound"`)
 * from a JSON configuration, writing results to `out_dir`. `config_json`
 * may be null for defaults.
 *
 * # Safety
 * String arguments must be NUL-terminated or null where allowed.
 */
enum LrpStatus lrp_run_experiment(const char *kind,
                                  const char *config_json,
                                  const char *out_dir,
                                  uint64_t seed,
                                  int32_t use_seed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LRP_H */
