#ifndef DISTSTAT_H
#define DISTSTAT_H

/* Generated by cbindgen. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every entry point.
 */
typedef enum DsStatus {
  DS_STATUS_OK = 0,
  DS_STATUS_INVALID_ARGUMENT = 1,
  DS_STATUS_INIT = 2,
  DS_STATUS_CONTRACT = 3,
  DS_STATUS_TRANSPORT = 4,
  DS_STATUS_SHAPE = 5,
  DS_STATUS_NUMERIC = 6,
  DS_STATUS_FORMAT = 7,
  DS_STATUS_IO = 8,
  DS_STATUS_PANIC = 9,
} DsStatus;

typedef enum DsReduceOp {
  DS_REDUCE_OP_SUM = 0,
  DS_REDUCE_OP_PRODUCT = 1,
  DS_REDUCE_OP_MAX = 2,
  DS_REDUCE_OP_MIN = 3,
} DsReduceOp;

typedef enum DsNorm {
  DS_NORM_L1 = 0,
  DS_NORM_LINF = 1,
  DS_NORM_L2_POWER = 2,
  DS_NORM_L2_QUICK = 3,
} DsNorm;

/**
 * A distributed or replicated `f64` array.
 */
typedef struct DsArray DsArray;

/**
 * A rank's handle on its world.
 */
typedef struct DsComm DsComm;

/**
 * Called once per rank by [`ds_inproc_run`]. The handle is freed when the
 * callback returns.
 */
typedef enum DsStatus (*DsRankFn)(struct DsComm *comm, void *user);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. Valid until the
 * next failing call on the same thread.
 */
const char *ds_last_error(void);

/**
 * Join a world described by `backend` (`tcp:<host:port>,...,rank=<r>` or
 * `inproc:1`). In-process worlds with several ranks are started with
 * [`ds_inproc_run`].
 *
 * # Safety
 * `backend` must be a NUL-terminated string; `out_comm` must be writable.
 */
enum DsStatus ds_comm_init(const char *backend, struct DsComm **out_comm);

/**
 * Run `callback` on `size` in-process ranks, one thread each, and wait
 * for all of them. Returns the first non-OK status in rank order.
 *
 * # Safety
 * `callback` must be safe to call concurrently from `size` threads with
 * the same `user` pointer.
 */
enum DsStatus ds_inproc_run(size_t size, DsRankFn callback, void *user);

/**
 * # Safety
 * `comm` must be a live handle; `out` writable.
 */
enum DsStatus ds_comm_rank(const struct DsComm *comm, size_t *out_rank);

/**
 * # Safety
 * `comm` must be a live handle; `out` writable.
 */
enum DsStatus ds_comm_size(const struct DsComm *comm, size_t *out_size);

/**
 * Release a handle from [`ds_comm_init`]. NULL is ignored.
 *
 * # Safety
 * `comm` must come from `ds_comm_init` and not be used afterwards.
 */
void ds_comm_free(struct DsComm *comm);

/**
 * # Safety
 * `comm` must be a live handle.
 */
enum DsStatus ds_barrier(const struct DsComm *comm);

/**
 * In-place elementwise reduction of `buf[0..len]` across ranks.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum DsStatus ds_allreduce_f64(const struct DsComm *comm,
                               double *buf,
                               size_t len,
                               enum DsReduceOp op);

/**
 * Copy `root`'s `buf[0..len]` to every rank.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum DsStatus ds_broadcast_f64(const struct DsComm *comm, double *buf, size_t len, size_t root);

/**
 * Zero-filled distributed array.
 *
 * # Safety
 * `shape` must hold `ndim` extents; `out` writable.
 */
enum DsStatus ds_array_new(const struct DsComm *comm,
                           const size_t *shape,
                           size_t ndim,
                           struct DsArray **out_array);

/**
 * Spread the column-major `data` held by `root` over all ranks. Only
 * `root` reads `data`; every rank passes the same `ndim`.
 *
 * # Safety
 * On `root`, `shape` must hold `ndim` extents and `data` their product.
 */
enum DsStatus ds_array_distribute(const struct DsComm *comm,
                                  const double *data,
                                  const size_t *shape,
                                  size_t ndim,
                                  size_t root,
                                  struct DsArray **out_array);

/**
 * A replicated array initialized from `data`, which every rank passes
 * with identical contents.
 *
 * # Safety
 * `shape` must hold `ndim` extents and `data` their product.
 */
enum DsStatus ds_array_replicated(const struct DsComm *comm,
                                  const double *data,
                                  const size_t *shape,
                                  size_t ndim,
                                  struct DsArray **out_array);

/**
 * NULL is ignored.
 *
 * # Safety
 * `a` must come from this library and not be used afterwards.
 */
void ds_array_free(struct DsArray *a);

/**
 * 1 if `a` is distributed, 0 if replicated.
 *
 * # Safety
 * `a` must be a live handle.
 */
enum DsStatus ds_array_is_distributed(const struct DsArray *a, int *out_flag);

/**
 * Writes the number of dimensions to `out_ndim` and up to `cap` extents
 * to `out_shape` (which may be NULL when `cap` is 0).
 *
 * # Safety
 * `out_shape` must have room for `cap` values.
 */
enum DsStatus ds_array_shape(const struct DsArray *a,
                             size_t *out_shape,
                             size_t cap,
                             size_t *out_ndim);

/**
 * Number of elements stored on this rank.
 *
 * # Safety
 * `a` must be a live handle.
 */
enum DsStatus ds_array_local_len(const struct DsArray *a, size_t *out_len);

/**
 * Pointer to this rank's elements (the local column block, or the whole
 * replicated array). Valid until the array is freed.
 *
 * # Safety
 * `a` must be a live handle.
 */
enum DsStatus ds_array_local_data(struct DsArray *a, double **out_data);

/**
 * Global column range `[first, last)` owned by this rank (the full range
 * for replicated arrays).
 *
 * # Safety
 * `a` must be a live handle.
 */
enum DsStatus ds_array_local_range(const struct DsArray *a, size_t *out_first, size_t *out_last);

/**
 * # Safety
 * `a` must be a live handle.
 */
enum DsStatus ds_array_fill(struct DsArray *a, double x);

/**
 * Fill a distributed array with uniform `[0, 1)` (or standard normal when
 * `normal` is nonzero) values independent of the number of ranks.
 *
 * # Safety
 * `a` must be a live handle.
 */
enum DsStatus ds_array_rand(struct DsArray *a, uint64_t seed, int normal);

/**
 * Copy the whole array, column-major, into `buf` on every rank.
 * Collective for distributed arrays.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum DsStatus ds_array_gather(const struct DsArray *a, double *buf, size_t len);

/**
 * Sum of all elements. Collective for distributed arrays.
 *
 * # Safety
 * `a` must be a live handle.
 */
enum DsStatus ds_array_sum(const struct DsArray *a, double *out_sum);

/**
 * Sum of the elementwise product of two equally shaped distributed arrays.
 *
 * # Safety
 * Both handles must be live.
 */
enum DsStatus ds_dot(const struct DsArray *a, const struct DsArray *b, double *out_dot);

/**
 * Operator norm of a distributed matrix. The power method uses its
 * default settings.
 *
 * # Safety
 * `a` must be a live handle.
 */
enum DsStatus ds_opnorm(const struct DsArray *a, enum DsNorm which, double *out_norm);

/**
 * `C = op(A) op(B)`, where a nonzero `*trans` flag means the distributed
 * array is used through its transpose. Replicated and 1-D operands select
 * the vector and replicated layouts. The layout triple must be one of the
 * supported scenarios.
 *
 * # Safety
 * All handles must be live; `c` must differ from `a` and `b`.
 */
enum DsStatus ds_matmul(struct DsArray *c,
                        int ctrans,
                        const struct DsArray *a,
                        int atrans,
                        const struct DsArray *b,
                        int btrans);

/**
 * Rank-`r` NMF of the nonnegative distributed matrix `x`. Writes the
 * factors `Vt` (`r x m`) and `W` (`r x n`) as new distributed arrays and
 * the final objective.
 *
 * # Safety
 * `x` must be live; out-pointers writable.
 */
enum DsStatus ds_nmf(const struct DsArray *x,
                     size_t r,
                     size_t iters,
                     int apg,
                     uint64_t seed,
                     struct DsArray **out_vt,
                     struct DsArray **out_w,
                     double *out_objective);

/**
 * Embed the `n x n` distributed distance matrix `y` into `q` dimensions.
 * Writes the `q x n` embedding and its final stress.
 *
 * # Safety
 * `y` must be live; out-pointers writable.
 */
enum DsStatus ds_mds(const struct DsArray *y,
                     size_t q,
                     size_t iters,
                     uint64_t seed,
                     int perturb,
                     struct DsArray **out_theta,
                     double *out_stress);

/**
 * l1-penalized Cox regression of the `m x n` distributed covariates `x`
 * on times `y` (nonincreasing) and event flags `delta`, both length `m`
 * and identical on every rank. `sigma <= 0` selects the default step.
 * With `use_monitor` the fit stops once the objective stalls. Writes the
 * length-`n` coefficients, the number of steps taken and the final
 * penalized objective.
 *
 * # Safety
 * `y` and `delta` must hold `m` doubles; out-pointers writable.
 */
enum DsStatus ds_cox(const struct DsArray *x,
                     const double *y,
                     const double *delta,
                     size_t m,
                     double lambda,
                     double sigma,
                     int breslow,
                     size_t iters,
                     int use_monitor,
                     struct DsArray **out_beta,
                     size_t *out_iters,
                     double *out_objective);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DISTSTAT_H */
