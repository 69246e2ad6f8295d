/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef C2F_H
#define C2F_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Completion method selector.
 */
typedef enum C2fSolver {
  C2F_SOLVER_TRACE_NORM = 0,
  C2F_SOLVER_TV2 = 1,
} C2fSolver;

/*
 Result code of every fallible call.
 */
typedef enum C2fStatus {
  C2F_STATUS_OK = 0,
  C2F_STATUS_NULL_POINTER = 1,
  C2F_STATUS_INVALID_ARGUMENT = 2,
  C2F_STATUS_SHAPE_MISMATCH = 3,
  C2F_STATUS_IO = 4,
  C2F_STATUS_SOLVER_FAILED = 5,
  C2F_STATUS_PANIC = 6,
} C2fStatus;

/*
 Set of observed entries.
 */
typedef struct C2fMask C2fMask;

/*
 Restoration plan with its solver settings.
 */
typedef struct C2fPlan C2fPlan;

/*
 Output of a coarse-to-fine run.
 */
typedef struct C2fResult C2fResult;

/*
 Dense column-major tensor.
 */
typedef struct C2fTensor C2fTensor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the calling thread's last error message, NUL-terminated and
 truncated to `cap` bytes, into `buf`. Returns the full message length
 without the terminator. `buf` may be null when `cap` is 0.

 # Safety
 `buf` must be writable for `cap` bytes.
 */
size_t c2f_last_error(char *buf, size_t cap);

/*
 Creates a tensor from `ndims` extents and `prod(dims)` column-major values.

 # Safety
 `dims` and `data` must point to arrays of the stated lengths; `out` must
 be writable.
 */
enum C2fStatus c2f_tensor_new(const size_t *dims,
                              size_t ndims,
                              const double *data,
                              size_t len,
                              struct C2fTensor **out);

/*
 # Safety
 `t` must be null or a live tensor handle, not used afterwards.
 */
void c2f_tensor_free(struct C2fTensor *t);

/*
 Number of modes, or 0 for a null handle.

 # Safety
 `t` must be null or a live tensor handle.
 */
size_t c2f_tensor_ndims(const struct C2fTensor *t);

/*
 Number of entries, or 0 for a null handle.

 # Safety
 `t` must be null or a live tensor handle.
 */
size_t c2f_tensor_len(const struct C2fTensor *t);

/*
 Writes the extents into `dims`, which holds `cap` entries.

 # Safety
 `t` must be a live handle and `dims` writable for `cap` entries.
 */
enum C2fStatus c2f_tensor_dims(const struct C2fTensor *t, size_t *dims, size_t cap);

/*
 Copies all entries, column-major, into `data`, which holds `cap` values.

 # Safety
 `t` must be a live handle and `data` writable for `cap` values.
 */
enum C2fStatus c2f_tensor_data(const struct C2fTensor *t, double *data, size_t cap);

/*
 Loads an 8-bit RGB PNG or PPM as an `H x W x 3` tensor.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum C2fStatus c2f_image_load(const char *path, struct C2fTensor **out);

/*
 Saves an `H x W x 3` tensor, clamped to `[0, 1]`, as PNG or PPM by
 extension.

 # Safety
 `t` must be a live handle and `path` a NUL-terminated string.
 */
enum C2fStatus c2f_image_save(const struct C2fTensor *t, const char *path);

/*
 Builds a mask from one byte per entry (nonzero means observed).

 # Safety
 `dims` must hold `ndims` entries, `observed` `prod(dims)` bytes.
 */
enum C2fStatus c2f_mask_from_indicator(const size_t *dims,
                                       size_t ndims,
                                       const uint8_t *observed,
                                       size_t len,
                                       struct C2fMask **out);

/*
 Draws a mask hiding `floor(ratio * entries)` entries (or spatial sites
 when `per_pixel` is nonzero), deterministic in `seed`.

 # Safety
 `dims` must hold `ndims` entries; `out` must be writable.
 */
enum C2fStatus c2f_mask_generate(const size_t *dims,
                                 size_t ndims,
                                 double ratio,
                                 uint64_t seed,
                                 bool per_pixel,
                                 struct C2fMask **out);

/*
 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum C2fStatus c2f_mask_load(const char *path, struct C2fMask **out);

/*
 Writes the mask file format with the given provenance fields.

 # Safety
 `m` must be a live handle and `path` a NUL-terminated string.
 */
enum C2fStatus c2f_mask_save(const struct C2fMask *m,
                             uint64_t seed,
                             double ratio,
                             const char *path);

/*
 Number of observed entries, or 0 for a null handle.

 # Safety
 `m` must be null or a live mask handle.
 */
size_t c2f_mask_observed_count(const struct C2fMask *m);

/*
 Tensor equal to `truth` on the observed entries and zero elsewhere.

 # Safety
 `m` and `truth` must be live handles; `out` must be writable.
 */
enum C2fStatus c2f_mask_apply(const struct C2fMask *m,
                              const struct C2fTensor *truth,
                              struct C2fTensor **out);

/*
 # Safety
 `m` must be null or a live mask handle, not used afterwards.
 */
void c2f_mask_free(struct C2fMask *m);

/*
 Default plan for `solver` and a tensor with `order` modes.

 # Safety
 `out` must be writable.
 */
enum C2fStatus c2f_plan_new(enum C2fSolver solver, size_t order, struct C2fPlan **out);

/*
 Sets the stage count, initial threshold and per-stage multiplier.

 # Safety
 `p` must be a live plan handle.
 */
enum C2fStatus c2f_plan_set_schedule(struct C2fPlan *p, size_t stages, double epsilon0, double mu);

/*
 Sets per-stage overlaps; the last value repeats for later stages.

 # Safety
 `p` must be a live plan handle and `overlap` hold `len` entries.
 */
enum C2fStatus c2f_plan_set_overlap(struct C2fPlan *p, const size_t *overlap, size_t len);

/*
 Selects the short-cut variant (coarse stage plus the finest stage).

 # Safety
 `p` must be a live plan handle.
 */
enum C2fStatus c2f_plan_set_shortcut(struct C2fPlan *p, bool shortcut);

/*
 Replaces the solver settings with a TOML document; absent keys take
 their defaults.

 # Safety
 `p` must be a live plan handle and `toml` a NUL-terminated string.
 */
enum C2fStatus c2f_plan_set_config_toml(struct C2fPlan *p, const char *toml);

/*
 # Safety
 `p` must be null or a live plan handle, not used afterwards.
 */
void c2f_plan_free(struct C2fPlan *p);

/*
 Coarse completion only.

 # Safety
 All handles must be live; `out` must be writable.
 */
enum C2fStatus c2f_complete(const struct C2fTensor *y,
                            const struct C2fMask *m,
                            const struct C2fPlan *p,
                            struct C2fTensor **out);

/*
 Coarse-to-fine restoration; the plan's short-cut flag picks the variant.

 # Safety
 All handles must be live; `out` must be writable.
 */
enum C2fStatus c2f_run(const struct C2fTensor *y,
                       const struct C2fMask *m,
                       const struct C2fPlan *p,
                       struct C2fResult **out);

/*
 New tensor holding the restored estimate.

 # Safety
 `r` must be a live result handle; `out` must be writable.
 */
enum C2fStatus c2f_result_restored(const struct C2fResult *r, struct C2fTensor **out);

/*
 Number of fine stages that ran, or 0 for a null handle.

 # Safety
 `r` must be null or a live result handle.
 */
size_t c2f_result_stage_count(const struct C2fResult *r);

/*
 Grid stage, patch count and replaced-patch count of the `index`-th
 stage record.

 # Safety
 `r` must be a live result handle; the outputs must be writable.
 */
enum C2fStatus c2f_result_stage(const struct C2fResult *r,
                                size_t index,
                                size_t *stage,
                                size_t *patches,
                                size_t *replaced);

/*
 # Safety
 `r` must be null or a live result handle, not used afterwards.
 */
void c2f_result_free(struct C2fResult *r);

/*
 PSNR of `z` against `truth` in dB; `+inf` for an exact match.

 # Safety
 Both handles must be live; `out` must be writable.
 */
enum C2fStatus c2f_psnr(const struct C2fTensor *z, const struct C2fTensor *truth, double *out);

/*
 Relative squared error `||z - truth|| / ||truth||`.

 # Safety
 Both handles must be live; `out` must be writable.
 */
enum C2fStatus c2f_rse(const struct C2fTensor *z, const struct C2fTensor *truth, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* C2F_H */
