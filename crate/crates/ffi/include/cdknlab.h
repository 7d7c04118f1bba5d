#ifndef CDKNLAB_H
#define CDKNLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum CdkStatus {
  CDK_STATUS_OK = 0,
  CDK_STATUS_NULL_POINTER = 1,
  CDK_STATUS_INVALID_UTF8 = 2,
  CDK_STATUS_INVALID_PARAMS = 3,
  CDK_STATUS_INVALID_GRID = 4,
  CDK_STATUS_DOMAIN_ERROR = 5,
  CDK_STATUS_NOT_ABSOLUTELY_CONTINUOUS = 6,
  CDK_STATUS_EMPTY_CUT = 7,
  CDK_STATUS_INFINITE_MASS = 8,
  CDK_STATUS_TRANSPORT = 9,
  CDK_STATUS_MISMATCH = 10,
  CDK_STATUS_PARSE = 11,
  CDK_STATUS_IO = 12,
  CDK_STATUS_BUFFER_TOO_SMALL = 13,
  CDK_STATUS_PANIC = 14,
} CdkStatus;

typedef enum CdkCostKind {
  CDK_COST_KIND_W2 = 0,
  CDK_COST_KIND_TANH = 1,
  CDK_COST_KIND_CAP1 = 2,
} CdkCostKind;

/**
 * Opaque discretized pointed space.
 */
typedef struct CdkSpace CdkSpace;

/**
 * Value in `[0, ∞]`; `value` is meaningful only when `is_infinite` is false.
 */
typedef struct CdkExtReal {
  double value;
  bool is_infinite;
} CdkExtReal;

/**
 * Counts and worst normalized margin of one CD report.
 */
typedef struct CdkCdSummary {
  double min_margin;
  double worst_t;
  double worst_nprime;
  size_t n_ok;
  size_t n_violated;
  size_t n_vacuous;
  size_t n_skipped;
  bool passes;
} CdkCdSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * NUL-terminated library version.
 */
const char *cdk_version(void);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`) and returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t cdk_last_error(char *buf, size_t len);

/**
 * Builds a model space from its JSON descriptor.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum CdkStatus cdk_space_from_json(const char *json, struct CdkSpace **out_space);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `space` must be null or a handle not yet freed.
 */
void cdk_space_free(struct CdkSpace *space);

/**
 * # Safety
 * `space` must be a live handle; `count` must be writable.
 */
enum CdkStatus cdk_space_cell_count(const struct CdkSpace *space, size_t *count);

/**
 * Writes the cell centers; `len` must be at least the cell count.
 *
 * # Safety
 * `space` must be a live handle; `buf` must hold `len` doubles.
 */
enum CdkStatus cdk_space_centers(const struct CdkSpace *space, double *buf, size_t len);

/**
 * Writes the cell masses of `𝔪` (`INFINITY` on cells touching the singular set).
 *
 * # Safety
 * `space` must be a live handle; `buf` must hold `len` doubles.
 */
enum CdkStatus cdk_space_cell_masses(const struct CdkSpace *space, double *buf, size_t len);

/**
 * # Safety
 * `space` must be a live handle; `mass` must be writable.
 */
enum CdkStatus cdk_space_total_mass(const struct CdkSpace *space, struct CdkExtReal *mass);

/**
 * New handle holding the k-th cut of `space`.
 *
 * # Safety
 * `space` must be a live handle; `cut` must be writable.
 */
enum CdkStatus cdk_space_k_cut(const struct CdkSpace *space, int32_t k, struct CdkSpace **cut);

/**
 * `σ_κ^{(t)}(θ)`.
 *
 * # Safety
 * `value` must be writable.
 */
enum CdkStatus cdk_sigma(double kappa, double t, double theta, struct CdkExtReal *value);

/**
 * `τ_{K,N}^{(t)}(θ)`.
 *
 * # Safety
 * `value` must be writable.
 */
enum CdkStatus cdk_tau(double k, double n, double t, double theta, struct CdkExtReal *value);

/**
 * `S_{N,𝔪}(μ)` for cell masses `mu` on the grid of `space`.
 *
 * # Safety
 * `space` must be a live handle; `mu` must hold `len` doubles; `value` must be writable.
 */
enum CdkStatus cdk_renyi_entropy(const struct CdkSpace *space,
                                 const double *mu,
                                 size_t len,
                                 double n,
                                 struct CdkExtReal *value);

/**
 * `W_c(μ, ν)` between two mass vectors on the grid of `space`.
 *
 * # Safety
 * `space` must be a live handle; `mu` and `nu` must hold `len` doubles; `value` must be writable.
 */
enum CdkStatus cdk_wc_distance(const struct CdkSpace *space,
                               const double *mu,
                               const double *nu,
                               size_t len,
                               enum CdkCostKind cost,
                               double *value);

/**
 * Runs the CD verifier for one marginal pair on `t_points` equally spaced times
 * and `nprime_points` geometric exponents in `[N, −1e-3]`.
 *
 * # Safety
 * `space` must be a live handle; `mu0` and `mu1` must hold `len` doubles; `summary` must be writable.
 */
enum CdkStatus cdk_verify_cd(const struct CdkSpace *space,
                             const double *mu0,
                             const double *mu1,
                             size_t len,
                             double k,
                             double n,
                             size_t t_points,
                             size_t nprime_points,
                             double tolerance,
                             struct CdkCdSummary *summary);

/**
 * `d^fm` between two finite-mass spaces at the identity embedding.
 *
 * # Safety
 * `a` and `b` must be live handles; `value` must be writable.
 */
enum CdkStatus cdk_ikrw_fm(const struct CdkSpace *a,
                           const struct CdkSpace *b,
                           enum CdkCostKind cost,
                           struct CdkExtReal *value);

/**
 * Extrinsic gap between the k-th cuts of two spaces.
 *
 * # Safety
 * `a` and `b` must be live handles; `value` must be writable.
 */
enum CdkStatus cdk_extrinsic_gap(const struct CdkSpace *a,
                                 const struct CdkSpace *b,
                                 int32_t k,
                                 enum CdkCostKind cost,
                                 double *value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CDKNLAB_H */
