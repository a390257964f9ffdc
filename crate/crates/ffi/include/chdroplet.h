#ifndef CHDROPLET_H
#define CHDROPLET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ChdRegime {
  CHD_REGIME_UNIFORM = 0,
  CHD_REGIME_DROPLET = 1,
  CHD_REGIME_CRITICAL = 2,
} ChdRegime;

typedef enum ChdStatus {
  CHD_STATUS_OK = 0,
  CHD_STATUS_NULL_POINTER = 1,
  CHD_STATUS_DOMAIN = 2,
  CHD_STATUS_PRECONDITION = 3,
  CHD_STATUS_FLOW = 4,
  // The report is still produced and holds the best partial result.
  CHD_STATUS_NOT_CONVERGED = 5,
  CHD_STATUS_FORMAT = 6,
  CHD_STATUS_IO = 7,
  CHD_STATUS_JSON = 8,
  CHD_STATUS_PANIC = 9,
  CHD_STATUS_INVALID_UTF8 = 10,
} ChdStatus;

// Opaque grid function.
typedef struct ChdField ChdField;

// Opaque problem: dimension, side length and mean density.
typedef struct ChdProblem ChdProblem;

// Opaque minimization result.
typedef struct ChdReport ChdReport;

typedef struct ChdCriticalConstants {
  double s;
  double chi;
  double c_star;
  double eta_star;
  double k_star;
  // Smallest `C` at which a metastable droplet exists.
  double c_spinodal;
} ChdCriticalConstants;

typedef struct ChdPhiResult {
  double eta_c;
  double phi_min;
  enum ChdRegime regime;
} ChdPhiResult;

typedef struct ChdDiagnostics {
  double kappa;
  double vol_a;
  double vol_b;
  double vol_c;
  double radius;
  double eta_measured;
  double l4_distance;
  // 1 for a droplet, 0 for uniform.
  int32_t droplet;
} ChdDiagnostics;

typedef struct ChdExpansion {
  double lambda;
  double k1;
  double mu1;
  double phi1;
  // Radius in units of the equimolar radius.
  double r1;
  double r2;
  double r0;
} ChdExpansion;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the most recent failure on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *chd_last_error(void);

// Library version as a static NUL-terminated string.
const char *chd_version(void);

// # Safety
// `out_constants` must point to writable memory for one `ChdCriticalConstants`.
enum ChdStatus chd_critical_constants(size_t d, struct ChdCriticalConstants *out_constants);

// Minimizes `η^{1-1/d} + C(1-η)²` over `[0, 1]`.
//
// # Safety
// `out_result` must point to writable memory for one `ChdPhiResult`.
enum ChdStatus chd_minimize_phi(double c, size_t d, struct ChdPhiResult *out_result);

// Problem with `n = -1 + K L^{-d/(d+1)}`.
//
// # Safety
// `out_problem` must be a valid pointer to a handle slot.
enum ChdStatus chd_problem_from_k(size_t d,
                                  double length,
                                  double k,
                                  struct ChdProblem **out_problem);

// Problem with an explicit mean density `n`.
//
// # Safety
// `out_problem` must be a valid pointer to a handle slot.
enum ChdStatus chd_problem_from_n(size_t d,
                                  double length,
                                  double n,
                                  struct ChdProblem **out_problem);

// # Safety
// `problem` must be null or a handle from `chd_problem_from_*` not yet freed.
void chd_problem_free(struct ChdProblem *problem);

// Mean density of the problem, or NaN for a null handle.
//
// # Safety
// `problem` must be null or a live handle.
double chd_problem_mean(const struct ChdProblem *problem);

// Constant field equal to the problem's mean on an `N^d` grid.
//
// # Safety
// `problem` must be a live handle and `out_field` a valid handle slot.
enum ChdStatus chd_field_uniform(const struct ChdProblem *problem,
                                 size_t n_side,
                                 struct ChdField **out_field);

// Reads a field snapshot written by the command-line tool.
//
// # Safety
// `path` must be a NUL-terminated string and `out_field` a valid handle slot.
enum ChdStatus chd_field_read_snapshot(const char *path, struct ChdField **out_field);

// # Safety
// `field` must be null or a live field handle.
void chd_field_free(struct ChdField *field);

// Number of grid values, or 0 for a null handle.
//
// # Safety
// `field` must be null or a live handle.
size_t chd_field_len(const struct ChdField *field);

// Copies the row-major values into `buffer`, which must hold `len` values
// with `len` equal to `chd_field_len`.
//
// # Safety
// `buffer` must be writable for `len` doubles.
enum ChdStatus chd_field_copy_values(const struct ChdField *field, double *buffer, size_t len);

// Discrete free energy of the field.
//
// # Safety
// `field` must be a live handle and `out_energy` writable.
enum ChdStatus chd_field_energy(const struct ChdField *field, double *out_energy);

// Partition volumes, radius, volume fraction, `L⁴` distance to the sharp
// droplet of fraction `eta_reference`, and classification at `threshold`
// (a negative threshold selects the default).
//
// # Safety
// `field` must be a live handle and `out_diagnostics` writable.
enum ChdStatus chd_diagnose(const struct ChdField *field,
                            double n,
                            double eta_reference,
                            double threshold,
                            struct ChdDiagnostics *out_diagnostics);

// Minimizes the free energy from the default seeds. On
// `CHD_STATUS_NOT_CONVERGED` the report handle is still set.
//
// # Safety
// `problem` must be a live handle and `out_report` a valid handle slot.
enum ChdStatus chd_minimize(const struct ChdProblem *problem,
                            size_t n_side,
                            double tol_residual,
                            size_t max_iters,
                            struct ChdReport **out_report);

// As `chd_minimize` with a comma-separated seed list such as
// `"uniform,eta-c"`; null selects the defaults.
//
// # Safety
// `seeds` must be null or NUL-terminated; otherwise as `chd_minimize`.
enum ChdStatus chd_minimize_seeded(const struct ChdProblem *problem,
                                   size_t n_side,
                                   double tol_residual,
                                   size_t max_iters,
                                   const char *seeds,
                                   struct ChdReport **out_report);

// # Safety
// `report` must be null or a live report handle.
void chd_report_free(struct ChdReport *report);

// Total energy of the best field, or NaN for a null handle.
//
// # Safety
// `report` must be null or a live handle.
double chd_report_energy(const struct ChdReport *report);

// Sup norm of the projected residual of the best field, or NaN.
//
// # Safety
// `report` must be null or a live handle.
double chd_report_residual(const struct ChdReport *report);

// 1 if the best seed converged, 0 otherwise or for a null handle.
//
// # Safety
// `report` must be null or a live handle.
int32_t chd_report_converged(const struct ChdReport *report);

// Copy of the best field as a new handle.
//
// # Safety
// `report` must be a live handle and `out_field` a valid handle slot.
enum ChdStatus chd_report_field(const struct ChdReport *report, struct ChdField **out_field);

// First-order expansion quantities for a two-dimensional droplet problem.
//
// # Safety
// `problem` must be a live handle and `out_expansion` writable.
enum ChdStatus chd_expansion(const struct ChdProblem *problem, struct ChdExpansion *out_expansion);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHDROPLET_H */
