#ifndef FHNREG_H
#define FHNREG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FhnStatus {
  FHN_STATUS_OK = 0,
  FHN_STATUS_NULL_POINTER = 1,
  FHN_STATUS_INVALID_ARGUMENT = 2,
  FHN_STATUS_PARSE = 3,
  FHN_STATUS_NUMERICAL = 4,
  FHN_STATUS_BUFFER_SIZE = 5,
  FHN_STATUS_PANIC = 6,
} FhnStatus;

typedef enum FhnBasis {
  FHN_BASIS_HEAT = 0,
  FHN_BASIS_TRUNCATED = 1,
} FhnBasis;

typedef enum FhnTermination {
  FHN_TERMINATION_COMPLETED = 0,
  FHN_TERMINATION_CUTOFF_HIT = 1,
  FHN_TERMINATION_NONFINITE = 2,
} FhnTermination;

typedef struct FhnNoise FhnNoise;

typedef struct FhnRun FhnRun;

/**
 * A canonical symbol together with its dimension.
 */
typedef struct FhnSymbol FhnSymbol;

/**
 * |τ| = r_num/r_den + (kappa_num/kappa_den)·κ
 */
typedef struct FhnHomogeneity {
  int64_t r_num;
  int64_t r_den;
  int64_t kappa_num;
  int64_t kappa_den;
} FhnHomogeneity;

/**
 * C₁, C₂ and the symmetric I_ij (row-major 3×3) at one ε.
 */
typedef struct FhnConstants {
  double eps;
  double c1;
  double c2;
  double i[9];
  double err_c1;
  double err_c2;
  double err_i[9];
} FhnConstants;

typedef struct FhnNormRow {
  double t;
  double sup_u;
  double l2_u;
  double sup_v;
  double l2_v;
  double sup_phi;
} FhnNormRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *fhnreg_version(void);

/**
 * Message of the last failure on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *fhnreg_last_error(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed; NULL is ignored.
 */
void fhnreg_string_free(char *s);

/**
 * Parses `text` in the symbol grammar for dimension `dim`. A symbol that
 * vanishes (e.g. `I(X1)`) yields `*out = NULL` with status OK.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` writable.
 */
enum FhnStatus fhnreg_symbol_parse(const char *text, uint32_t dim, struct FhnSymbol **out);

/**
 * # Safety
 * `sym` must be a live handle and `out` writable.
 */
enum FhnStatus fhnreg_symbol_homogeneity(const struct FhnSymbol *sym, struct FhnHomogeneity *out);

/**
 * Canonical text form, re-parseable by [`fhnreg_symbol_parse`].
 *
 * # Safety
 * `sym` must be a live handle and `out` writable.
 */
enum FhnStatus fhnreg_symbol_print(const struct FhnSymbol *sym, char **out);

/**
 * Δτ in the `τ (x) σ + ...` notation.
 *
 * # Safety
 * `sym` must be a live handle and `out` writable.
 */
enum FhnStatus fhnreg_symbol_coproduct(const struct FhnSymbol *sym, char **out);

/**
 * # Safety
 * `sym` must come from [`fhnreg_symbol_parse`]; NULL is ignored.
 */
void fhnreg_symbol_free(struct FhnSymbol *sym);

/**
 * Counterterms of the renormalised nonlinearity for `f` (text in `u`, `v`
 * or `v1..vn`), one `name = value` per line. `obstructed` reports whether
 * the result fails to be of local form.
 *
 * # Safety
 * `f` must be NUL-terminated; `out` and `obstructed` writable.
 */
enum FhnStatus fhnreg_renormalized_equation(const char *f,
                                            uint32_t n,
                                            uint32_t dim,
                                            char **out,
                                            bool *obstructed);

/**
 * Constants at scale `eps` for the scalar Q(t) = a1·e^{t·a2} on [0, horizon].
 *
 * # Safety
 * `out` must be writable.
 */
enum FhnStatus fhnreg_constants(double eps,
                                uint32_t dim,
                                enum FhnBasis basis,
                                double a1,
                                double a2,
                                double horizon,
                                struct FhnConstants *out);

/**
 * White noise on `nt` slices of a `n^d` torus lattice with step `dt`.
 *
 * # Safety
 * `out` must be writable.
 */
enum FhnStatus fhnreg_noise_new(uint32_t d,
                                uint32_t n,
                                uint32_t nt,
                                double dt,
                                uint64_t seed,
                                struct FhnNoise **out);

/**
 * Sites per slice.
 *
 * # Safety
 * `noise` must be a live handle or NULL (gives 0).
 */
size_t fhnreg_noise_sites(const struct FhnNoise *noise);

/**
 * Copies slice `s` into `buf`, which must hold exactly
 * [`fhnreg_noise_sites`] values.
 *
 * # Safety
 * `noise` must be live and `buf` valid for `len` writes.
 */
enum FhnStatus fhnreg_noise_slice(const struct FhnNoise *noise, size_t s, double *buf, size_t len);

/**
 * SHA-256 of the field values as lowercase hex.
 *
 * # Safety
 * `noise` must be live and `out` writable.
 */
enum FhnStatus fhnreg_noise_checksum(const struct FhnNoise *noise, char **out);

/**
 * # Safety
 * `noise` must come from [`fhnreg_noise_new`]; NULL is ignored.
 */
void fhnreg_noise_free(struct FhnNoise *noise);

/**
 * Runs the solver on a config in the CLI's TOML format.
 *
 * # Safety
 * `config` must be NUL-terminated and `out` writable.
 */
enum FhnStatus fhnreg_simulate(const char *config, struct FhnRun **out);

/**
 * Rows in the norm series.
 *
 * # Safety
 * `r` must be a live handle or NULL (gives 0).
 */
size_t fhnreg_run_rows(const struct FhnRun *r);

/**
 * # Safety
 * `r` must be live and `out` writable.
 */
enum FhnStatus fhnreg_run_row(const struct FhnRun *r, size_t i, struct FhnNormRow *out);

/**
 * How the run ended; `t` receives the stopping time (t_end if completed).
 *
 * # Safety
 * `r` must be live and `kind` writable; `t` may be NULL.
 */
enum FhnStatus fhnreg_run_termination(const struct FhnRun *r, enum FhnTermination *kind, double *t);

/**
 * Lattice sites of the final u field.
 *
 * # Safety
 * `r` must be a live handle or NULL (gives 0).
 */
size_t fhnreg_run_sites(const struct FhnRun *r);

/**
 * Copies the final u into `buf` (exactly [`fhnreg_run_sites`] values).
 *
 * # Safety
 * `r` must be live and `buf` valid for `len` writes.
 */
enum FhnStatus fhnreg_run_final_u(const struct FhnRun *r, double *buf, size_t len);

/**
 * # Safety
 * `r` must come from [`fhnreg_simulate`]; NULL is ignored.
 */
void fhnreg_run_free(struct FhnRun *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FHNREG_H */
