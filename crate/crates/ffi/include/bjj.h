#ifndef BJJ_H
#define BJJ_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BjjStatus {
  BJJ_STATUS_OK = 0,
  BJJ_STATUS_NULL_POINTER = 1,
  BJJ_STATUS_INVALID_ARGUMENT = 2,
  BJJ_STATUS_NUMERICAL = 3,
  BJJ_STATUS_PANIC = 4,
} BjjStatus;

typedef enum BjjRegime {
  BJJ_REGIME_RABI = 0,
  BJJ_REGIME_JOSEPHSON = 1,
  BJJ_REGIME_FOCK = 2,
} BjjRegime;

typedef enum BjjColumn {
  BJJ_COLUMN_TIME = 0,
  BJJ_COLUMN_S1 = 1,
  BJJ_COLUMN_S2 = 2,
  BJJ_COLUMN_S3 = 3,
  BJJ_COLUMN_S3_SQ = 4,
  BJJ_COLUMN_G1 = 5,
  BJJ_COLUMN_N_MEAN = 6,
  /**
   * `-d ln g1 / dt`; NaN where undefined.
   */
  BJJ_COLUMN_GAMMA = 7,
  BJJ_COLUMN_TRACE = 8,
} BjjColumn;

/**
 * Opaque result of [`bjj_semiclassical`].
 */
typedef struct BjjEnsemble BjjEnsemble;

/**
 * Opaque result of [`bjj_evolve`].
 */
typedef struct BjjEvolution BjjEvolution;

typedef struct BjjParams {
  size_t n;
  double epsilon;
  double j;
  /**
   * Interaction per pair.
   */
  double u;
} BjjParams;

typedef struct BjjCharacteristics {
  /**
   * Dimensionless interaction `N U / J`.
   */
  double u;
  double xi;
  double omega_j;
  double eps_c;
  enum BjjRegime regime;
} BjjCharacteristics;

typedef struct BjjNoise {
  double gamma1;
  double gamma2;
  double gamma3;
  double gamma_l;
  double gamma_r;
} BjjNoise;

/**
 * Double-well trap in SI units; `v0` is the barrier height over `h` in Hz.
 * Zero `mass` or `a_s` selects rubidium-87.
 */
typedef struct BjjTrapSpec {
  double d;
  double v0;
  double omega_x;
  double omega_perp;
  size_t n;
  double mass;
  double a_s;
} BjjTrapSpec;

typedef struct BjjTrapResult {
  /**
   * Axial chemical potential (Hz).
   */
  double mu_parallel;
  double mu_chemical;
  /**
   * Tunneling and interaction over `h` (Hz).
   */
  double j;
  double u;
  double u_dimless;
  double xi;
  double omega_j_hz;
  double cross_ratio;
  bool two_mode_valid;
  bool fock;
  bool loss_enhanced;
} BjjTrapResult;

typedef struct BjjLifetimeFit {
  /**
   * Coefficients of `1/tau = c / z0^2` (m^2/s).
   */
  double c_total;
  double c1;
  double c2;
  /**
   * Current noise (A/sqrt(Hz)); an upper bound when `johnson_dominated`.
   */
  double current;
  bool johnson_dominated;
  double slope_free;
} BjjLifetimeFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Owned by the
 * library; valid until the next `bjj_*` call on the same thread.
 */
const char *bjj_last_error(void);

/**
 * # Safety
 * `params` must be null or point to a valid `BjjParams`; `out` likewise for writing.
 */
enum BjjStatus bjj_characteristics(const struct BjjParams *params, struct BjjCharacteristics *out);

/**
 * Coherence of the ground state.
 *
 * # Safety
 * `params` and `out` must be null or valid.
 */
enum BjjStatus bjj_ground_g1(const struct BjjParams *params, double *out);

/**
 * Coherence of the canonical state at temperature `kt` (units of energy, same as `J`).
 *
 * # Safety
 * `params` and `out` must be null or valid.
 */
enum BjjStatus bjj_thermal_g1(const struct BjjParams *params, double kt, double *out);

/**
 * Evolves the ground state of `params` under `noise` and samples
 * `steps + 1` equally spaced times on `[0, t_end]`.
 *
 * # Safety
 * `params`, `noise` and `out` must be null or valid. On success `*out` owns
 * a handle to be released with [`bjj_evolution_free`].
 */
enum BjjStatus bjj_evolve(const struct BjjParams *params,
                          const struct BjjNoise *noise,
                          double t_end,
                          size_t steps,
                          double tol,
                          struct BjjEvolution **out);

/**
 * Number of samples in the evolution, 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live handle from [`bjj_evolve`].
 */
size_t bjj_evolution_len(const struct BjjEvolution *h);

/**
 * Copies one column into `buf`, which must hold `len` doubles with `len`
 * equal to [`bjj_evolution_len`].
 *
 * # Safety
 * `h` must be a live handle and `buf` must be valid for `len` writes.
 */
enum BjjStatus bjj_evolution_column(const struct BjjEvolution *h,
                                    enum BjjColumn column,
                                    double *buf,
                                    size_t len);

/**
 * # Safety
 * `h` must be null or a handle from [`bjj_evolve`] not yet freed.
 */
void bjj_evolution_free(struct BjjEvolution *h);

/**
 * Truncated-Wigner ensemble of `trajectories` samples from the ground
 * state, recorded at `steps + 1` times on `[0, t_end]`. Deterministic for a
 * given `seed` regardless of thread count.
 *
 * # Safety
 * `params`, `noise` and `out` must be null or valid. On success `*out` owns
 * a handle to be released with [`bjj_ensemble_free`].
 */
enum BjjStatus bjj_semiclassical(const struct BjjParams *params,
                                 const struct BjjNoise *noise,
                                 double t_end,
                                 size_t steps,
                                 size_t trajectories,
                                 uint64_t seed,
                                 struct BjjEnsemble **out);

/**
 * # Safety
 * `h` must be null or a live handle from [`bjj_semiclassical`].
 */
size_t bjj_ensemble_len(const struct BjjEnsemble *h);

/**
 * Copies the sample times and the direct and Gaussian coherence estimates.
 * Any of the three buffers may be null to skip it; each non-null buffer must
 * hold `len` doubles, `len` equal to [`bjj_ensemble_len`].
 *
 * # Safety
 * `h` must be a live handle and each non-null buffer valid for `len` writes.
 */
enum BjjStatus bjj_ensemble_coherence(const struct BjjEnsemble *h,
                                      double *t,
                                      double *direct,
                                      double *gaussian,
                                      size_t len);

/**
 * # Safety
 * `h` must be null or a handle from [`bjj_semiclassical`] not yet freed.
 */
void bjj_ensemble_free(struct BjjEnsemble *h);

/**
 * Solves the trapped ground state on `points` grid points (0 for the
 * default) and extracts the two-mode parameters.
 *
 * # Safety
 * `spec` and `out` must be null or valid.
 */
enum BjjStatus bjj_trap_analyze(const struct BjjTrapSpec *spec,
                                size_t points,
                                struct BjjTrapResult *out);

/**
 * Fits `n` lifetime measurements (distance in m, lifetime and its error in
 * s) with the default gold-chip constants.
 *
 * # Safety
 * `z0`, `tau` and `sigma` must each be valid for `n` reads; `out` must be
 * null or valid.
 */
enum BjjStatus bjj_lifetime_fit(const double *z0,
                                const double *tau,
                                const double *sigma,
                                size_t n,
                                struct BjjLifetimeFit *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BJJ_H */
