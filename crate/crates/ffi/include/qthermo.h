/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef QTHERMO_H
#define QTHERMO_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result codes. Zero is success.
typedef enum QtStatus {
  QT_STATUS_OK = 0,
  QT_STATUS_NULL_POINTER = 1,
  // Malformed matrix, wrong length, or a state outside the domain.
  QT_STATUS_INVALID_INPUT = 2,
  // Inconsistent model, dynamics or integration settings.
  QT_STATUS_INVALID_CONFIG = 3,
  // Equilibrium targets infeasible or the solver failed.
  QT_STATUS_SOLVER = 4,
  // Integration failed (step underflow, non-finite values, step limit).
  QT_STATUS_NUMERICAL = 5,
  // Scenario document rejected.
  QT_STATUS_SCENARIO = 6,
  QT_STATUS_IO = 7,
  // A Rust panic was caught at the boundary.
  QT_STATUS_PANIC = 8,
} QtStatus;

typedef enum QtDynamicsKind {
  QT_DYNAMICS_KIND_UNITARY = 0,
  QT_DYNAMICS_KIND_SEA_SINGLE = 1,
  QT_DYNAMICS_KIND_SEA_COMPOSITE = 2,
  QT_DYNAMICS_KIND_NAIVE_RELAXATION = 3,
} QtDynamicsKind;

typedef struct QtDynamics QtDynamics;

typedef struct QtModel QtModel;

typedef struct QtState QtState;

typedef struct QtTrajectory QtTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Description of the last failure on this thread, or an empty string. The
// pointer stays valid until the next call into this library on the same
// thread.
const char *qt_last_error(void);

// Library version as a static NUL-terminated string.
const char *qt_version(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void qt_string_free(char *s);

// Builds a model from a Hamiltonian and `n_invariants` additional conserved
// observables stored back to back in `invariants`.
//
// # Safety
// `h` must hold `2*dim*dim` doubles, `invariants` `n_invariants` times that,
// and `out` must be writable.
enum QtStatus qt_model_new(size_t dim,
                           const double *h,
                           size_t n_invariants,
                           const double *invariants,
                           struct QtModel **out);

// Builds a bipartite model with `H = H_A ⊗ I + I ⊗ H_B`.
//
// # Safety
// `h_a` and `h_b` must hold `2*dim_a*dim_a` and `2*dim_b*dim_b` doubles;
// `out` must be writable.
enum QtStatus qt_model_noninteracting(size_t dim_a,
                                      const double *h_a,
                                      size_t dim_b,
                                      const double *h_b,
                                      struct QtModel **out);

// Hilbert-space dimension, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live model handle.
size_t qt_model_dim(const struct QtModel *model);

// # Safety
// `model` must be null or a live model handle, not used afterwards.
void qt_model_free(struct QtModel *model);

// Validates `rho` as a density operator and wraps it.
//
// # Safety
// `rho` must hold `2*dim*dim` doubles and `out` must be writable.
enum QtStatus qt_state_new(size_t dim, const double *rho, struct QtState **out);

// `exp(-beta H + sum nu_i G_i) / Z` for the model.
//
// # Safety
// `model` must be live, `nu` must hold `n_nu` doubles and `out` must be
// writable.
enum QtStatus qt_state_gibbs(const struct QtModel *model,
                             double beta,
                             const double *nu,
                             size_t n_nu,
                             struct QtState **out);

// # Safety
// `state` must be null or a live state handle.
size_t qt_state_dim(const struct QtState *state);

// Copies the density matrix into `out` (`len >= 2*dim*dim` doubles).
//
// # Safety
// `state` must be live and `out` must hold `len` writable doubles.
enum QtStatus qt_state_matrix(const struct QtState *state, double *out, size_t len);

// # Safety
// `state` must be null or a live state handle, not used afterwards.
void qt_state_free(struct QtState *state);

// Von Neumann entropy `-k_B Tr(rho ln rho)`.
//
// # Safety
// `state` must be live and `out` writable.
enum QtStatus qt_entropy(const struct QtState *state, double k_b, double *out);

// `Tr(rho X)` for a Hermitian `X` of the state's dimension.
//
// # Safety
// `state` must be live, `x` must hold `2*dim*dim` doubles and `out` must be
// writable.
enum QtStatus qt_expectation(const struct QtState *state, const double *x, double *out);

// Half the trace norm of the difference.
//
// # Safety
// Both states must be live and `out` writable.
enum QtStatus qt_trace_distance(const struct QtState *a, const struct QtState *b, double *out);

// Maximum-entropy state at mean energy `e` and invariant targets `g`.
// `beta` may be null.
//
// # Safety
// `model` must be live, `g` must hold `n_g` doubles, `out` must be writable
// and `beta` null or writable.
enum QtStatus qt_solve_gibbs(const struct QtModel *model,
                             double e,
                             const double *g,
                             size_t n_g,
                             struct QtState **out,
                             double *beta);

// Dynamics of the given kind; `tau` holds one relaxation time per
// subsystem (or one shared value). `n_tau = 0` keeps the default.
//
// # Safety
// `tau` must hold `n_tau` doubles and `out` must be writable.
enum QtStatus qt_dynamics_new(enum QtDynamicsKind kind,
                              const double *tau,
                              size_t n_tau,
                              struct QtDynamics **out);

// # Safety
// `dynamics` must be null or a live handle, not used afterwards.
void qt_dynamics_free(struct QtDynamics *dynamics);

// Writes `d rho / dt` (Hamiltonian plus dissipative term) into `out`.
//
// # Safety
// Handles must be live and `out` must hold `len` writable doubles.
enum QtStatus qt_motion(const struct QtModel *model,
                        const struct QtDynamics *dynamics,
                        const struct QtState *state,
                        double *out,
                        size_t len);

// Propagates `state` over `[0, t_final]`, sampling `samples + 1` uniform
// instants. Non-positive `rtol`/`atol` keep the defaults; `strict` selects
// the projecting repair mode.
//
// # Safety
// Handles must be live and `out` must be writable.
enum QtStatus qt_propagate(const struct QtModel *model,
                           const struct QtDynamics *dynamics,
                           const struct QtState *state,
                           double t_final,
                           size_t samples,
                           double rtol,
                           double atol,
                           bool strict,
                           struct QtTrajectory **out);

// Number of samples, or 0 for a null handle.
//
// # Safety
// `traj` must be null or a live handle.
size_t qt_trajectory_len(const struct QtTrajectory *traj);

// Time and a copy of the state at sample `index`. Either output may be
// null.
//
// # Safety
// `traj` must be live; `time` and `state` must be null or writable.
enum QtStatus qt_trajectory_sample(const struct QtTrajectory *traj,
                                   size_t index,
                                   double *time,
                                   struct QtState **state);

// The trajectory as CSV text; release with [`qt_string_free`].
//
// # Safety
// `traj` must be live and `out` writable.
enum QtStatus qt_trajectory_csv(const struct QtTrajectory *traj, char **out);

// # Safety
// `traj` must be null or a live handle, not used afterwards.
void qt_trajectory_free(struct QtTrajectory *traj);

// Runs a scenario document and returns the canonical JSON report in
// `report` (release with [`qt_string_free`]). `all_passed` may be null.
// `profile` is "default", "strict", "loose" or null for the default.
//
// # Safety
// `json` and `profile` must be null or NUL-terminated; `report` must be
// writable and `all_passed` null or writable.
enum QtStatus qt_run_scenario_json(const char *json,
                                   const char *profile,
                                   char **report,
                                   bool *all_passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QTHERMO_H */
