#ifndef KLAB_H
#define KLAB_H

/* Generated by cbindgen from the klab-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum {
  KLAB_STATUS_OK = 0,
  /**
   * Null pointer or malformed argument.
   */
  KLAB_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Input outside the domain of the requested formula.
   */
  KLAB_STATUS_DOMAIN = 2,
  /**
   * Numerical failure (blow-up, non-convergence).
   */
  KLAB_STATUS_NUMERICAL = 3,
  /**
   * JSON or shorthand parse failure.
   */
  KLAB_STATUS_PARSE = 4,
  KLAB_STATUS_IO = 5,
  /**
   * Caught panic.
   */
  KLAB_STATUS_INTERNAL = 6,
} KlabStatus;

/**
 * Opaque handle to the 1-D linear-drift closed form
 * `q(t) u'' - a(t) x u'` with `a(t) = a0 + a1 sin(omega t)`.
 */
typedef struct KlabOu KlabOu;

/**
 * Opaque solver result: snapshots of `G(t,s)f` on the core region.
 */
typedef struct KlabResult KlabResult;

/**
 * Opaque operator handle built from the declarative JSON form.
 */
typedef struct KlabSpec KlabSpec;

/**
 * Inputs for the explicit constant formulas. The range `[nu_min, nu_max]`
 * stands in for the values of the smallest diffusion eigenvalue; suprema
 * are taken over a dense sample of that interval.
 */
typedef struct {
  uint32_t d;
  double p;
  uint32_t k;
  double gamma;
  double nu0;
  double c0;
  /**
   * C in `|D^beta q| <= C nu^gamma`.
   */
  double diffusion_deriv_bound;
  /**
   * K in the second-derivative form bound.
   */
  double k_form;
  double m;
  double l;
  double r0;
  double lambda0;
  double m2;
  double m3;
  double nu_min;
  double nu_max;
  /**
   * Proof parameters of the order-lowering prefactor (defaults 4, 1, 1).
   */
  double alpha;
  double k1_weight;
  double k2_weight;
} KlabConstantInputs;

/**
 * Scalar callback: `f(x, user_data)`.
 */
typedef double (*KlabScalarFn)(double, void*);

/**
 * Stepper and exhaustion options; `klab_solve_options_default` fills the
 * library defaults.
 */
typedef struct {
  double theta;
  double dt;
  double h;
  double r_start;
  double r_step;
  uintptr_t max_levels;
  double tol_exhaust;
} KlabSolveOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version string (static storage, do not free).
 */
const char *klab_version(void);

/**
 * Last error message of the calling thread; empty string when none.
 * The pointer stays valid until the next failing call on this thread.
 */
const char *klab_last_error_message(void);

/**
 * Frees a string returned through a `char**` output.
 *
 * # Safety
 * `s` must have been produced by this library and not freed before.
 */
void klab_string_free(char *s);

/**
 * Growth exponent of the same-order pointwise derivative estimate.
 */
KlabStatus klab_sigma_kp(const KlabConstantInputs *inputs, double *out);

/**
 * Growth exponent of the gradient-chain estimate.
 */
KlabStatus klab_phi_pk(const KlabConstantInputs *inputs, double *out);

/**
 * Order-lowering prefactor from second to third derivatives at lag `r`.
 */
KlabStatus klab_gamma_p23(double r, const KlabConstantInputs *inputs, double *out);

/**
 * Entropy constant `p^2 lambda0 / (2 |r0|)`.
 */
KlabStatus klab_log_sobolev_constant(double p, double lambda0, double r0, double *out);

/**
 * Lag after which the evolution operator contracts `L^p` into `L^q`.
 */
KlabStatus klab_hypercontractivity_threshold(double p,
                                             double q,
                                             double lambda0,
                                             double nu0,
                                             double r0,
                                             double *out);

/**
 * Creates the closed-form handle. `q0` must be positive.
 */
KlabStatus klab_ou_new(double a0, double a1, double omega, double q0, KlabOu **out);

/**
 * # Safety
 * `handle` must come from `klab_ou_new` and not be freed twice.
 */
void klab_ou_free(KlabOu *handle);

/**
 * `(G(t,s) f)(x)` through the closed form; `f` is a caller callback.
 */
KlabStatus klab_ou_evolve(const KlabOu *handle,
                          KlabScalarFn f,
                          void *user_data,
                          double s,
                          double t,
                          double x,
                          double *out);

/**
 * Variance of the tight Gaussian family at time `t`.
 */
KlabStatus klab_ou_tight_variance(const KlabOu *handle, double t, double *out);

/**
 * Parses a declarative operator description (same JSON as scenario files).
 */
KlabStatus klab_spec_from_json(const char *json, KlabSpec **out);

/**
 * # Safety
 * `handle` must come from `klab_spec_from_json` and not be freed twice.
 */
void klab_spec_free(KlabSpec *handle);

KlabStatus klab_solve_options_default(KlabSolveOptions *out);

/**
 * Builds `G(t,s)f` by domain exhaustion for a caller-supplied datum.
 */
KlabStatus klab_solve(const KlabSpec *spec,
                      KlabScalarFn f,
                      void *user_data,
                      double s,
                      const double *times,
                      uintptr_t n_times,
                      const KlabSolveOptions *options,
                      KlabResult **out);

/**
 * Number of recorded snapshots (including the initial one).
 */
uintptr_t klab_result_time_count(const KlabResult *result);

/**
 * Nodes per snapshot.
 */
uintptr_t klab_result_node_count(const KlabResult *result);

/**
 * Half-width of the (core-restricted) snapshot box.
 */
double klab_result_half_width(const KlabResult *result);

/**
 * Time of snapshot `index`.
 */
double klab_result_time(const KlabResult *result, uintptr_t index);

/**
 * Copies snapshot `index` into `buffer` (`len` must be the node count).
 */
KlabStatus klab_result_values(const KlabResult *result,
                              uintptr_t index,
                              double *buffer,
                              uintptr_t len);

/**
 * # Safety
 * `result` must come from `klab_solve` and not be freed twice.
 */
void klab_result_free(KlabResult *result);

/**
 * Tail-integrability classification.
 * Request: `{"q": 1.0, "b": {"kind": "cubic"}, "cutoffs": [2,3,4,5,6,8]}`.
 * Response: the verdict as JSON (free with `klab_string_free`).
 */
KlabStatus klab_feller_classify_json(const char *request, char **out_json);

/**
 * Runs a full scenario (same JSON as `klab run`); returns the summary.
 */
KlabStatus klab_run_scenario_json(const char *scenario_json, char **out_summary_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KLAB_H */
