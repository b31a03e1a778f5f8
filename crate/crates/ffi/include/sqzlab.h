/* C interface to the sqzlab measurement-and-feedforward squeezer simulator. */

#ifndef SQZLAB_H
#define SQZLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every fallible call.
 */
typedef enum SqzStatus {
  SQZ_STATUS_OK = 0,
  /*
   A required pointer argument was NULL.
   */
  SQZ_STATUS_NULL_POINTER = 1,
  /*
   An argument lies outside the operation's domain.
   */
  SQZ_STATUS_INVALID_ARGUMENT = 2,
  /*
   A state or transform stopped being physical.
   */
  SQZ_STATUS_INVARIANT_VIOLATION = 3,
  /*
   A configuration document was rejected.
   */
  SQZ_STATUS_CONFIG_ERROR = 4,
  /*
   Reading or writing files failed.
   */
  SQZ_STATUS_IO_ERROR = 5,
  /*
   A string argument was not valid UTF-8.
   */
  SQZ_STATUS_INVALID_UTF8 = 6,
  /*
   An internal error; the library caught a panic.
   */
  SQZ_STATUS_PANIC = 7,
} SqzStatus;

/*
 Opaque imperfection model.
 */
typedef struct SqzImperfections SqzImperfections;

/*
 Opaque squeezer settings: transmittance, ancilla squeezing, gain and
 squeezing angle.
 */
typedef struct SqzProtocol SqzProtocol;

/*
 Opaque single-mode Gaussian state.
 */
typedef struct SqzState SqzState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message describing the last failed call on this thread, or an empty
 string after a successful call. The pointer stays valid until the next
 library call on the same thread.
 */
const char *sqz_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *sqz_version(void);

/*
 Releases a string returned by the library.

 # Safety
 `s` must be NULL or a string returned by this library and not yet freed.
 */
void sqz_string_free(char *s);

/*
 Vacuum state.

 # Safety
 `out` must be a valid pointer.
 */
enum SqzStatus sqz_state_vacuum(struct SqzState **out);

/*
 Coherent state with quadrature means `(mean_x, mean_p)`.

 # Safety
 `out` must be a valid pointer.
 */
enum SqzStatus sqz_state_coherent(double mean_x, double mean_p, struct SqzState **out);

/*
 Squeezed vacuum with the quadrature at `angle` squeezed by `e^{-r}`.

 # Safety
 `out` must be a valid pointer.
 */
enum SqzStatus sqz_state_squeezed_vacuum(double r, double angle, struct SqzState **out);

/*
 State from its mean `[x, p]` and row-major covariance `[xx, xp, px, pp]`.
 The covariance must be symmetric and satisfy the uncertainty relation.

 # Safety
 `mean` must point to 2 doubles, `cov` to 4, and `out` must be valid.
 */
enum SqzStatus sqz_state_from_moments(const double *mean, const double *cov, struct SqzState **out);

/*
 Copies the moments of `state` into `mean` (2 doubles) and `cov` (4
 doubles, row-major). Either output may be NULL to skip it.

 # Safety
 `state` must be a valid handle; non-NULL outputs must have room for 2
 and 4 doubles.
 */
enum SqzStatus sqz_state_moments(const struct SqzState *state, double *mean, double *cov);

/*
 Variance of the quadrature at `angle`.

 # Safety
 `state` must be a valid handle and `out` a valid pointer.
 */
enum SqzStatus sqz_state_marginal_variance(const struct SqzState *state, double angle, double *out);

/*
 Releases a state.

 # Safety
 `state` must be NULL or a handle from this library not yet freed.
 */
void sqz_state_free(struct SqzState *state);

/*
 Squeezer with transmittance `transmittance`, an ancilla squeezed by
 `ancilla_db` dB, the nominal gain and squeezing along `x`.

 # Safety
 `out` must be a valid pointer.
 */
enum SqzStatus sqz_protocol_new(double transmittance, double ancilla_db, struct SqzProtocol **out);

/*
 Overrides the feedforward gain; NaN restores the nominal gain.

 # Safety
 `protocol` must be a valid handle.
 */
enum SqzStatus sqz_protocol_set_gain(struct SqzProtocol *protocol, double gain);

/*
 Sets the angle of the squeezed quadrature.

 # Safety
 `protocol` must be a valid handle.
 */
enum SqzStatus sqz_protocol_set_squeeze_angle(struct SqzProtocol *protocol, double angle);

/*
 Releases a protocol.

 # Safety
 `protocol` must be NULL or a handle from this library not yet freed.
 */
void sqz_protocol_free(struct SqzProtocol *protocol);

/*
 Named imperfection preset: "none", "ideal", "default" or
 "degraded-feedforward".

 # Safety
 `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SqzStatus sqz_imperfections_preset(const char *name, struct SqzImperfections **out);

/*
 Sets one field of the model by its configuration-file name, e.g.
 "homodyne_efficiency" or "phase_jitter_rad".

 # Safety
 `model` must be a valid handle and `field` a NUL-terminated string.
 */
enum SqzStatus sqz_imperfections_set(struct SqzImperfections *model,
                                     const char *field,
                                     double value);

/*
 Releases an imperfection model.

 # Safety
 `model` must be NULL or a handle from this library not yet freed.
 */
void sqz_imperfections_free(struct SqzImperfections *model);

/*
 Closed-form output of the lossless squeezer.

 # Safety
 Handles must be valid and `out` a valid pointer.
 */
enum SqzStatus sqz_ideal_output(const struct SqzProtocol *protocol,
                                const struct SqzState *input,
                                struct SqzState **out);

/*
 Ensemble output of the squeezer with imperfections.

 # Safety
 Handles must be valid and `out` a valid pointer.
 */
enum SqzStatus sqz_run_deterministic(const struct SqzProtocol *protocol,
                                     const struct SqzImperfections *imperfections,
                                     const struct SqzState *input,
                                     struct SqzState **out);

/*
 Fidelity of `actual` to the pure state `ideal`.

 # Safety
 Handles must be valid and `out` a valid pointer.
 */
enum SqzStatus sqz_fidelity(const struct SqzState *ideal,
                            const struct SqzState *actual,
                            double *out);

/*
 Noise power of a quadrature variance in dB relative to shot noise.

 # Safety
 `out` must be a valid pointer.
 */
enum SqzStatus sqz_noise_power_db(double variance, double *out);

/*
 Vacuum-ancilla fidelity `sqrt(2T / (1 + T))`.

 # Safety
 `out` must be a valid pointer.
 */
enum SqzStatus sqz_classical_limit_fidelity(double transmittance, double *out);

/*
 Compiles `x -> S x + d` (S row-major, 4 doubles; d 2 doubles) into a
 gate plan, returned as a JSON list in `out_json` (free with
 [`sqz_string_free`]).

 # Safety
 `matrix` must point to 4 doubles, `displacement` to 2, and `out_json`
 must be a valid pointer.
 */
enum SqzStatus sqz_compile(const double *matrix, const double *displacement, char **out_json);

/*
 Runs a CLI mode ("reproduce-paper", "sweep", "tomography", "trajectory"
 or "compile") on a TOML configuration document and writes the output
 files into `out_dir`.

 # Safety
 All arguments must be NUL-terminated strings.
 */
enum SqzStatus sqz_run_experiment(const char *mode, const char *config_toml, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SQZLAB_H */
