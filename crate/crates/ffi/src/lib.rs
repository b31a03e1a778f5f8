//! C ABI for the squeezer simulator.
//!
//! Conventions:
//!
//! - Every fallible function returns an [`SqzStatus`]; results go through
//!   out-pointers. On failure, [`sqz_last_error_message`] describes the
//!   error for the calling thread.
//! - Objects are opaque handles created by `*_new`/constructor functions and
//!   released with the matching `*_free`. Freeing NULL is a no-op.
//! - Strings returned by the library are released with [`sqz_string_free`].
//! - Quadratures are ordered `(x, p)`, vacuum variance 1/4; 2x2 matrices are
//!   passed row-major as four doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use sqzlab::compiler::plan_from_unitary;
use sqzlab::experiment::{parse_config, run, ConfigError, Mode};
use sqzlab::metrology::{classical_limit_fidelity, fidelity_gaussian, noise_power_db};
use sqzlab::squeezer::{ideal_output_map, run_deterministic, ImperfectionModel, ProtocolConfig};
use sqzlab::{GaussianState, SqzError};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SqzStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// An argument lies outside the operation's domain.
    InvalidArgument = 2,
    /// A state or transform stopped being physical.
    InvariantViolation = 3,
    /// A configuration document was rejected.
    ConfigError = 4,
    /// Reading or writing files failed.
    IoError = 5,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 6,
    /// An internal error; the library caught a panic.
    Panic = 7,
}

/// Opaque single-mode Gaussian state.
pub struct SqzState(GaussianState);

/// Opaque squeezer settings: transmittance, ancilla squeezing, gain and
/// squeezing angle.
pub struct SqzProtocol(ProtocolConfig);

/// Opaque imperfection model.
pub struct SqzImperfections(ImperfectionModel);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("NUL bytes removed"));
}

enum Failure {
    Status(SqzStatus, String),
}

impl From<SqzError> for Failure {
    fn from(e: SqzError) -> Self {
        let status = if e.is_invariant_violation() {
            SqzStatus::InvariantViolation
        } else if matches!(e, SqzError::Io(_) | SqzError::Json(_)) {
            SqzStatus::IoError
        } else {
            SqzStatus::InvalidArgument
        };
        Failure::Status(status, e.to_string())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Status(SqzStatus::ConfigError, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Status(SqzStatus::IoError, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(SqzStatus::NullPointer, format!("`{what}` is NULL"))
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SqzStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SqzStatus::Ok
        }
        Ok(Err(Failure::Status(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal error (panic caught at the C boundary)");
            SqzStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Status(SqzStatus::InvalidUtf8, format!("`{what}` is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

fn owned_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::Status(SqzStatus::InvalidArgument, "string contains NUL".into()))
}

/// Message describing the last failed call on this thread, or an empty
/// string after a successful call. The pointer stays valid until the next
/// library call on the same thread.
#[no_mangle]
pub extern "C" fn sqz_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sqz_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by the library.
///
/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sqz_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---- states ----

/// Vacuum state.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sqz_state_vacuum(out: *mut *mut SqzState) -> SqzStatus {
    guard(|| {
        *out_arg(out, "out")? = boxed(SqzState(GaussianState::vacuum(1)?));
        Ok(())
    })
}

/// Coherent state with quadrature means `(mean_x, mean_p)`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sqz_state_coherent(mean_x: f64, mean_p: f64, out: *mut *mut SqzState) -> SqzStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if !(mean_x.is_finite() && mean_p.is_finite()) {
            return Err(Failure::Status(SqzStatus::InvalidArgument, "means must be finite".into()));
        }
        *out = boxed(SqzState(GaussianState::coherent(mean_x, mean_p)));
        Ok(())
    })
}

/// Squeezed vacuum with the quadrature at `angle` squeezed by `e^{-r}`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sqz_state_squeezed_vacuum(r: f64, angle: f64, out: *mut *mut SqzState) -> SqzStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let s = GaussianState::squeezed_vacuum(r, angle);
        s.validate()?;
        *out = boxed(SqzState(s));
        Ok(())
    })
}

/// State from its mean `[x, p]` and row-major covariance `[xx, xp, px, pp]`.
/// The covariance must be symmetric and satisfy the uncertainty relation.
///
/// # Safety
/// `mean` must point to 2 doubles, `cov` to 4, and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sqz_state_from_moments(
    mean: *const f64,
    cov: *const f64,
    out: *mut *mut SqzState,
) -> SqzStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if mean.is_null() {
            return Err(null("mean"));
        }
        if cov.is_null() {
            return Err(null("cov"));
        }
        let m = std::slice::from_raw_parts(mean, 2);
        let c = std::slice::from_raw_parts(cov, 4);
        let s = GaussianState::new(DVector::from_column_slice(m), DMatrix::from_row_slice(2, 2, c))?;
        *out = boxed(SqzState(s));
        Ok(())
    })
}

/// Copies the moments of `state` into `mean` (2 doubles) and `cov` (4
/// doubles, row-major). Either output may be NULL to skip it.
///
/// # Safety
/// `state` must be a valid handle; non-NULL outputs must have room for 2
/// and 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn sqz_state_moments(state: *const SqzState, mean: *mut f64, cov: *mut f64) -> SqzStatus {
    guard(|| {
        let s = &ref_arg(state, "state")?.0;
        let (m, c) = (s.mode_mean(0), s.mode_cov(0));
        if !mean.is_null() {
            std::slice::from_raw_parts_mut(mean, 2).copy_from_slice(&[m[0], m[1]]);
        }
        if !cov.is_null() {
            std::slice::from_raw_parts_mut(cov, 4).copy_from_slice(&[c[(0, 0)], c[(0, 1)], c[(1, 0)], c[(1, 1)]]);
        }
        Ok(())
    })
}

/// Variance of the quadrature at `angle`.
///
/// # Safety
/// `state` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sqz_state_marginal_variance(state: *const SqzState, angle: f64, out: *mut f64) -> SqzStatus {
    guard(|| {
        let s = &ref_arg(state, "state")?.0;
        *out_arg(out, "out")? = s.marginal_variance(0, angle)?;
        Ok(())
    })
}

/// Releases a state.
///
/// # Safety
/// `state` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sqz_state_free(state: *mut SqzState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

// ---- protocol and imperfections ----

/// Squeezer with transmittance `transmittance`, an ancilla squeezed by
/// `ancilla_db` dB, the nominal gain and squeezing along `x`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sqz_protocol_new(transmittance: f64, ancilla_db: f64, out: *mut *mut SqzProtocol) -> SqzStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = boxed(SqzProtocol(ProtocolConfig::with_ancilla_db(transmittance, ancilla_db)?));
        Ok(())
    })
}

/// Overrides the feedforward gain; NaN restores the nominal gain.
///
/// # Safety
/// `protocol` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn sqz_protocol_set_gain(protocol: *mut SqzProtocol, gain: f64) -> SqzStatus {
    guard(|| {
        let p = &mut out_arg(protocol, "protocol")?.0;
        let mut next = *p;
        next.gain = if gain.is_nan() { None } else { Some(gain) };
        next.validate()?;
        *p = next;
        Ok(())
    })
}

/// Sets the angle of the squeezed quadrature.
///
/// # Safety
/// `protocol` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn sqz_protocol_set_squeeze_angle(protocol: *mut SqzProtocol, angle: f64) -> SqzStatus {
    guard(|| {
        let p = &mut out_arg(protocol, "protocol")?.0;
        let mut next = *p;
        next.squeeze_angle = angle;
        next.validate()?;
        *p = next;
        Ok(())
    })
}

/// Releases a protocol.
///
/// # Safety
/// `protocol` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sqz_protocol_free(protocol: *mut SqzProtocol) {
    if !protocol.is_null() {
        drop(Box::from_raw(protocol));
    }
}

/// Named imperfection preset: "none", "ideal", "default" or
/// "degraded-feedforward".
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sqz_imperfections_preset(name: *const c_char, out: *mut *mut SqzImperfections) -> SqzStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        let out = out_arg(out, "out")?;
        let m = ImperfectionModel::preset(name)
            .ok_or_else(|| Failure::Status(SqzStatus::InvalidArgument, format!("unknown preset `{name}`")))?;
        *out = boxed(SqzImperfections(m));
        Ok(())
    })
}

/// Sets one field of the model by its configuration-file name, e.g.
/// "homodyne_efficiency" or "phase_jitter_rad".
///
/// # Safety
/// `model` must be a valid handle and `field` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sqz_imperfections_set(
    model: *mut SqzImperfections,
    field: *const c_char,
    value: f64,
) -> SqzStatus {
    guard(|| {
        let field = str_arg(field, "field")?;
        let m = &mut out_arg(model, "model")?.0;
        let mut next = *m;
        match field {
            "homodyne_efficiency" => next.homodyne_efficiency = value,
            "detector_efficiency" => next.detector_efficiency = value,
            "propagation_efficiency" => next.propagation_efficiency = value,
            "electronic_noise_db" => next.electronic_noise_db = Some(value),
            "phase_jitter_rad" => next.phase_jitter_rad = value,
            "lo_phase_jitter_rad" => next.lo_phase_jitter_rad = Some(value),
            "displacement_coupler" => next.displacement_coupler = value,
            "gain_error" => next.gain_error = value,
            other => {
                return Err(Failure::Status(
                    SqzStatus::InvalidArgument,
                    format!("unknown imperfection field `{other}`"),
                ))
            }
        }
        next.validate()?;
        *m = next;
        Ok(())
    })
}

/// Releases an imperfection model.
///
/// # Safety
/// `model` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sqz_imperfections_free(model: *mut SqzImperfections) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

// ---- protocol runs and metrics ----

/// Closed-form output of the lossless squeezer.
///
/// # Safety
/// Handles must be valid and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sqz_ideal_output(
    protocol: *const SqzProtocol,
    input: *const SqzState,
    out: *mut *mut SqzState,
) -> SqzStatus {
    guard(|| {
        let p = &ref_arg(protocol, "protocol")?.0;
        let input = &ref_arg(input, "input")?.0;
        let out = out_arg(out, "out")?;
        *out = boxed(SqzState(ideal_output_map(p, input)?));
        Ok(())
    })
}

/// Ensemble output of the squeezer with imperfections.
///
/// # Safety
/// Handles must be valid and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sqz_run_deterministic(
    protocol: *const SqzProtocol,
    imperfections: *const SqzImperfections,
    input: *const SqzState,
    out: *mut *mut SqzState,
) -> SqzStatus {
    guard(|| {
        let p = &ref_arg(protocol, "protocol")?.0;
        let m = &ref_arg(imperfections, "imperfections")?.0;
        let input = &ref_arg(input, "input")?.0;
        let out = out_arg(out, "out")?;
        *out = boxed(SqzState(run_deterministic(p, m, input)?.output));
        Ok(())
    })
}

/// Fidelity of `actual` to the pure state `ideal`.
///
/// # Safety
/// Handles must be valid and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sqz_fidelity(ideal: *const SqzState, actual: *const SqzState, out: *mut f64) -> SqzStatus {
    guard(|| {
        let ideal = &ref_arg(ideal, "ideal")?.0;
        let actual = &ref_arg(actual, "actual")?.0;
        *out_arg(out, "out")? = fidelity_gaussian(ideal, actual)?.fidelity;
        Ok(())
    })
}

/// Noise power of a quadrature variance in dB relative to shot noise.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sqz_noise_power_db(variance: f64, out: *mut f64) -> SqzStatus {
    guard(|| {
        *out_arg(out, "out")? = noise_power_db(variance)?;
        Ok(())
    })
}

/// Vacuum-ancilla fidelity `sqrt(2T / (1 + T))`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sqz_classical_limit_fidelity(transmittance: f64, out: *mut f64) -> SqzStatus {
    guard(|| {
        *out_arg(out, "out")? = classical_limit_fidelity(transmittance)?;
        Ok(())
    })
}

/// Compiles `x -> S x + d` (S row-major, 4 doubles; d 2 doubles) into a
/// gate plan, returned as a JSON list in `out_json` (free with
/// [`sqz_string_free`]).
///
/// # Safety
/// `matrix` must point to 4 doubles, `displacement` to 2, and `out_json`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sqz_compile(
    matrix: *const f64,
    displacement: *const f64,
    out_json: *mut *mut c_char,
) -> SqzStatus {
    guard(|| {
        let out = out_arg(out_json, "out_json")?;
        if matrix.is_null() {
            return Err(null("matrix"));
        }
        if displacement.is_null() {
            return Err(null("displacement"));
        }
        let s = Matrix2::from_row_slice(std::slice::from_raw_parts(matrix, 4));
        let d = Vector2::from_column_slice(std::slice::from_raw_parts(displacement, 2));
        let plan = plan_from_unitary(&s, &d)?;
        *out = owned_string(serde_json::to_string(&plan).map_err(SqzError::from)?)?;
        Ok(())
    })
}

/// Runs a CLI mode ("reproduce-paper", "sweep", "tomography", "trajectory"
/// or "compile") on a TOML configuration document and writes the output
/// files into `out_dir`.
///
/// # Safety
/// All arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn sqz_run_experiment(
    mode: *const c_char,
    config_toml: *const c_char,
    out_dir: *const c_char,
) -> SqzStatus {
    guard(|| {
        let mode: Mode = str_arg(mode, "mode")?
            .parse()
            .map_err(|e: String| Failure::Status(SqzStatus::InvalidArgument, e))?;
        let text = str_arg(config_toml, "config_toml")?;
        let dir = str_arg(out_dir, "out_dir")?;
        let loaded = parse_config(text, "<config>", &[], None)?;
        run(mode, &loaded)?.write_to(Path::new(dir))?;
        Ok(())
    })
}
