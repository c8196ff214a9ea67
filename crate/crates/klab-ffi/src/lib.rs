//! C ABI for the klab numerical laboratory.
//!
//! Conventions:
//! - every fallible call returns a [`KlabStatus`]; outputs go through
//!   pointers supplied by the caller;
//! - handles (`KlabSpec`, `KlabOu`, `KlabResult`) are opaque and freed with
//!   their matching `_free` function;
//! - strings returned through `char**` are owned by the caller and must be
//!   released with `klab_string_free`;
//! - the last error message of the calling thread is available via
//!   `klab_last_error_message` (valid until the next failing call).
//!
//! All functions are panic-safe: a panic is caught and surfaced as
//! `KLAB_STATUS_INTERNAL`.

// Entry points null-check every pointer before touching it and report
// through status codes; the handle contracts live in the per-function
// `# Safety` sections of the destructors.
#![allow(clippy::not_unsafe_ptr_arg_deref)]

use klab::catalogue::{DriftSpec, OperatorSpecDef};
use klab::constants::{self, ConstantInputs};
use klab::error::KlabError;
use klab::feller::{self, FellerProblem};
use klab::operator::OperatorSpec;
use klab::oracles::OuSpec1D;
use klab::scenario::{self, Scenario};
use klab::solver::{self, EvolutionResult, ExhaustionParams, SchemeParams};
use libc::{c_char, c_void};
use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KlabStatus {
    KlabStatusOk = 0,
    /// Null pointer or malformed argument.
    KlabStatusInvalidArgument = 1,
    /// Input outside the domain of the requested formula.
    KlabStatusDomain = 2,
    /// Numerical failure (blow-up, non-convergence).
    KlabStatusNumerical = 3,
    /// JSON or shorthand parse failure.
    KlabStatusParse = 4,
    KlabStatusIo = 5,
    /// Caught panic.
    KlabStatusInternal = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: &str) {
    let owned = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(owned));
}

fn status_of(err: &KlabError) -> KlabStatus {
    match err {
        KlabError::Domain(_) => KlabStatus::KlabStatusDomain,
        KlabError::Parse(_) => KlabStatus::KlabStatusParse,
        KlabError::Io(_) => KlabStatus::KlabStatusIo,
        KlabError::Blowup { .. } | KlabError::MeasureNotResolved(_) => {
            KlabStatus::KlabStatusNumerical
        }
        _ => KlabStatus::KlabStatusInvalidArgument,
    }
}

fn guard<F: FnOnce() -> Result<(), (KlabStatus, String)>>(body: F) -> KlabStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => KlabStatus::KlabStatusOk,
        Ok(Err((status, message))) => {
            set_error(&message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(&message);
            KlabStatus::KlabStatusInternal
        }
    }
}

fn fail(err: KlabError) -> (KlabStatus, String) {
    (status_of(&err), err.to_string())
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, (KlabStatus, String)> {
    if ptr.is_null() {
        return Err((
            KlabStatus::KlabStatusInvalidArgument,
            "null string argument".into(),
        ));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        (
            KlabStatus::KlabStatusInvalidArgument,
            "string argument is not valid UTF-8".into(),
        )
    })
}

fn write_out<T>(out: *mut T, value: T) -> Result<(), (KlabStatus, String)> {
    if out.is_null() {
        return Err((
            KlabStatus::KlabStatusInvalidArgument,
            "null output pointer".into(),
        ));
    }
    unsafe { out.write(value) };
    Ok(())
}

fn string_out(out: *mut *mut c_char, text: String) -> Result<(), (KlabStatus, String)> {
    let owned = CString::new(text.replace('\0', " ")).unwrap_or_default();
    write_out(out, owned.into_raw())
}

/// Library version string (static storage, do not free).
#[no_mangle]
pub extern "C" fn klab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Last error message of the calling thread; empty string when none.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn klab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|s| s.as_ptr())
            .unwrap_or(c"".as_ptr())
    })
}

/// Frees a string returned through a `char**` output.
///
/// # Safety
/// `s` must have been produced by this library and not freed before.
#[no_mangle]
pub unsafe extern "C" fn klab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------------------
// Constant calculators
// ---------------------------------------------------------------------------

/// Inputs for the explicit constant formulas. The range `[nu_min, nu_max]`
/// stands in for the values of the smallest diffusion eigenvalue; suprema
/// are taken over a dense sample of that interval.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct KlabConstantInputs {
    pub d: u32,
    pub p: f64,
    pub k: u32,
    pub gamma: f64,
    pub nu0: f64,
    pub c0: f64,
    /// C in `|D^beta q| <= C nu^gamma`.
    pub diffusion_deriv_bound: f64,
    /// K in the second-derivative form bound.
    pub k_form: f64,
    pub m: f64,
    pub l: f64,
    pub r0: f64,
    pub lambda0: f64,
    pub m2: f64,
    pub m3: f64,
    pub nu_min: f64,
    pub nu_max: f64,
    /// Proof parameters of the order-lowering prefactor (defaults 4, 1, 1).
    pub alpha: f64,
    pub k1_weight: f64,
    pub k2_weight: f64,
}

fn convert_inputs(c: &KlabConstantInputs) -> Result<ConstantInputs, (KlabStatus, String)> {
    if c.nu_min <= 0.0 || c.nu_max < c.nu_min {
        return Err((
            KlabStatus::KlabStatusDomain,
            "need 0 < nu_min <= nu_max".into(),
        ));
    }
    let samples = 129usize;
    let nu_samples: Vec<f64> = (0..samples)
        .map(|i| c.nu_min + (c.nu_max - c.nu_min) * i as f64 / (samples - 1) as f64)
        .collect();
    Ok(ConstantInputs {
        d: c.d as usize,
        p: c.p,
        k: c.k as u8,
        gamma: c.gamma,
        nu0: c.nu0,
        c0: c.c0,
        big_c: c.diffusion_deriv_bound,
        k_form: c.k_form,
        m: c.m,
        l: c.l,
        r0: c.r0,
        lambda0: c.lambda0,
        m2: c.m2,
        m3: c.m3,
        nu_samples,
        alpha: c.alpha,
        k1_weight: c.k1_weight,
        k2_weight: c.k2_weight,
    })
}

/// Growth exponent of the same-order pointwise derivative estimate.
#[no_mangle]
pub extern "C" fn klab_sigma_kp(inputs: *const KlabConstantInputs, out: *mut f64) -> KlabStatus {
    guard(|| {
        if inputs.is_null() {
            return Err((
                KlabStatus::KlabStatusInvalidArgument,
                "null inputs".into(),
            ));
        }
        let converted = convert_inputs(unsafe { &*inputs })?;
        let report = constants::sigma_kp(&converted).map_err(fail)?;
        write_out(out, report.value)
    })
}

/// Growth exponent of the gradient-chain estimate.
#[no_mangle]
pub extern "C" fn klab_phi_pk(inputs: *const KlabConstantInputs, out: *mut f64) -> KlabStatus {
    guard(|| {
        if inputs.is_null() {
            return Err((
                KlabStatus::KlabStatusInvalidArgument,
                "null inputs".into(),
            ));
        }
        let converted = convert_inputs(unsafe { &*inputs })?;
        let report = constants::phi_pk(&converted).map_err(fail)?;
        write_out(out, report.value)
    })
}

/// Order-lowering prefactor from second to third derivatives at lag `r`.
#[no_mangle]
pub extern "C" fn klab_gamma_p23(
    r: f64,
    inputs: *const KlabConstantInputs,
    out: *mut f64,
) -> KlabStatus {
    guard(|| {
        if inputs.is_null() {
            return Err((
                KlabStatus::KlabStatusInvalidArgument,
                "null inputs".into(),
            ));
        }
        let converted = convert_inputs(unsafe { &*inputs })?;
        let report = constants::gamma_p23(r, &converted).map_err(fail)?;
        write_out(out, report.value)
    })
}

/// Entropy constant `p^2 lambda0 / (2 |r0|)`.
#[no_mangle]
pub extern "C" fn klab_log_sobolev_constant(
    p: f64,
    lambda0: f64,
    r0: f64,
    out: *mut f64,
) -> KlabStatus {
    guard(|| {
        let report = constants::log_sobolev_constant(p, lambda0, r0).map_err(fail)?;
        write_out(out, report.value)
    })
}

/// Lag after which the evolution operator contracts `L^p` into `L^q`.
#[no_mangle]
pub extern "C" fn klab_hypercontractivity_threshold(
    p: f64,
    q: f64,
    lambda0: f64,
    nu0: f64,
    r0: f64,
    out: *mut f64,
) -> KlabStatus {
    guard(|| {
        let report =
            constants::hypercontractivity_threshold(p, q, lambda0, nu0, r0).map_err(fail)?;
        write_out(out, report.value)
    })
}

// ---------------------------------------------------------------------------
// Closed-form linear-drift evolution
// ---------------------------------------------------------------------------

/// Scalar callback: `f(x, user_data)`.
pub type KlabScalarFn = extern "C" fn(f64, *mut c_void) -> f64;

/// Opaque handle to the 1-D linear-drift closed form
/// `q(t) u'' - a(t) x u'` with `a(t) = a0 + a1 sin(omega t)`.
pub struct KlabOu {
    inner: OuSpec1D,
}

/// Creates the closed-form handle. `q0` must be positive.
#[no_mangle]
pub extern "C" fn klab_ou_new(
    a0: f64,
    a1: f64,
    omega: f64,
    q0: f64,
    out: *mut *mut KlabOu,
) -> KlabStatus {
    guard(|| {
        if q0 <= 0.0 {
            return Err((
                KlabStatus::KlabStatusDomain,
                "diffusion must be positive".into(),
            ));
        }
        let ou = OuSpec1D::new(
            Arc::new(move |_t| q0),
            Arc::new(move |t: f64| a0 + a1 * (omega * t).sin()),
        );
        write_out(out, Box::into_raw(Box::new(KlabOu { inner: ou })))
    })
}

/// # Safety
/// `handle` must come from `klab_ou_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn klab_ou_free(handle: *mut KlabOu) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// `(G(t,s) f)(x)` through the closed form; `f` is a caller callback.
#[no_mangle]
pub extern "C" fn klab_ou_evolve(
    handle: *const KlabOu,
    f: KlabScalarFn,
    user_data: *mut c_void,
    s: f64,
    t: f64,
    x: f64,
    out: *mut f64,
) -> KlabStatus {
    guard(|| {
        if handle.is_null() {
            return Err((
                KlabStatus::KlabStatusInvalidArgument,
                "null handle".into(),
            ));
        }
        let ou = unsafe { &(*handle).inner };
        let value = ou.evolve(&|y| f(y, user_data), s, t, x).map_err(fail)?;
        write_out(out, value)
    })
}

/// Variance of the tight Gaussian family at time `t`.
#[no_mangle]
pub extern "C" fn klab_ou_tight_variance(
    handle: *const KlabOu,
    t: f64,
    out: *mut f64,
) -> KlabStatus {
    guard(|| {
        if handle.is_null() {
            return Err((
                KlabStatus::KlabStatusInvalidArgument,
                "null handle".into(),
            ));
        }
        let ou = unsafe { &(*handle).inner };
        let gauss = ou.tight_measure(t).map_err(fail)?;
        write_out(out, gauss.variance)
    })
}

// ---------------------------------------------------------------------------
// Operator handles and the exhaustion solver
// ---------------------------------------------------------------------------

/// Opaque operator handle built from the declarative JSON form.
pub struct KlabSpec {
    built: OperatorSpec,
}

/// Parses a declarative operator description (same JSON as scenario files).
#[no_mangle]
pub extern "C" fn klab_spec_from_json(
    json: *const c_char,
    out: *mut *mut KlabSpec,
) -> KlabStatus {
    guard(|| {
        let text = unsafe { read_str(json) }?;
        let def = OperatorSpecDef::from_json(text).map_err(fail)?;
        let built = def.build().map_err(fail)?;
        write_out(out, Box::into_raw(Box::new(KlabSpec { built })))
    })
}

/// # Safety
/// `handle` must come from `klab_spec_from_json` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn klab_spec_free(handle: *mut KlabSpec) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Stepper and exhaustion options; `klab_solve_options_default` fills the
/// library defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct KlabSolveOptions {
    pub theta: f64,
    pub dt: f64,
    pub h: f64,
    pub r_start: f64,
    pub r_step: f64,
    pub max_levels: usize,
    pub tol_exhaust: f64,
}

#[no_mangle]
pub extern "C" fn klab_solve_options_default(out: *mut KlabSolveOptions) -> KlabStatus {
    guard(|| {
        let scheme = SchemeParams::default();
        let ex = ExhaustionParams::default();
        write_out(
            out,
            KlabSolveOptions {
                theta: scheme.theta,
                dt: scheme.dt,
                h: scheme.h,
                r_start: ex.r_start,
                r_step: ex.r_step,
                max_levels: ex.max_levels,
                tol_exhaust: ex.tol_exhaust,
            },
        )
    })
}

/// Opaque solver result: snapshots of `G(t,s)f` on the core region.
pub struct KlabResult {
    inner: EvolutionResult,
}

/// Builds `G(t,s)f` by domain exhaustion for a caller-supplied datum.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub extern "C" fn klab_solve(
    spec: *const KlabSpec,
    f: KlabScalarFn,
    user_data: *mut c_void,
    s: f64,
    times: *const f64,
    n_times: usize,
    options: *const KlabSolveOptions,
    out: *mut *mut KlabResult,
) -> KlabStatus {
    guard(|| {
        if spec.is_null() || times.is_null() || n_times == 0 {
            return Err((
                KlabStatus::KlabStatusInvalidArgument,
                "null spec/times or empty time list".into(),
            ));
        }
        let spec = unsafe { &*spec };
        if spec.built.dim != 1 {
            return Err((
                KlabStatus::KlabStatusDomain,
                "the C solver entry point supports d = 1".into(),
            ));
        }
        let times = unsafe { std::slice::from_raw_parts(times, n_times) };
        let (scheme, exhaustion) = if options.is_null() {
            (SchemeParams::default(), ExhaustionParams::default())
        } else {
            let o = unsafe { &*options };
            (
                SchemeParams {
                    theta: o.theta,
                    dt: o.dt,
                    h: o.h,
                    tol_solver: 1e-6,
                },
                ExhaustionParams {
                    r_start: o.r_start,
                    r_step: o.r_step,
                    max_levels: o.max_levels,
                    tol_exhaust: o.tol_exhaust,
                },
            )
        };
        let datum = |x: &[f64]| f(x[0], user_data);
        let result =
            solver::evolution_operator(&spec.built, &datum, s, times, &scheme, &exhaustion)
                .map_err(fail)?;
        write_out(out, Box::into_raw(Box::new(KlabResult { inner: result })))
    })
}

/// Number of recorded snapshots (including the initial one).
#[no_mangle]
pub extern "C" fn klab_result_time_count(result: *const KlabResult) -> usize {
    if result.is_null() {
        return 0;
    }
    unsafe { &*result }.inner.t_grid.len()
}

/// Nodes per snapshot.
#[no_mangle]
pub extern "C" fn klab_result_node_count(result: *const KlabResult) -> usize {
    if result.is_null() {
        return 0;
    }
    unsafe { &*result }.inner.last().n
}

/// Half-width of the (core-restricted) snapshot box.
#[no_mangle]
pub extern "C" fn klab_result_half_width(result: *const KlabResult) -> f64 {
    if result.is_null() {
        return f64::NAN;
    }
    unsafe { &*result }.inner.last().half_width
}

/// Time of snapshot `index`.
#[no_mangle]
pub extern "C" fn klab_result_time(result: *const KlabResult, index: usize) -> f64 {
    if result.is_null() {
        return f64::NAN;
    }
    let r = unsafe { &*result };
    r.inner.t_grid.get(index).copied().unwrap_or(f64::NAN)
}

/// Copies snapshot `index` into `buffer` (`len` must be the node count).
#[no_mangle]
pub extern "C" fn klab_result_values(
    result: *const KlabResult,
    index: usize,
    buffer: *mut f64,
    len: usize,
) -> KlabStatus {
    guard(|| {
        if result.is_null() || buffer.is_null() {
            return Err((
                KlabStatus::KlabStatusInvalidArgument,
                "null result or buffer".into(),
            ));
        }
        let r = unsafe { &*result };
        let snap = r.inner.snapshots.get(index).ok_or((
            KlabStatus::KlabStatusInvalidArgument,
            "snapshot index out of range".to_string(),
        ))?;
        if len != snap.values.len() {
            return Err((
                KlabStatus::KlabStatusInvalidArgument,
                format!(
                    "buffer holds {len} values, snapshot has {}",
                    snap.values.len()
                ),
            ));
        }
        unsafe { std::ptr::copy_nonoverlapping(snap.values.as_ptr(), buffer, len) };
        Ok(())
    })
}

/// # Safety
/// `result` must come from `klab_solve` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn klab_result_free(result: *mut KlabResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

// ---------------------------------------------------------------------------
// JSON-in / JSON-out entry points
// ---------------------------------------------------------------------------

#[derive(serde::Deserialize)]
struct FellerRequest {
    q: f64,
    b: DriftSpec,
    #[serde(default)]
    cutoffs: Option<Vec<f64>>,
}

/// Tail-integrability classification.
/// Request: `{"q": 1.0, "b": {"kind": "cubic"}, "cutoffs": [2,3,4,5,6,8]}`.
/// Response: the verdict as JSON (free with `klab_string_free`).
#[no_mangle]
pub extern "C" fn klab_feller_classify_json(
    request: *const c_char,
    out_json: *mut *mut c_char,
) -> KlabStatus {
    guard(|| {
        let text = unsafe { read_str(request) }?;
        let req: FellerRequest = serde_json::from_str(text)
            .map_err(|e| (KlabStatus::KlabStatusParse, e.to_string()))?;
        if req.q <= 0.0 {
            return Err((
                KlabStatus::KlabStatusDomain,
                "diffusion must be positive".into(),
            ));
        }
        let field = req.b.build(1).map_err(fail)?;
        let q = req.q;
        let problem = FellerProblem::new(
            Arc::new(move |_| q),
            Arc::new(move |x: f64| field.eval(0, 0.0, &[x])),
        );
        let cutoffs = req.cutoffs.unwrap_or_else(feller::default_cutoffs);
        let verdict = feller::classify(&problem, &cutoffs).map_err(fail)?;
        string_out(out_json, serde_json::to_string_pretty(&verdict).unwrap())
    })
}

/// Runs a full scenario (same JSON as `klab run`); returns the summary.
#[no_mangle]
pub extern "C" fn klab_run_scenario_json(
    scenario_json: *const c_char,
    out_summary_json: *mut *mut c_char,
) -> KlabStatus {
    guard(|| {
        let text = unsafe { read_str(scenario_json) }?;
        let parsed: Scenario = serde_json::from_str(text)
            .map_err(|e| (KlabStatus::KlabStatusParse, e.to_string()))?;
        let summary = scenario::run(&parsed).map_err(fail)?;
        string_out(
            out_summary_json,
            serde_json::to_string_pretty(&summary).unwrap(),
        )
    })
}
