//! C interface to `ebitgate`.
//!
//! Every function returns an [`EbgStatus`] and writes its results through
//! out-pointers. On failure a description is kept per thread and can be read
//! with [`ebg_last_error`]. Parameter sets and protocols are opaque handles
//! owned by the caller and released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ebitgate::entanglement::{avg_cost, e_alpha, min_cost_over_alpha, threshold_theta};
use ebitgate::model::{self, build_povm, CaseLabel, PovmWeights, ProtocolParams};
use ebitgate::protocol::{monte_carlo, random_input, target_gate, InputSpec, Protocol, RunMode, TrialRng};
use ebitgate::qmath::{fidelity, Complex, Qubit, StateVector};
use ebitgate::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EbgStatus {
    Ok = 0,
    NullPointer = 1,
    OutOfDomain = 2,
    InvalidPovm = 3,
    NoSignChange = 4,
    InvalidArgument = 5,
    Internal = 6,
    Panic = 7,
}

/// Which closed form gives the optimum.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[allow(clippy::upper_case_acronyms)]
pub enum EbgCase {
    I = 1,
    II = 2,
    Boundary = 3,
}

/// Validated `(theta, alpha)` pair.
pub struct EbgParams(ProtocolParams);

/// Protocol with fixed measurement weights.
pub struct EbgProtocol(Protocol);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct EbgOptimum {
    /// An [`EbgCase`] value.
    pub case_label: i32,
    pub x: f64,
    pub y: f64,
    pub p_max: f64,
    pub delta: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct EbgOracle {
    pub x: f64,
    pub y: f64,
    pub p: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct EbgCostReport {
    pub theta: f64,
    pub alpha: f64,
    pub e_alpha: f64,
    pub p_max: f64,
    pub avg_cost: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct EbgRunResult {
    /// POVM outcome, 1 to 3.
    pub branch: u8,
    /// 1 when `theta_f` and `b_outcome` are set.
    pub has_residual: u8,
    pub b_outcome: u8,
    pub theta_f: f64,
    pub bell_pairs_consumed: u32,
    /// Against the ideal `U(theta)` applied to the input.
    pub fidelity: f64,
    /// Final `(A, B)` amplitudes as interleaved `re, im`, index `AB`.
    pub final_state: [f64; 8],
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct EbgSummary {
    pub trials: u64,
    pub seed: u64,
    pub success_count: u64,
    pub branch_counts: [u64; 3],
    pub empirical_p: f64,
    pub analytic_p: f64,
    pub sigma: f64,
    pub z_score: f64,
    /// NaN when no run qualified.
    pub mean_fidelity: f64,
    /// NaN outside deterministic mode.
    pub mean_ebits: f64,
    pub mean_bell_pairs: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> EbgStatus {
    match e {
        Error::OutOfDomain { .. } => EbgStatus::OutOfDomain,
        Error::InvalidPovm(_) => EbgStatus::InvalidPovm,
        Error::NoSignChange { .. } => EbgStatus::NoSignChange,
        Error::InvalidArgument(_) | Error::ZeroNorm => EbgStatus::InvalidArgument,
        _ => EbgStatus::Internal,
    }
}

struct Fail(EbgStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(EbgStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> EbgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            EbgStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            EbgStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(p: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(value);
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. Valid until
/// the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn ebg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static, nul-terminated name of a status code.
#[no_mangle]
pub extern "C" fn ebg_status_name(status: EbgStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        EbgStatus::Ok => b"ok\0",
        EbgStatus::NullPointer => b"null pointer\0",
        EbgStatus::OutOfDomain => b"argument out of domain\0",
        EbgStatus::InvalidPovm => b"measurement not positive\0",
        EbgStatus::NoSignChange => b"no sign change in bracket\0",
        EbgStatus::InvalidArgument => b"invalid argument\0",
        EbgStatus::Internal => b"internal error\0",
        EbgStatus::Panic => b"panic\0",
    };
    s.as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn ebg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be valid for writes. The handle is released with
/// [`ebg_params_free`].
#[no_mangle]
pub unsafe extern "C" fn ebg_params_new(theta: f64, alpha: f64, out: *mut *mut EbgParams) -> EbgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = ProtocolParams::new(theta, alpha)?;
        out.write(Box::into_raw(Box::new(EbgParams(p))));
        Ok(())
    })
}

/// # Safety
/// `params` must come from [`ebg_params_new`] and not be used afterwards.
/// NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ebg_params_free(params: *mut EbgParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

fn case_code(c: CaseLabel) -> i32 {
    match c {
        CaseLabel::CaseI => EbgCase::I as i32,
        CaseLabel::CaseII => EbgCase::II as i32,
        CaseLabel::Boundary => EbgCase::Boundary as i32,
    }
}

/// # Safety
/// `params` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ebg_optimum(params: *const EbgParams, out: *mut EbgOptimum) -> EbgStatus {
    guard(|| {
        let p = &deref(params, "params")?.0;
        let r = model::optimum(p);
        write(
            out,
            EbgOptimum {
                case_label: case_code(r.case),
                x: r.x,
                y: r.y,
                p_max: r.p_max,
                delta: model::delta(p),
            },
            "out",
        )
    })
}

/// # Safety
/// `params` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ebg_pmax_oracle(params: *const EbgParams, resolution: f64, out: *mut EbgOracle) -> EbgStatus {
    guard(|| {
        let r = model::pmax_oracle(&deref(params, "params")?.0, resolution)?;
        write(out, EbgOracle { x: r.x, y: r.y, p: r.p }, "out")
    })
}

/// Closed-form trace and determinant of the failure element for weights
/// `(x, y)`, plus its smallest eigenvalue from the constructed matrix.
///
/// # Safety
/// `params` must be a live handle; each out-pointer must be valid for
/// writes or NULL to skip it.
#[no_mangle]
pub unsafe extern "C" fn ebg_failure_element(
    params: *const EbgParams,
    x: f64,
    y: f64,
    trace_out: *mut f64,
    det_out: *mut f64,
    min_eigenvalue_out: *mut f64,
) -> EbgStatus {
    guard(|| {
        let p = &deref(params, "params")?.0;
        let w = PovmWeights::new(x, y)?;
        for (ptr, v) in [
            (trace_out, model::tr_e3(p, &w)),
            (det_out, model::det_e3(p, &w)),
            (min_eigenvalue_out, build_povm(p, &w).e3_min_eigenvalue),
        ] {
            if !ptr.is_null() {
                ptr.write(v);
            }
        }
        Ok(())
    })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ebg_e_alpha(alpha: f64, out: *mut f64) -> EbgStatus {
    guard(|| write(out, e_alpha(alpha)?, "out"))
}

/// # Safety
/// `params` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ebg_avg_cost(params: *const EbgParams, out: *mut EbgCostReport) -> EbgStatus {
    guard(|| {
        let r = avg_cost(&deref(params, "params")?.0)?;
        write(
            out,
            EbgCostReport {
                theta: r.theta,
                alpha: r.alpha,
                e_alpha: r.e_alpha,
                p_max: r.p_max,
                avg_cost: r.avg_cost,
            },
            "out",
        )
    })
}

/// # Safety
/// `alpha_out` and `cost_out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ebg_min_cost_over_alpha(theta: f64, tol: f64, alpha_out: *mut f64, cost_out: *mut f64) -> EbgStatus {
    guard(|| {
        if alpha_out.is_null() || cost_out.is_null() {
            return Err(null("output"));
        }
        let (a, c) = min_cost_over_alpha(theta, tol)?;
        alpha_out.write(a);
        cost_out.write(c);
        Ok(())
    })
}

/// Threshold angle in radians; `tol` is in units of pi.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ebg_threshold_theta(tol: f64, out: *mut f64) -> EbgStatus {
    guard(|| write(out, threshold_theta(tol)?, "out"))
}

/// `input` is `-1` for a fresh random state per trial, or a basis index
/// `0..=3` for `|AB>`.
///
/// # Safety
/// `params` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ebg_monte_carlo(
    params: *const EbgParams,
    trials: u64,
    seed: u64,
    deterministic: bool,
    input: i32,
    out: *mut EbgSummary,
) -> EbgStatus {
    guard(|| {
        let p = deref(params, "params")?.0;
        let spec = match input {
            -1 => InputSpec::Random,
            0..=3 => InputSpec::Basis(input as u8),
            other => {
                return Err(Fail(EbgStatus::InvalidArgument, format!("input must be -1 or 0..=3, got {other}")));
            }
        };
        let s = monte_carlo(p, trials, seed, run_mode(deterministic), spec)?;
        write(
            out,
            EbgSummary {
                trials: s.trials,
                seed: s.seed,
                success_count: s.success_count,
                branch_counts: s.branch_counts,
                empirical_p: s.empirical_p,
                analytic_p: s.analytic_p,
                sigma: s.sigma,
                z_score: s.z_score,
                mean_fidelity: s.mean_fidelity.unwrap_or(f64::NAN),
                mean_ebits: s.mean_ebits.unwrap_or(f64::NAN),
                mean_bell_pairs: s.mean_bell_pairs,
            },
            "out",
        )
    })
}

fn run_mode(deterministic: bool) -> RunMode {
    if deterministic {
        RunMode::Deterministic
    } else {
        RunMode::Probabilistic
    }
}

/// Protocol with weights `(x, y)`; fails with `InvalidPovm` when the
/// failure element would not be positive.
///
/// # Safety
/// `params` must be a live handle and `out` valid for writes. The handle is
/// released with [`ebg_protocol_free`].
#[no_mangle]
pub unsafe extern "C" fn ebg_protocol_new(params: *const EbgParams, x: f64, y: f64, out: *mut *mut EbgProtocol) -> EbgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = deref(params, "params")?.0;
        let proto = Protocol::new(p, PovmWeights::new(x, y)?)?;
        out.write(Box::into_raw(Box::new(EbgProtocol(proto))));
        Ok(())
    })
}

/// Protocol at the optimal weights.
///
/// # Safety
/// As for [`ebg_protocol_new`].
#[no_mangle]
pub unsafe extern "C" fn ebg_protocol_optimal(params: *const EbgParams, out: *mut *mut EbgProtocol) -> EbgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let proto = Protocol::optimal(deref(params, "params")?.0)?;
        out.write(Box::into_raw(Box::new(EbgProtocol(proto))));
        Ok(())
    })
}

/// # Safety
/// `protocol` must come from [`ebg_protocol_new`] or
/// [`ebg_protocol_optimal`] and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ebg_protocol_free(protocol: *mut EbgProtocol) {
    if !protocol.is_null() {
        drop(Box::from_raw(protocol));
    }
}

/// One run. `input` holds 8 doubles (`re, im` per amplitude of `|AB>`,
/// normalized internally) or is NULL for a random state drawn from the run's
/// random stream. Runs are reproducible from `(seed, trial)`.
///
/// # Safety
/// `protocol` must be a live handle, `input` NULL or readable for 8
/// doubles, and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ebg_protocol_run(
    protocol: *const EbgProtocol,
    input: *const f64,
    seed: u64,
    trial: u64,
    deterministic: bool,
    out: *mut EbgRunResult,
) -> EbgStatus {
    guard(|| {
        let proto = &deref(protocol, "protocol")?.0;
        let mut rng = TrialRng::new(seed, trial);
        let labels = vec![Qubit::AliceTarget, Qubit::BobTarget];
        let phi = if input.is_null() {
            random_input(&mut rng)
        } else {
            let raw = std::slice::from_raw_parts(input, 8);
            let amps = raw.chunks(2).map(|c| Complex::new(c[0], c[1])).collect();
            StateVector::new(labels.clone(), amps)?.normalized()?
        };
        let run = proto.run_once(&phi, run_mode(deterministic), &mut rng)?;
        let want = phi.apply(&target_gate(proto.params().theta()), &labels)?;
        let mut final_state = [0.0; 8];
        for (k, a) in run.final_state.amplitudes().iter().enumerate() {
            final_state[2 * k] = a.re;
            final_state[2 * k + 1] = a.im;
        }
        let residual = run.residual;
        write(
            out,
            EbgRunResult {
                branch: run.branch,
                has_residual: u8::from(residual.is_some()),
                b_outcome: residual.map_or(0, |r| r.b_outcome),
                theta_f: residual.map_or(0.0, |r| r.theta_f),
                bell_pairs_consumed: run.bell_pairs_consumed,
                fidelity: fidelity(&want, &run.final_state)?,
                final_state,
            },
            "out",
        )
    })
}
