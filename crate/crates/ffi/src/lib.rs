//! C ABI over the adaftrl learners and experiment runner.
//!
//! Conventions:
//!
//! - Every fallible function returns an [`AdaftrlStatus`]; on failure the
//!   message is available from [`adaftrl_last_error`] on the same thread.
//! - Handles are opaque and owned by the caller; release them with the
//!   matching `_free` function. Strings returned through `char **` must be
//!   released with [`adaftrl_string_free`].
//! - Configuration crosses the boundary as UTF-8 JSON using the same schema as
//!   the CLI config files.
//! - Panics never unwind into the caller; they surface as `ADAFTRL_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use adaftrl::experiment::{run, ExperimentConfig, RunOptions};
use adaftrl::learners::{LearnerConfig, OnlineLearner};
use adaftrl::losses::{Feedback, Loss};
use adaftrl::{Error, FeasibleSet, Point};

/// Result codes of the C API.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdaftrlStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8 or JSON.
    InvalidJson = 2,
    /// The configuration or a parameter was rejected.
    InvalidConfig = 3,
    /// A vector had the wrong length.
    DimensionMismatch = 4,
    /// Non-finite input or an undefined numeric operation.
    Numeric = 5,
    /// An argmin could not be computed or certified.
    Solver = 6,
    /// The combination of options is not supported.
    Unsupported = 7,
    /// A run finished but a certificate failed.
    CertificateFailed = 8,
    /// A run finished but a bound did not hold.
    BoundViolated = 9,
    Io = 10,
    /// A Rust panic was caught at the boundary.
    Panic = 11,
    Other = 12,
}

impl From<&Error> for AdaftrlStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::DimensionMismatch { .. } => AdaftrlStatus::DimensionMismatch,
            Error::NonFinite { .. } | Error::UndefinedArithmetic(_) | Error::InfiniteDerivative(_) => {
                AdaftrlStatus::Numeric
            }
            Error::SingularMetric(_)
            | Error::NotPsd(_)
            | Error::OutOfDomain(_)
            | Error::NonConvergent(_)
            | Error::IllPosed(_)
            | Error::SolverFailure { .. }
            | Error::Eigen(_) => AdaftrlStatus::Solver,
            Error::InvalidParameter(_) | Error::InvalidConfig(_) | Error::ScheduleCondition(_) => {
                AdaftrlStatus::InvalidConfig
            }
            Error::Unsupported(_) => AdaftrlStatus::Unsupported,
            Error::CertificateFailed(_) | Error::MissingCertificate(_) | Error::ProximalViolation { .. } => {
                AdaftrlStatus::CertificateFailed
            }
            Error::BoundViolated(_) => AdaftrlStatus::BoundViolated,
            Error::Io(_) => AdaftrlStatus::Io,
            Error::ReplayMismatch(_) => AdaftrlStatus::Other,
        }
    }
}

/// A configured online learner.
pub struct AdaftrlLearner {
    inner: OnlineLearner,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(AdaftrlStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(AdaftrlStatus::from(&e), format!("{}: {e}", e.kind()))
    }
}

fn null(what: &str) -> Failure {
    Failure(AdaftrlStatus::NullPointer, format!("{what} is null"))
}

/// Run `f`, translating errors and panics into a status and the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AdaftrlStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AdaftrlStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            AdaftrlStatus::Panic
        }
    }
}

unsafe fn json_arg<T: serde::de::DeserializeOwned>(p: *const c_char, what: &str) -> Result<T, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(AdaftrlStatus::InvalidJson, format!("{what}: {e}")))?;
    serde_json::from_str(s).map_err(|e| Failure(AdaftrlStatus::InvalidJson, format!("{what}: {e}")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn learner_mut<'a>(h: *mut AdaftrlLearner) -> Result<&'a mut AdaftrlLearner, Failure> {
    h.as_mut().ok_or_else(|| null("learner"))
}

fn string_out(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|e| Failure(AdaftrlStatus::Other, e.to_string()))?;
    unsafe { *out = c.into_raw() };
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next API call on the same thread.
#[no_mangle]
pub extern "C" fn adaftrl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static name of a status code, e.g. `"invalid_config"`.
#[no_mangle]
pub extern "C" fn adaftrl_status_name(status: AdaftrlStatus) -> *const c_char {
    let s: &'static CStr = match status {
        AdaftrlStatus::Ok => c"ok",
        AdaftrlStatus::NullPointer => c"null_pointer",
        AdaftrlStatus::InvalidJson => c"invalid_json",
        AdaftrlStatus::InvalidConfig => c"invalid_config",
        AdaftrlStatus::DimensionMismatch => c"dimension_mismatch",
        AdaftrlStatus::Numeric => c"numeric",
        AdaftrlStatus::Solver => c"solver",
        AdaftrlStatus::Unsupported => c"unsupported",
        AdaftrlStatus::CertificateFailed => c"certificate_failed",
        AdaftrlStatus::BoundViolated => c"bound_violated",
        AdaftrlStatus::Io => c"io",
        AdaftrlStatus::Panic => c"panic",
        AdaftrlStatus::Other => c"other",
    };
    s.as_ptr()
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn adaftrl_version() -> *const c_char {
    const V: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    V.as_ptr().cast()
}

/// Create a learner from a learner config and a feasible set (both JSON).
/// `horizon` is the number of rounds, or 0 when unknown.
///
/// # Safety
/// The strings must be nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adaftrl_learner_new(
    learner_json: *const c_char,
    set_json: *const c_char,
    horizon: u64,
    out: *mut *mut AdaftrlLearner,
) -> AdaftrlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg: LearnerConfig = json_arg(learner_json, "learner_json")?;
        let set: FeasibleSet = json_arg(set_json, "set_json")?;
        let horizon = (horizon > 0).then_some(horizon as usize);
        let inner = OnlineLearner::new(&cfg, &set, horizon)?.without_records();
        *out = Box::into_raw(Box::new(AdaftrlLearner { inner }));
        Ok(())
    })
}

/// Release a learner. Null is ignored.
///
/// # Safety
/// `learner` must come from [`adaftrl_learner_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn adaftrl_learner_free(learner: *mut AdaftrlLearner) {
    if !learner.is_null() {
        drop(Box::from_raw(learner));
    }
}

/// Dimension of the learner's points (0 for a null handle).
///
/// # Safety
/// `learner` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn adaftrl_learner_dim(learner: *const AdaftrlLearner) -> usize {
    learner.as_ref().map_or(0, |l| l.inner.x().dim())
}

/// Rounds completed so far (0 for a null handle).
///
/// # Safety
/// `learner` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn adaftrl_learner_round(learner: *const AdaftrlLearner) -> u64 {
    learner.as_ref().map_or(0, |l| l.inner.round() as u64)
}

/// Copy the current play `x_t` into `out[0..len]`; `len` must equal the dimension.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn adaftrl_learner_x(learner: *const AdaftrlLearner, out: *mut f64, len: usize) -> AdaftrlStatus {
    guard(|| {
        let l = learner.as_ref().ok_or_else(|| null("learner"))?;
        let x = l.inner.x();
        if len != x.dim() {
            return Err(Error::DimensionMismatch { expected: x.dim(), got: len }.into());
        }
        if len > 0 {
            if out.is_null() {
                return Err(null("out"));
            }
            std::slice::from_raw_parts_mut(out, len).copy_from_slice(x.as_slice());
        }
        Ok(())
    })
}

/// Feed the (sub)gradient `g_t` observed at the current play and advance one round.
///
/// # Safety
/// `g` must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn adaftrl_learner_step(learner: *mut AdaftrlLearner, g: *const f64, len: usize) -> AdaftrlStatus {
    guard(|| {
        let l = learner_mut(learner)?;
        let g = Point::from_slice(slice_arg(g, len, "g")?)?;
        g.check_dim(l.inner.x().dim())?;
        l.inner.observe_gradient(&g)?;
        Ok(())
    })
}

/// Feed a whole loss (JSON, same schema as config losses) and advance one
/// round; the gradient is taken at the current play. Required by the implicit presets.
///
/// # Safety
/// `loss_json` must be nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn adaftrl_learner_step_loss(learner: *mut AdaftrlLearner, loss_json: *const c_char) -> AdaftrlStatus {
    guard(|| {
        let l = learner_mut(learner)?;
        let loss: Loss = json_arg(loss_json, "loss_json")?;
        loss.validate()?;
        if loss.dim() != l.inner.x().dim() {
            return Err(Error::DimensionMismatch { expected: l.inner.x().dim(), got: loss.dim() }.into());
        }
        let grad = loss.gradient(l.inner.x());
        l.inner.observe(&Feedback { loss, g: grad.clone(), grad })?;
        Ok(())
    })
}

/// Run every seed of an experiment config (JSON) and return the aggregated
/// report as JSON in `*report_json`. `jobs` is the worker count (0 = all cores).
/// The report is returned even when a bound or certificate fails; the status
/// then says which.
///
/// # Safety
/// `config_json` must be nul-terminated; `report_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adaftrl_run_config(
    config_json: *const c_char,
    jobs: usize,
    report_json: *mut *mut c_char,
) -> AdaftrlStatus {
    guard(|| {
        if report_json.is_null() {
            return Err(null("report_json"));
        }
        *report_json = ptr::null_mut();
        let cfg: ExperimentConfig = json_arg(config_json, "config_json")?;
        let opts = RunOptions { jobs: (jobs > 0).then_some(jobs), tol: None };
        let outcome = run(&cfg, &opts)?;
        let text = serde_json::to_string(&outcome.report).map_err(|e| Failure(AdaftrlStatus::Other, e.to_string()))?;
        string_out(report_json, text)?;
        outcome.report.check()?;
        Ok(())
    })
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn adaftrl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
