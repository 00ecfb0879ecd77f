//! C ABI over `qan-core`.
//!
//! Every fallible function returns a [`QanStatus`]; on failure
//! [`qan_last_error`] describes the problem. Strings returned through out
//! pointers are owned by the caller and released with [`qan_string_free`].
//! Scenario handles come from [`qan_scenario_from_json`] or
//! [`qan_scenario_load`] and are released with [`qan_scenario_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qan_core::scenario::{self, Scenario};
use qan_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QanStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    Evaluation = 4,
    Io = 5,
    Panic = 6,
}

/// Opaque scenario handle.
pub struct QanScenario {
    inner: Scenario,
}

/// Headline numbers of a single-point evaluation.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QanPlanSummary {
    pub link_loss_db: f64,
    pub raman_per_gate: f64,
    pub q_mu: f64,
    pub e_mu: f64,
    pub r_bps: f64,
    pub feasible: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> QanStatus {
    match e {
        Error::Config { .. } | Error::Json(_) | Error::SplitterRatio(_) | Error::Unknown { .. } => {
            QanStatus::InvalidConfig
        }
        Error::Io(_) => QanStatus::Io,
        _ => QanStatus::Evaluation,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (QanStatus, String)>) -> QanStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QanStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            QanStatus::Panic
        }
    }
}

fn fail(e: Error) -> (QanStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (QanStatus, String) {
    (QanStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (QanStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (QanStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn scenario_arg<'a>(s: *const QanScenario) -> Result<&'a Scenario, (QanStatus, String)> {
    s.as_ref().map(|h| &h.inner).ok_or_else(|| null("scenario"))
}

unsafe fn put_string(out: *mut *mut c_char, text: String) -> Result<(), (QanStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    let c = CString::new(text)
        .map_err(|_| (QanStatus::Evaluation, "output contains nul".to_string()))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn put_scenario(out: *mut *mut QanScenario, s: Scenario) {
    *out = Box::into_raw(Box::new(QanScenario { inner: s }));
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qan_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn qan_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses and validates a scenario.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn qan_scenario_from_json(
    json: *const c_char,
    out: *mut *mut QanScenario,
) -> QanStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        if out.is_null() {
            return Err(null("out"));
        }
        put_scenario(out, Scenario::from_json(text).map_err(fail)?);
        Ok(())
    })
}

/// Reads, parses and validates a scenario file.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn qan_scenario_load(
    path: *const c_char,
    out: *mut *mut QanScenario,
) -> QanStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        put_scenario(out, Scenario::load(path.as_ref()).map_err(fail)?);
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qan_scenario_free(s: *mut QanScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Sets the number at JSON pointer `path` (for example
/// `/scheme/feeder_km`) and revalidates. The handle is unchanged on error.
///
/// # Safety
/// `s` must be a live handle and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qan_scenario_set_number(
    s: *mut QanScenario,
    path: *const c_char,
    value: f64,
) -> QanStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let h = s.as_mut().ok_or_else(|| null("scenario"))?;
        let v = if value.fract() == 0.0 && value.abs() < 9e15 {
            serde_json::Value::from(value as i64)
        } else {
            serde_json::Number::from_f64(value)
                .map(serde_json::Value::Number)
                .ok_or_else(|| {
                    (
                        QanStatus::InvalidConfig,
                        format!("{value} is not a JSON number"),
                    )
                })?
        };
        h.inner = h.inner.with_value(path, v).map_err(fail)?;
        Ok(())
    })
}

/// Evaluates the scenario's configuration.
///
/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qan_plan(s: *const QanScenario, out: *mut QanPlanSummary) -> QanStatus {
    guard(|| {
        let sc = scenario_arg(s)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = scenario::plan(sc).map_err(fail)?.result;
        *out = QanPlanSummary {
            link_loss_db: r.link_loss_db,
            raman_per_gate: r.raman.per_gate_probability,
            q_mu: r.observables.q_mu,
            e_mu: r.observables.e_mu,
            r_bps: r.key.r_bps,
            feasible: r.key.feasible,
        };
        Ok(())
    })
}

/// Quantum link loss in dB.
///
/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qan_link_loss_db(s: *const QanScenario, out: *mut f64) -> QanStatus {
    let mut summary = QanPlanSummary::default();
    let st = qan_plan(s, &mut summary);
    if st == QanStatus::Ok {
        match out.as_mut() {
            Some(o) => *o = summary.link_loss_db,
            None => {
                set_error("out is null".into());
                return QanStatus::NullPointer;
            }
        }
    }
    st
}

/// Secure key rate per user in bit/s; 0 when infeasible.
///
/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qan_key_rate_bps(s: *const QanScenario, out: *mut f64) -> QanStatus {
    let mut summary = QanPlanSummary::default();
    let st = qan_plan(s, &mut summary);
    if st == QanStatus::Ok {
        match out.as_mut() {
            Some(o) => *o = summary.r_bps,
            None => {
                set_error("out is null".into());
                return QanStatus::NullPointer;
            }
        }
    }
    st
}

/// Full plan report as JSON.
///
/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qan_plan_json(s: *const QanScenario, out: *mut *mut c_char) -> QanStatus {
    guard(|| {
        let sc = scenario_arg(s)?;
        let r = scenario::plan(sc).map_err(fail)?;
        let text = serde_json::to_string_pretty(&r).map_err(|e| fail(e.into()))?;
        put_string(out, text)
    })
}

/// Sweep over the scenario's axes as versioned CSV.
///
/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qan_sweep_csv(s: *const QanScenario, out: *mut *mut c_char) -> QanStatus {
    guard(|| {
        let sc = scenario_arg(s)?;
        let csv = scenario::sweep(sc).and_then(|o| o.to_csv()).map_err(fail)?;
        put_string(out, csv)
    })
}

/// Releases a string returned by this library; null is ignored.
///
/// # Safety
/// `p` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qan_string_free(p: *mut c_char) {
    if !p.is_null() {
        drop(CString::from_raw(p));
    }
}
