//! C ABI for the srdkit toolkit.
//!
//! Opaque handles wrap parsed models, solved schedules and synthesized
//! designs; every function returns an `SrdStatus` code and stores a
//! human-readable message retrievable with `srd_last_error_message`. JSON
//! accessors hand back documents in the same `srdkit/1` schema the CLI
//! emits, so bindings can stay thin.
//!
//! All functions are panic-safe: a caught panic reports
//! `SRD_STATUS_INTERNAL` instead of unwinding across the boundary. Pointer
//! arguments are null-checked; beyond that, callers must pass pointers
//! obtained from this API (or valid NUL-terminated strings), which is the
//! safety contract of every `unsafe` function here.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use srdkit::cli::{compute_schedule, simulate_design, synth_from_schedule, DesignDoc, ScheduleDoc};
use srdkit::maxdet::{solve, SolverConfig, SolverStatus};
use srdkit::model::Horizon;
use srdkit::modelfile::{parse_model_file, ModelFile};
use srdkit::problems::build_stationary;
use srdkit::Error;

/// Status codes mirroring the CLI exit codes.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
#[allow(non_camel_case_types)]
pub enum SrdStatus {
    SRD_STATUS_OK = 0,
    SRD_STATUS_INVALID_ARGUMENT = 1,
    SRD_STATUS_PARSE_ERROR = 2,
    SRD_STATUS_INFEASIBLE = 3,
    SRD_STATUS_SOLVER_FAILURE = 4,
    SRD_STATUS_INTERNAL = 5,
}

/// Solver parameters; obtain defaults from `srd_solver_config_default`.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct SrdSolverConfig {
    /// Central-path neighborhood size, in (0, 1).
    pub gamma: f64,
    /// Barrier reduction rate, in (0, 1).
    pub sigma: f64,
    /// Relative duality-gap tolerance.
    pub eps: f64,
    pub max_iters: u64,
    /// Relative eigenvalue tolerance for sensor rank decisions.
    pub rank_tol: f64,
}

impl SrdSolverConfig {
    fn to_config(self) -> SolverConfig {
        SolverConfig {
            gamma: self.gamma,
            sigma: self.sigma,
            eps: self.eps,
            max_iters: self.max_iters as usize,
            rank_tol: self.rank_tol,
        }
    }
}

/// Opaque parsed model file.
pub struct SrdModel {
    inner: ModelFile,
}

/// Opaque solved schedule (with embedded design).
pub struct SrdSchedule {
    inner: ScheduleDoc,
}

/// Opaque synthesized design.
pub struct SrdDesign {
    inner: DesignDoc,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> SrdStatus {
    match err {
        Error::Parse(_)
        | Error::Dimension(_)
        | Error::InvalidModel(_)
        | Error::Inconsistent(_)
        | Error::NotPositiveDefinite(_)
        | Error::Io(_) => SrdStatus::SRD_STATUS_PARSE_ERROR,
        Error::Infeasible(_) => SrdStatus::SRD_STATUS_INFEASIBLE,
        Error::Numerical(_) | Error::GapClosed => SrdStatus::SRD_STATUS_SOLVER_FAILURE,
    }
}

fn guarded(body: impl FnOnce() -> SrdStatus) -> SrdStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            SrdStatus::SRD_STATUS_INTERNAL
        }
    }
}

unsafe fn read_cstr<'a>(ptr: *const c_char) -> Option<&'a str> {
    if ptr.is_null() {
        return None;
    }
    CStr::from_ptr(ptr).to_str().ok()
}

fn hand_out_string(s: String, out: *mut *mut c_char) -> SrdStatus {
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            SrdStatus::SRD_STATUS_OK
        }
        Err(_) => {
            set_error("output contained interior NUL");
            SrdStatus::SRD_STATUS_INTERNAL
        }
    }
}

/// Default solver configuration.
#[no_mangle]
pub extern "C" fn srd_solver_config_default() -> SrdSolverConfig {
    let d = SolverConfig::default();
    SrdSolverConfig {
        gamma: d.gamma,
        sigma: d.sigma,
        eps: d.eps,
        max_iters: d.max_iters as u64,
        rank_tol: d.rank_tol,
    }
}

/// Copies the last error message into `buf` (NUL-terminated, truncated to
/// `cap`); returns the full message length in bytes excluding the NUL.
#[no_mangle]
pub unsafe extern "C" fn srd_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Parses a model-file JSON document into an opaque handle.
#[no_mangle]
pub unsafe extern "C" fn srd_model_parse_json(
    json: *const c_char,
    out: *mut *mut SrdModel,
) -> SrdStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out pointer is null");
            return SrdStatus::SRD_STATUS_INVALID_ARGUMENT;
        }
        let Some(text) = (unsafe { read_cstr(json) }) else {
            set_error("json pointer is null or not valid UTF-8");
            return SrdStatus::SRD_STATUS_INVALID_ARGUMENT;
        };
        match parse_model_file(text) {
            Ok(mf) => {
                unsafe { *out = Box::into_raw(Box::new(SrdModel { inner: mf })) };
                SrdStatus::SRD_STATUS_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn srd_model_free(model: *mut SrdModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// State dimension of a parsed model.
#[no_mangle]
pub unsafe extern "C" fn srd_model_state_dim(model: *const SrdModel) -> i64 {
    if model.is_null() {
        return -1;
    }
    unsafe { &*model }.inner.model.n() as i64
}

/// Horizon length, or -1 for stationary models.
#[no_mangle]
pub unsafe extern "C" fn srd_model_horizon(model: *const SrdModel) -> i64 {
    if model.is_null() {
        return -1;
    }
    match unsafe { &*model }.inner.model.horizon {
        Horizon::Finite(t) => t as i64,
        Horizon::Stationary => -1,
    }
}

/// Solves the stationary SRD problem of a stationary model at distortion
/// bound `d`, writing the rate in nats.
#[no_mangle]
pub unsafe extern "C" fn srd_stationary_rate(
    model: *const SrdModel,
    d: f64,
    config: *const SrdSolverConfig,
    out_rate_nats: *mut f64,
) -> SrdStatus {
    guarded(|| {
        if model.is_null() || out_rate_nats.is_null() {
            set_error("null pointer argument");
            return SrdStatus::SRD_STATUS_INVALID_ARGUMENT;
        }
        let mf = &unsafe { &*model }.inner;
        if mf.model.horizon != Horizon::Stationary {
            set_error("stationary rate requires a stationary model");
            return SrdStatus::SRD_STATUS_INVALID_ARGUMENT;
        }
        let cfg = if config.is_null() {
            SolverConfig::default()
        } else {
            unsafe { *config }.to_config()
        };
        let run = || -> Result<f64, Error> {
            let srd = build_stationary(&mf.model.a[0], &mf.model.w[0], &mf.spec.theta[0], d)?;
            let sol = solve(&srd.problem, &cfg)?;
            if sol.status != SolverStatus::Optimal {
                return Err(Error::Numerical(format!("solver status {}", sol.status)));
            }
            Ok(srd.decode(&sol)?.objective_nats)
        };
        match run() {
            Ok(rate) => {
                unsafe { *out_rate_nats = rate };
                SrdStatus::SRD_STATUS_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Solves the finite-horizon problem of a model, producing a schedule handle.
#[no_mangle]
pub unsafe extern "C" fn srd_schedule_compute(
    model: *const SrdModel,
    config: *const SrdSolverConfig,
    out: *mut *mut SrdSchedule,
) -> SrdStatus {
    guarded(|| {
        if model.is_null() || out.is_null() {
            set_error("null pointer argument");
            return SrdStatus::SRD_STATUS_INVALID_ARGUMENT;
        }
        let mf = &unsafe { &*model }.inner;
        let cfg = if config.is_null() {
            SolverConfig::default()
        } else {
            unsafe { *config }.to_config()
        };
        match compute_schedule(mf, &cfg) {
            Ok(doc) => {
                unsafe { *out = Box::into_raw(Box::new(SrdSchedule { inner: doc })) };
                SrdStatus::SRD_STATUS_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn srd_schedule_free(schedule: *mut SrdSchedule) {
    if !schedule.is_null() {
        drop(unsafe { Box::from_raw(schedule) });
    }
}

/// Total directed-information rate of a schedule in nats (NaN on null).
#[no_mangle]
pub unsafe extern "C" fn srd_schedule_total_rate_nats(schedule: *const SrdSchedule) -> f64 {
    if schedule.is_null() {
        return f64::NAN;
    }
    unsafe { &*schedule }.inner.rate_total_nats
}

#[no_mangle]
pub unsafe extern "C" fn srd_schedule_horizon(schedule: *const SrdSchedule) -> i64 {
    if schedule.is_null() {
        return -1;
    }
    unsafe { &*schedule }.inner.horizon as i64
}

/// Serializes a schedule (with embedded design) to JSON; free the string
/// with `srd_string_free`.
#[no_mangle]
pub unsafe extern "C" fn srd_schedule_to_json(
    schedule: *const SrdSchedule,
    out: *mut *mut c_char,
) -> SrdStatus {
    guarded(|| {
        if schedule.is_null() || out.is_null() {
            set_error("null pointer argument");
            return SrdStatus::SRD_STATUS_INVALID_ARGUMENT;
        }
        match serde_json::to_string_pretty(&unsafe { &*schedule }.inner) {
            Ok(s) => hand_out_string(s, out),
            Err(e) => {
                set_error(&e.to_string());
                SrdStatus::SRD_STATUS_INTERNAL
            }
        }
    })
}

/// Re-synthesizes the sensor design from a schedule.
#[no_mangle]
pub unsafe extern "C" fn srd_design_synthesize(
    model: *const SrdModel,
    schedule: *const SrdSchedule,
    config: *const SrdSolverConfig,
    out: *mut *mut SrdDesign,
) -> SrdStatus {
    guarded(|| {
        if model.is_null() || schedule.is_null() || out.is_null() {
            set_error("null pointer argument");
            return SrdStatus::SRD_STATUS_INVALID_ARGUMENT;
        }
        let mf = &unsafe { &*model }.inner;
        let doc = &unsafe { &*schedule }.inner;
        let cfg = if config.is_null() {
            SolverConfig::default()
        } else {
            unsafe { *config }.to_config()
        };
        match synth_from_schedule(mf, doc, &cfg) {
            Ok(design) => {
                unsafe { *out = Box::into_raw(Box::new(SrdDesign { inner: design })) };
                SrdStatus::SRD_STATUS_OK
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn srd_design_free(design: *mut SrdDesign) {
    if !design.is_null() {
        drop(unsafe { Box::from_raw(design) });
    }
}

/// Sensor output dimension at step `t` (0-based), or -1 out of range.
#[no_mangle]
pub unsafe extern "C" fn srd_design_rank(design: *const SrdDesign, t: u64) -> i64 {
    if design.is_null() {
        return -1;
    }
    let doc = &unsafe { &*design }.inner;
    doc.body
        .ranks
        .get(t as usize)
        .map(|&r| r as i64)
        .unwrap_or(-1)
}

#[no_mangle]
pub unsafe extern "C" fn srd_design_to_json(
    design: *const SrdDesign,
    out: *mut *mut c_char,
) -> SrdStatus {
    guarded(|| {
        if design.is_null() || out.is_null() {
            set_error("null pointer argument");
            return SrdStatus::SRD_STATUS_INVALID_ARGUMENT;
        }
        match serde_json::to_string_pretty(&unsafe { &*design }.inner) {
            Ok(s) => hand_out_string(s, out),
            Err(e) => {
                set_error(&e.to_string());
                SrdStatus::SRD_STATUS_INTERNAL
            }
        }
    })
}

/// Monte Carlo validation of a design; returns the simulation report JSON.
#[no_mangle]
pub unsafe extern "C" fn srd_simulate_json(
    model: *const SrdModel,
    design: *const SrdDesign,
    paths: u64,
    seed: u64,
    out: *mut *mut c_char,
) -> SrdStatus {
    guarded(|| {
        if model.is_null() || design.is_null() || out.is_null() {
            set_error("null pointer argument");
            return SrdStatus::SRD_STATUS_INVALID_ARGUMENT;
        }
        let mf = &unsafe { &*model }.inner;
        let body = &unsafe { &*design }.inner.body;
        match simulate_design(mf, body, paths, seed) {
            Ok(report) => match serde_json::to_string_pretty(&report) {
                Ok(s) => hand_out_string(s, out),
                Err(e) => {
                    set_error(&e.to_string());
                    SrdStatus::SRD_STATUS_INTERNAL
                }
            },
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Frees a string handed out by any `*_to_json` function.
#[no_mangle]
pub unsafe extern "C" fn srd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}
