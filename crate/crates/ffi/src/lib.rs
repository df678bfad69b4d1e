//! C interface.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `qo_*` constructor and released by the matching `qo_*_free`. Functions
//! return a [`QoStatus`]; on failure `qo_last_error` describes the cause for
//! the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use quadobs::harness::{self, vehicle_scenario};
use quadobs::{Condition, Error, IntegrationGrid, PeReport, Scenario, SimulationTrace};

/// Result of every fallible call. Values 2 to 4 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QoStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Numerical = 3,
    Io = 4,
    InvalidUtf8 = 5,
    OutOfRange = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QoCondition {
    GramianDef3 = 0,
    Prop2 = 1,
    Prop3 = 2,
    Prop4 = 3,
    Prop5 = 4,
    RankThm2 = 5,
}

impl From<Condition> for QoCondition {
    fn from(c: Condition) -> Self {
        match c {
            Condition::GramianDef3 => QoCondition::GramianDef3,
            Condition::Prop2 => QoCondition::Prop2,
            Condition::Prop3 => QoCondition::Prop3,
            Condition::Prop4 => QoCondition::Prop4,
            Condition::Prop5 => QoCondition::Prop5,
            Condition::RankThm2 => QoCondition::RankThm2,
        }
    }
}

/// One PE report row. `margin` is NaN for skipped rows.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct QoPeEntry {
    pub condition: QoCondition,
    pub window_start: f64,
    pub delta: f64,
    pub margin: f64,
    pub threshold: f64,
    pub pass: bool,
    pub skipped: bool,
}

/// Scalar columns of one trace row.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct QoTraceRow {
    pub t: f64,
    pub y: f64,
    pub yhat: f64,
    pub err_x: f64,
    pub err_z: f64,
    pub riccati_min_eig: f64,
}

/// Opaque scenario handle.
pub struct QoScenario(Scenario);

/// Opaque simulation trace handle.
pub struct QoTrace(SimulationTrace);

/// Opaque list of PE reports.
pub struct QoPeReports(Vec<PeReport>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> QoStatus {
    match err.exit_code() {
        3 => QoStatus::Numerical,
        4 => QoStatus::Io,
        _ => QoStatus::Config,
    }
}

struct Fail(QoStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard<F>(f: F) -> QoStatus
where
    F: FnOnce() -> Result<(), Fail>,
{
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QoStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            QoStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail(QoStatus::NullPointer, format!("{what} is null")))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut()
        .ok_or_else(|| Fail(QoStatus::NullPointer, format!("{what} is null")))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(QoStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(QoStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    let slot = borrow_mut(out, "output pointer")?;
    *slot = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message describing the last failure on this thread, or NULL. The pointer
/// stays valid until the next `qo_*` call on the same thread.
#[no_mangle]
pub extern "C" fn qo_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qo_scenario_load(
    path: *const c_char,
    out: *mut *mut QoScenario,
) -> QoStatus {
    guard(|| {
        let sc = Scenario::load(text(path, "path")?)?;
        put(out, QoScenario(sc))
    })
}

/// Parses a scenario from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qo_scenario_from_toml(
    toml: *const c_char,
    out: *mut *mut QoScenario,
) -> QoStatus {
    guard(|| {
        let sc = Scenario::from_toml_str(text(toml, "toml")?)?;
        put(out, QoScenario(sc))
    })
}

/// The built-in vehicle scenario in `n` dimensions.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qo_scenario_vehicle(n: usize, out: *mut *mut QoScenario) -> QoStatus {
    guard(|| {
        if n == 0 {
            return Err(Fail(
                QoStatus::Config,
                "vehicle dimension must be at least 1".into(),
            ));
        }
        put(out, QoScenario(vehicle_scenario(n)))
    })
}

/// # Safety
/// `sc` must come from a `qo_scenario_*` constructor or be NULL.
#[no_mangle]
pub unsafe extern "C" fn qo_scenario_free(sc: *mut QoScenario) {
    release(sc);
}

/// Plant dimension `n`, input count `p` and nilpotency index `m`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn qo_scenario_dims(
    sc: *const QoScenario,
    n: *mut usize,
    p: *mut usize,
    m: *mut usize,
) -> QoStatus {
    guard(|| {
        let sc = &borrow(sc, "scenario")?.0;
        let aug = sc.augment()?;
        *borrow_mut(n, "n")? = aug.n();
        *borrow_mut(p, "p")? = aug.p();
        *borrow_mut(m, "m")? = aug.m();
        Ok(())
    })
}

/// Replaces the time grid with `[t_start, horizon]` at `step`.
///
/// # Safety
/// `sc` must be a valid scenario handle.
#[no_mangle]
pub unsafe extern "C" fn qo_scenario_set_grid(
    sc: *mut QoScenario,
    step: f64,
    horizon: f64,
) -> QoStatus {
    guard(|| {
        let sc = &mut borrow_mut(sc, "scenario")?.0;
        sc.grid = IntegrationGrid::new(sc.grid.t_start(), horizon, step)?;
        Ok(())
    })
}

/// Sets the Riccati forgetting factor.
///
/// # Safety
/// `sc` must be a valid scenario handle.
#[no_mangle]
pub unsafe extern "C" fn qo_scenario_set_theta(sc: *mut QoScenario, theta: f64) -> QoStatus {
    guard(|| {
        borrow_mut(sc, "scenario")?.0.observer.theta = theta;
        Ok(())
    })
}

/// Runs the plant/observer co-simulation.
///
/// # Safety
/// `sc` must be a valid scenario handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qo_simulate(sc: *const QoScenario, out: *mut *mut QoTrace) -> QoStatus {
    guard(|| {
        let trace = harness::simulate(&borrow(sc, "scenario")?.0)?;
        put(out, QoTrace(trace))
    })
}

/// # Safety
/// `trace` must come from `qo_simulate` or be NULL.
#[no_mangle]
pub unsafe extern "C" fn qo_trace_free(trace: *mut QoTrace) {
    release(trace);
}

/// Number of rows; 0 for NULL.
///
/// # Safety
/// `trace` must be a valid trace handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn qo_trace_len(trace: *const QoTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.rows.len())
}

/// Scalar columns of row `k`.
///
/// # Safety
/// `trace` must be a valid trace handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qo_trace_row(
    trace: *const QoTrace,
    k: usize,
    out: *mut QoTraceRow,
) -> QoStatus {
    guard(|| {
        let rows = &borrow(trace, "trace")?.0.rows;
        let r = rows
            .get(k)
            .ok_or_else(|| Fail(QoStatus::OutOfRange, format!("row {k} of {}", rows.len())))?;
        *borrow_mut(out, "output row")? = QoTraceRow {
            t: r.t,
            y: r.y,
            yhat: r.yhat,
            err_x: r.err_x,
            err_z: r.err_z,
            riccati_min_eig: r.riccati_min_eig,
        };
        Ok(())
    })
}

/// Copies the true plant state and its estimate at row `k` into two buffers
/// of `len` entries each; `len` must equal the plant dimension.
///
/// # Safety
/// `x` and `xhat` must each point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qo_trace_states(
    trace: *const QoTrace,
    k: usize,
    x: *mut f64,
    xhat: *mut f64,
    len: usize,
) -> QoStatus {
    guard(|| {
        let tr = &borrow(trace, "trace")?.0;
        let r = tr.rows.get(k).ok_or_else(|| {
            Fail(
                QoStatus::OutOfRange,
                format!("row {k} of {}", tr.rows.len()),
            )
        })?;
        if len != tr.n {
            return Err(Fail(
                QoStatus::Config,
                format!("buffer length {len}, plant dimension {}", tr.n),
            ));
        }
        if x.is_null() || xhat.is_null() {
            return Err(Fail(QoStatus::NullPointer, "state buffer is null".into()));
        }
        ptr::copy_nonoverlapping(r.x.as_ptr(), x, len);
        ptr::copy_nonoverlapping(r.xhat.as_ptr(), xhat, len);
        Ok(())
    })
}

/// Writes the trace CSV.
///
/// # Safety
/// `trace` must be a valid trace handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qo_trace_write_csv(
    trace: *const QoTrace,
    path: *const c_char,
) -> QoStatus {
    guard(|| {
        harness::emit_trace_csv(&borrow(trace, "trace")?.0, text(path, "path")?)?;
        Ok(())
    })
}

/// Runs every PE check on the scenario windows.
///
/// # Safety
/// `sc` must be a valid scenario handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qo_run_pe_suite(
    sc: *const QoScenario,
    out: *mut *mut QoPeReports,
) -> QoStatus {
    guard(|| {
        let reports = harness::run_pe_suite(&borrow(sc, "scenario")?.0)?;
        put(out, QoPeReports(reports))
    })
}

/// # Safety
/// `reports` must come from `qo_run_pe_suite` or be NULL.
#[no_mangle]
pub unsafe extern "C" fn qo_pe_free(reports: *mut QoPeReports) {
    release(reports);
}

/// Number of report rows; 0 for NULL.
///
/// # Safety
/// `reports` must be a valid report handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn qo_pe_len(reports: *const QoPeReports) -> usize {
    reports.as_ref().map_or(0, |r| r.0.len())
}

/// # Safety
/// `reports` must be a valid report handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qo_pe_get(
    reports: *const QoPeReports,
    k: usize,
    out: *mut QoPeEntry,
) -> QoStatus {
    guard(|| {
        let list = &borrow(reports, "reports")?.0;
        let r = list.get(k).ok_or_else(|| {
            Fail(
                QoStatus::OutOfRange,
                format!("report {k} of {}", list.len()),
            )
        })?;
        *borrow_mut(out, "output entry")? = QoPeEntry {
            condition: r.condition.into(),
            window_start: r.window_start,
            delta: r.delta,
            margin: r.margin.unwrap_or(f64::NAN),
            threshold: r.threshold,
            pass: r.pass,
            skipped: r.is_skipped(),
        };
        Ok(())
    })
}

/// Writes the PE report CSV.
///
/// # Safety
/// `reports` must be a valid report handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qo_pe_write_csv(
    reports: *const QoPeReports,
    path: *const c_char,
) -> QoStatus {
    guard(|| {
        harness::emit_pe_csv(&borrow(reports, "reports")?.0, text(path, "path")?)?;
        Ok(())
    })
}
