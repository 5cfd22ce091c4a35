//! C ABI over the solver.
//!
//! Objects are opaque handles created by `vn_config_*`, `vn_ground_state_solve` and
//! `vn_pipeline_run`, and released by the matching `vn_*_free`. Every fallible call returns a [`VnStatus`]; on failure the message is
//! available from [`vn_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use varred_nls::config::RunConfig;
use varred_nls::ground_state::GroundState;
use varred_nls::reports::{ground_state_stage, run_pipeline, validate_stage, PipelineReport};
use varred_nls::Error;

/// Status codes. Values 2 to 4 coincide with the command-line exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VnStatus {
    Ok = 0,
    Failure = 1,
    Hypothesis = 2,
    NonConvergence = 3,
    Certificate = 4,
    InvalidArgument = 5,
    Config = 6,
    Io = 7,
    Panic = 8,
}

impl From<&Error> for VnStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Hypothesis(_) | Error::NonCoercive(_) => VnStatus::Hypothesis,
            Error::NonConvergence(_) => VnStatus::NonConvergence,
            Error::Certificate(_) => VnStatus::Certificate,
            Error::Config(_) => VnStatus::Config,
            Error::Io(_) => VnStatus::Io,
            Error::InvalidInput(_) | Error::InvalidGrid(_) | Error::GridMismatch(_) => {
                VnStatus::InvalidArgument
            }
            Error::NonFinite(_) => VnStatus::Failure,
        }
    }
}

/// Run configuration.
pub struct VnConfig(RunConfig);

/// Ground state of the limit problem on the configured grid.
pub struct VnGroundState(GroundState);

/// Result of the full pipeline.
pub struct VnReport(PipelineReport);

/// One row of the scaling scan.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct VnScanRow {
    pub eps: f64,
    pub psi: f64,
    pub eta: f64,
    pub lambda: f64,
    pub residual: f64,
    pub distance: f64,
    pub orbit_distance: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: VnStatus, msg: impl Into<String>) -> VnStatus {
    set_error(msg.into());
    status
}

fn guard(f: impl FnOnce() -> VnStatus) -> VnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(VnStatus::Panic, msg)
        }
    }
}

fn from_error(e: Error) -> VnStatus {
    let s = VnStatus::from(&e);
    fail(s, e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, VnStatus> {
    if p.is_null() {
        return Err(fail(VnStatus::InvalidArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(VnStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> VnStatus {
    *out = Box::into_raw(Box::new(value));
    VnStatus::Ok
}

macro_rules! check_out {
    ($out:expr) => {
        if $out.is_null() {
            return fail(
                VnStatus::InvalidArgument,
                concat!(stringify!($out), " is null"),
            );
        }
    };
}

/// Message of the last failing call on this thread, or null. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn vn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Built-in default configuration.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vn_config_default(out: *mut *mut VnConfig) -> VnStatus {
    check_out!(out);
    guard(|| emit(out, VnConfig(RunConfig::default())))
}

/// Parse a TOML configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vn_config_from_toml(
    toml: *const c_char,
    out: *mut *mut VnConfig,
) -> VnStatus {
    check_out!(out);
    guard(|| {
        let s = match str_arg(toml, "toml") {
            Ok(s) => s,
            Err(st) => return st,
        };
        match RunConfig::from_toml_str(s) {
            Ok(c) => emit(out, VnConfig(c)),
            Err(e) => from_error(e),
        }
    })
}

/// Override the random seed.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn vn_config_set_seed(cfg: *mut VnConfig, seed: u64) -> VnStatus {
    match cfg.as_mut() {
        Some(c) => {
            c.0.seed = seed;
            VnStatus::Ok
        }
        None => fail(VnStatus::InvalidArgument, "cfg is null"),
    }
}

/// Release a configuration; null is ignored.
///
/// # Safety
/// `cfg` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vn_config_free(cfg: *mut VnConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Check the analytic hypotheses. Returns `VN_STATUS_HYPOTHESIS` on violation.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn vn_validate(cfg: *const VnConfig) -> VnStatus {
    let Some(cfg) = cfg.as_ref() else {
        return fail(VnStatus::InvalidArgument, "cfg is null");
    };
    guard(|| match validate_stage(&cfg.0) {
        Ok(_) => VnStatus::Ok,
        Err(e) => from_error(e),
    })
}

/// Validate and compute the ground state.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vn_ground_state_solve(
    cfg: *const VnConfig,
    out: *mut *mut VnGroundState,
) -> VnStatus {
    check_out!(out);
    let Some(cfg) = cfg.as_ref() else {
        return fail(VnStatus::InvalidArgument, "cfg is null");
    };
    guard(|| {
        let result =
            validate_stage(&cfg.0).and_then(|(model, _)| ground_state_stage(&model, &cfg.0));
        match result {
            Ok(gs) => emit(out, VnGroundState(gs)),
            Err(e) => from_error(e),
        }
    })
}

/// Energy of the ground state, NaN for a null handle.
///
/// # Safety
/// `gs` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vn_ground_state_energy(gs: *const VnGroundState) -> f64 {
    gs.as_ref().map_or(f64::NAN, |g| g.0.energy)
}

/// Squared `L^2` norm of the ground state, NaN for a null handle.
///
/// # Safety
/// `gs` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vn_ground_state_l2_norm_sq(gs: *const VnGroundState) -> f64 {
    gs.as_ref().map_or(f64::NAN, |g| g.0.l2_norm_sq)
}

/// Number of grid values, 0 for a null handle.
///
/// # Safety
/// `gs` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vn_ground_state_len(gs: *const VnGroundState) -> usize {
    gs.as_ref().map_or(0, |g| g.0.omega.values().len())
}

/// Copy the grid values (row-major, last axis fastest) into `buf`, which holds `len` doubles.
///
/// # Safety
/// `gs` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn vn_ground_state_copy(
    gs: *const VnGroundState,
    buf: *mut f64,
    len: usize,
) -> VnStatus {
    let Some(g) = gs.as_ref() else {
        return fail(VnStatus::InvalidArgument, "gs is null");
    };
    if buf.is_null() {
        return fail(VnStatus::InvalidArgument, "buf is null");
    }
    let v = g.0.omega.values();
    if len != v.len() {
        return fail(
            VnStatus::InvalidArgument,
            format!("buffer holds {len} values, field has {}", v.len()),
        );
    }
    ptr::copy_nonoverlapping(v.as_ptr(), buf, len);
    VnStatus::Ok
}

/// Release a ground state; null is ignored.
///
/// # Safety
/// `gs` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vn_ground_state_free(gs: *mut VnGroundState) {
    if !gs.is_null() {
        drop(Box::from_raw(gs));
    }
}

/// Run the full pipeline; artifacts are written to `out_dir` unless it is null.
///
/// A report is produced even when certificates fail; check [`vn_report_all_passed`].
///
/// # Safety
/// `cfg` must be a live handle, `out_dir` null or a NUL-terminated path, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vn_pipeline_run(
    cfg: *const VnConfig,
    out_dir: *const c_char,
    out: *mut *mut VnReport,
) -> VnStatus {
    check_out!(out);
    let Some(cfg) = cfg.as_ref() else {
        return fail(VnStatus::InvalidArgument, "cfg is null");
    };
    guard(|| {
        let dir = if out_dir.is_null() {
            None
        } else {
            match str_arg(out_dir, "out_dir") {
                Ok(s) => Some(Path::new(s)),
                Err(st) => return st,
            }
        };
        match run_pipeline(&cfg.0, dir) {
            Ok(r) => emit(out, VnReport(r)),
            Err(e) => from_error(e),
        }
    })
}

/// 1 when every certificate passed, 0 otherwise or for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vn_report_all_passed(report: *const VnReport) -> i32 {
    report.as_ref().map_or(0, |r| r.0.all_passed() as i32)
}

/// Number of scan rows, 0 for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vn_report_scan_len(report: *const VnReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.scan.len())
}

/// Copy scan row `index` into `row`.
///
/// # Safety
/// `report` must be a live handle and `row` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vn_report_scan_row(
    report: *const VnReport,
    index: usize,
    row: *mut VnScanRow,
) -> VnStatus {
    let Some(r) = report.as_ref() else {
        return fail(VnStatus::InvalidArgument, "report is null");
    };
    if row.is_null() {
        return fail(VnStatus::InvalidArgument, "row is null");
    }
    let Some(s) = r.0.scan.get(index) else {
        return fail(
            VnStatus::InvalidArgument,
            format!("row {index} out of range ({} rows)", r.0.scan.len()),
        );
    };
    *row = VnScanRow {
        eps: s.eps,
        psi: s.psi,
        eta: s.eta,
        lambda: s.lambda,
        residual: s.residual,
        distance: s.distance,
        orbit_distance: s.orbit_distance,
    };
    VnStatus::Ok
}

/// Report as a JSON string; release it with [`vn_string_free`].
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vn_report_json(
    report: *const VnReport,
    out: *mut *mut c_char,
) -> VnStatus {
    check_out!(out);
    let Some(r) = report.as_ref() else {
        return fail(VnStatus::InvalidArgument, "report is null");
    };
    guard(|| match serde_json::to_string(&r.0) {
        Ok(s) => {
            *out = CString::new(s).unwrap_or_default().into_raw();
            VnStatus::Ok
        }
        Err(e) => fail(VnStatus::Failure, e.to_string()),
    })
}

/// Release a report; null is ignored.
///
/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vn_report_free(report: *mut VnReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Release a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
