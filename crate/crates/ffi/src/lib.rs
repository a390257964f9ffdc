//! C ABI for `chdroplet`.
//!
//! Every fallible function returns a [`ChdStatus`]; on anything other than
//! `CHD_STATUS_OK` a message is available from [`chd_last_error`] on the
//! same thread. Problems, fields and minimization reports are opaque
//! handles owned by the caller and released with the matching `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use chdroplet::analytic::{self, ProblemSpec, Regime};
use chdroplet::diagnostics::{self, Classification};
use chdroplet::energy::free_energy;
use chdroplet::expansion::{expansion_state, second_order_radius};
use chdroplet::field::{self, Field, Grid};
use chdroplet::minimizer::{self, FlowConfig, MinimizeReport, Seed};
use chdroplet::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChdStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Precondition = 3,
    Flow = 4,
    /// The report is still produced and holds the best partial result.
    NotConverged = 5,
    Format = 6,
    Io = 7,
    Json = 8,
    Panic = 9,
    InvalidUtf8 = 10,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChdRegime {
    Uniform = 0,
    Droplet = 1,
    Critical = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ChdCriticalConstants {
    pub s: f64,
    pub chi: f64,
    pub c_star: f64,
    pub eta_star: f64,
    pub k_star: f64,
    /// Smallest `C` at which a metastable droplet exists.
    pub c_spinodal: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChdPhiResult {
    pub eta_c: f64,
    pub phi_min: f64,
    pub regime: ChdRegime,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ChdDiagnostics {
    pub kappa: f64,
    pub vol_a: f64,
    pub vol_b: f64,
    pub vol_c: f64,
    pub radius: f64,
    pub eta_measured: f64,
    pub l4_distance: f64,
    /// 1 for a droplet, 0 for uniform.
    pub droplet: i32,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ChdExpansion {
    pub lambda: f64,
    pub k1: f64,
    pub mu1: f64,
    pub phi1: f64,
    /// Radius in units of the equimolar radius.
    pub r1: f64,
    pub r2: f64,
    pub r0: f64,
}

/// Opaque problem: dimension, side length and mean density.
pub struct ChdProblem(ProblemSpec);

/// Opaque grid function.
pub struct ChdField(Field);

/// Opaque minimization result.
pub struct ChdReport(MinimizeReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(error: &Error) -> ChdStatus {
    match error {
        Error::Domain(_) => ChdStatus::Domain,
        Error::Precondition(_) => ChdStatus::Precondition,
        Error::Flow(_) => ChdStatus::Flow,
        Error::NotConverged(_) => ChdStatus::NotConverged,
        Error::Format(_) => ChdStatus::Format,
        Error::Io(_) => ChdStatus::Io,
        Error::Json(_) => ChdStatus::Json,
    }
}

fn fail(status: ChdStatus, message: impl Into<String>) -> ChdStatus {
    set_last_error(message.into());
    status
}

/// Runs `body`, mapping errors and panics to a status.
fn guard(body: impl FnOnce() -> Result<(), ChdStatus>) -> ChdStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => ChdStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(ChdStatus::Panic, "internal panic"),
    }
}

fn lift<T>(result: chdroplet::Result<T>) -> Result<T, ChdStatus> {
    result.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, ChdStatus> {
    p.as_ref().ok_or_else(|| fail(ChdStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, ChdStatus> {
    p.as_mut().ok_or_else(|| fail(ChdStatus::NullPointer, format!("{what} is null")))
}

fn require_dimension(d: usize) -> Result<(), ChdStatus> {
    if d >= 2 {
        Ok(())
    } else {
        Err(fail(ChdStatus::Domain, format!("dimension must be at least 2, got {d}")))
    }
}

/// Message of the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn chd_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn chd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out_constants` must point to writable memory for one `ChdCriticalConstants`.
#[no_mangle]
pub unsafe extern "C" fn chd_critical_constants(d: usize, out_constants: *mut ChdCriticalConstants) -> ChdStatus {
    guard(|| {
        let dst = out(out_constants, "out_constants")?;
        require_dimension(d)?;
        let s = analytic::surface_tension();
        *dst = ChdCriticalConstants {
            s,
            chi: analytic::CHI,
            c_star: analytic::c_star(d),
            eta_star: analytic::eta_star(d),
            k_star: analytic::k_star(d, s, analytic::CHI),
            c_spinodal: analytic::stationary_threshold(d),
        };
        Ok(())
    })
}

/// Minimizes `η^{1-1/d} + C(1-η)²` over `[0, 1]`.
///
/// # Safety
/// `out_result` must point to writable memory for one `ChdPhiResult`.
#[no_mangle]
pub unsafe extern "C" fn chd_minimize_phi(c: f64, d: usize, out_result: *mut ChdPhiResult) -> ChdStatus {
    guard(|| {
        let dst = out(out_result, "out_result")?;
        require_dimension(d)?;
        if !(c.is_finite() && c >= 0.0) {
            return Err(fail(ChdStatus::Domain, format!("C must be finite and nonnegative, got {c}")));
        }
        let r = analytic::minimize_phi(c, d);
        *dst = ChdPhiResult {
            eta_c: r.eta_c,
            phi_min: r.phi_min,
            regime: match r.regime {
                Regime::Uniform => ChdRegime::Uniform,
                Regime::Droplet => ChdRegime::Droplet,
                Regime::Critical => ChdRegime::Critical,
            },
        };
        Ok(())
    })
}

/// Problem with `n = -1 + K L^{-d/(d+1)}`.
///
/// # Safety
/// `out_problem` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn chd_problem_from_k(
    d: usize,
    length: f64,
    k: f64,
    out_problem: *mut *mut ChdProblem,
) -> ChdStatus {
    guard(|| {
        let dst = out(out_problem, "out_problem")?;
        *dst = Box::into_raw(Box::new(ChdProblem(lift(ProblemSpec::from_k(d, length, k))?)));
        Ok(())
    })
}

/// Problem with an explicit mean density `n`.
///
/// # Safety
/// `out_problem` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn chd_problem_from_n(
    d: usize,
    length: f64,
    n: f64,
    out_problem: *mut *mut ChdProblem,
) -> ChdStatus {
    guard(|| {
        let dst = out(out_problem, "out_problem")?;
        *dst = Box::into_raw(Box::new(ChdProblem(lift(ProblemSpec::new(d, length, n))?)));
        Ok(())
    })
}

/// # Safety
/// `problem` must be null or a handle from `chd_problem_from_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn chd_problem_free(problem: *mut ChdProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Mean density of the problem, or NaN for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn chd_problem_mean(problem: *const ChdProblem) -> f64 {
    problem.as_ref().map_or(f64::NAN, |p| p.0.n)
}

/// Constant field equal to the problem's mean on an `N^d` grid.
///
/// # Safety
/// `problem` must be a live handle and `out_field` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn chd_field_uniform(
    problem: *const ChdProblem,
    n_side: usize,
    out_field: *mut *mut ChdField,
) -> ChdStatus {
    guard(|| {
        let spec = deref(problem, "problem")?.0;
        let dst = out(out_field, "out_field")?;
        let grid = lift(Grid::new(spec.d, n_side, spec.length))?;
        *dst = Box::into_raw(Box::new(ChdField(lift(field::uniform_field(grid, spec.n))?)));
        Ok(())
    })
}

/// Reads a field snapshot written by the command-line tool.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_field` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn chd_field_read_snapshot(path: *const c_char, out_field: *mut *mut ChdField) -> ChdStatus {
    guard(|| {
        if path.is_null() {
            return Err(fail(ChdStatus::NullPointer, "path is null"));
        }
        let dst = out(out_field, "out_field")?;
        let path = CStr::from_ptr(path).to_str().map_err(|e| fail(ChdStatus::InvalidUtf8, e.to_string()))?;
        let (_, f) = lift(field::read_snapshot(Path::new(path)))?;
        *dst = Box::into_raw(Box::new(ChdField(f)));
        Ok(())
    })
}

/// # Safety
/// `field` must be null or a live field handle.
#[no_mangle]
pub unsafe extern "C" fn chd_field_free(field: *mut ChdField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Number of grid values, or 0 for a null handle.
///
/// # Safety
/// `field` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn chd_field_len(field: *const ChdField) -> usize {
    field.as_ref().map_or(0, |f| f.0.values.len())
}

/// Copies the row-major values into `buffer`, which must hold `len` values
/// with `len` equal to `chd_field_len`.
///
/// # Safety
/// `buffer` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn chd_field_copy_values(field: *const ChdField, buffer: *mut f64, len: usize) -> ChdStatus {
    guard(|| {
        let f = deref(field, "field")?;
        if buffer.is_null() {
            return Err(fail(ChdStatus::NullPointer, "buffer is null"));
        }
        if len != f.0.values.len() {
            return Err(fail(ChdStatus::Domain, format!("buffer holds {len} values, field has {}", f.0.values.len())));
        }
        std::slice::from_raw_parts_mut(buffer, len).copy_from_slice(&f.0.values);
        Ok(())
    })
}

/// Discrete free energy of the field.
///
/// # Safety
/// `field` must be a live handle and `out_energy` writable.
#[no_mangle]
pub unsafe extern "C" fn chd_field_energy(field: *const ChdField, out_energy: *mut f64) -> ChdStatus {
    guard(|| {
        let f = deref(field, "field")?;
        let dst = out(out_energy, "out_energy")?;
        *dst = lift(free_energy(&f.0))?.total;
        Ok(())
    })
}

/// Partition volumes, radius, volume fraction, `L⁴` distance to the sharp
/// droplet of fraction `eta_reference`, and classification at `threshold`
/// (a negative threshold selects the default).
///
/// # Safety
/// `field` must be a live handle and `out_diagnostics` writable.
#[no_mangle]
pub unsafe extern "C" fn chd_diagnose(
    field: *const ChdField,
    n: f64,
    eta_reference: f64,
    threshold: f64,
    out_diagnostics: *mut ChdDiagnostics,
) -> ChdStatus {
    guard(|| {
        let f = deref(field, "field")?;
        let dst = out(out_diagnostics, "out_diagnostics")?;
        let threshold = if threshold < 0.0 { diagnostics::default_threshold(f.0.grid.d) } else { threshold };
        let diag = lift(diagnostics::diagnose(&f.0, n, eta_reference, threshold))?;
        *dst = ChdDiagnostics {
            kappa: diag.kappa,
            vol_a: diag.vol_a,
            vol_b: diag.vol_b,
            vol_c: diag.vol_c,
            radius: diag.radius,
            eta_measured: diag.eta_measured,
            l4_distance: diag.l4_distance.unwrap_or(f64::NAN),
            droplet: i32::from(diag.classification == Some(Classification::Droplet)),
        };
        Ok(())
    })
}

/// Minimizes the free energy from the default seeds. On
/// `CHD_STATUS_NOT_CONVERGED` the report handle is still set.
///
/// # Safety
/// `problem` must be a live handle and `out_report` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn chd_minimize(
    problem: *const ChdProblem,
    n_side: usize,
    tol_residual: f64,
    max_iters: usize,
    out_report: *mut *mut ChdReport,
) -> ChdStatus {
    chd_minimize_seeded(problem, n_side, tol_residual, max_iters, ptr::null(), out_report)
}

/// As `chd_minimize` with a comma-separated seed list such as
/// `"uniform,eta-c"`; null selects the defaults.
///
/// # Safety
/// `seeds` must be null or NUL-terminated; otherwise as `chd_minimize`.
#[no_mangle]
pub unsafe extern "C" fn chd_minimize_seeded(
    problem: *const ChdProblem,
    n_side: usize,
    tol_residual: f64,
    max_iters: usize,
    seeds: *const c_char,
    out_report: *mut *mut ChdReport,
) -> ChdStatus {
    guard(|| {
        let spec = deref(problem, "problem")?.0;
        let dst = out(out_report, "out_report")?;
        *dst = ptr::null_mut();
        let seeds = if seeds.is_null() {
            Seed::defaults()
        } else {
            let text = CStr::from_ptr(seeds).to_str().map_err(|e| fail(ChdStatus::InvalidUtf8, e.to_string()))?;
            text.split(',').map(|s| lift(s.trim().parse::<Seed>())).collect::<Result<Vec<_>, _>>()?
        };
        let grid = lift(Grid::new(spec.d, n_side, spec.length))?;
        let config = FlowConfig { tol_residual, max_iters, seeds, ..FlowConfig::default() };
        match minimizer::minimize(&spec, grid, &config) {
            Ok(r) => {
                *dst = Box::into_raw(Box::new(ChdReport(r)));
                Ok(())
            }
            Err(Error::NotConverged(r)) => {
                set_last_error(format!("no seed converged; best residual {:.3e}", r.residual));
                *dst = Box::into_raw(Box::new(ChdReport(*r)));
                Err(ChdStatus::NotConverged)
            }
            Err(e) => Err(fail(status_of(&e), e.to_string())),
        }
    })
}

/// # Safety
/// `report` must be null or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn chd_report_free(report: *mut ChdReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Total energy of the best field, or NaN for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn chd_report_energy(report: *const ChdReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.0.energy.total)
}

/// Sup norm of the projected residual of the best field, or NaN.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn chd_report_residual(report: *const ChdReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.0.residual)
}

/// 1 if the best seed converged, 0 otherwise or for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn chd_report_converged(report: *const ChdReport) -> i32 {
    report.as_ref().map_or(0, |r| i32::from(r.0.converged))
}

/// Copy of the best field as a new handle.
///
/// # Safety
/// `report` must be a live handle and `out_field` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn chd_report_field(report: *const ChdReport, out_field: *mut *mut ChdField) -> ChdStatus {
    guard(|| {
        let r = deref(report, "report")?;
        let dst = out(out_field, "out_field")?;
        *dst = Box::into_raw(Box::new(ChdField(r.0.best_field.clone())));
        Ok(())
    })
}

/// First-order expansion quantities for a two-dimensional droplet problem.
///
/// # Safety
/// `problem` must be a live handle and `out_expansion` writable.
#[no_mangle]
pub unsafe extern "C" fn chd_expansion(problem: *const ChdProblem, out_expansion: *mut ChdExpansion) -> ChdStatus {
    guard(|| {
        let spec = deref(problem, "problem")?.0;
        let dst = out(out_expansion, "out_expansion")?;
        let st = lift(expansion_state(&spec))?;
        *dst = ChdExpansion {
            lambda: st.lambda,
            k1: st.k1,
            mu1: st.mu1,
            phi1: st.phi1,
            r1: st.r1,
            r2: second_order_radius(&st),
            r0: st.r0,
        };
        Ok(())
    })
}
