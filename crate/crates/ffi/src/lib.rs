//! C interface to `svm-asym`.
//!
//! Every fallible call returns an [`SvmAsymStatus`] and writes its result
//! through an out-pointer. On failure, [`svm_asym_last_error`] describes the
//! problem. Handles are opaque and must be released with the matching
//! `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use svm_asym::calibration::TheoryReport;
use svm_asym::lab::{self, Dataset, SvmFit};
use svm_asym::models::{ModelKind, ModelSpec};
use svm_asym::report::commands::{theory_for, EXIT_DIVERGED, EXIT_NON_CONVERGENCE};
use svm_asym::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvmAsymStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidModel = 3,
    NoSolution = 4,
    Diverged = 5,
    NotConverged = 6,
    DimensionMismatch = 7,
    Format = 8,
    Io = 9,
    Panic = 10,
}

/// Limiting predictions for one model.
pub struct SvmAsymTheory(TheoryReport);
/// A labelled sample.
pub struct SvmAsymDataset(Dataset);
/// A fitted SVM.
pub struct SvmAsymFit(SvmFit);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SvmAsymTheoryValues {
    pub alpha: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub support_fraction: f64,
    pub objective: f64,
    pub misclassification: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SvmAsymFitSummary {
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub kkt_violation: f64,
    pub epochs: usize,
    pub converged: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: SvmAsymStatus, msg: impl AsRef<str>) -> SvmAsymStatus {
    set_error(msg.as_ref());
    status
}

impl From<&Error> for SvmAsymStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::NonFinite(_) | Error::InvalidParameter(_) => SvmAsymStatus::InvalidArgument,
            Error::InvalidModel(_) => SvmAsymStatus::InvalidModel,
            Error::NoSolution(_) => SvmAsymStatus::NoSolution,
            Error::DimensionMismatch(_) => SvmAsymStatus::DimensionMismatch,
            Error::Format(_) => SvmAsymStatus::Format,
            Error::Io(_) => SvmAsymStatus::Io,
        }
    }
}

fn from_error(e: Error) -> SvmAsymStatus {
    fail((&e).into(), e.to_string())
}

/// Runs `f`, turning panics into [`SvmAsymStatus::Panic`].
fn guard<F: FnOnce() -> SvmAsymStatus>(f: F) -> SvmAsymStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(SvmAsymStatus::Panic, "internal panic"))
}

unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> Result<&'a str, SvmAsymStatus> {
    if s.is_null() {
        return Err(fail(SvmAsymStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(SvmAsymStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(SvmAsymStatus::NullPointer, concat!(stringify!($p), " is NULL"));
        })+
    };
}

/// Message for the last failed call on this thread. Valid until the next
/// call into the library from the same thread.
#[no_mangle]
pub extern "C" fn svm_asym_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn svm_asym_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn svm_asym_std_normal_cdf(x: f64, out: *mut f64) -> SvmAsymStatus {
    non_null!(out);
    match svm_asym::gauss::std_normal_cdf(x) {
        Ok(v) => {
            *out = v;
            SvmAsymStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn svm_asym_prox_margin(m: f64, gamma: f64, out: *mut f64) -> SvmAsymStatus {
    non_null!(out);
    match svm_asym::state::prox_margin(m, gamma) {
        Ok(v) => {
            *out = v;
            SvmAsymStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Solve the limiting equations for `model` (`"null"`, `"logistic:<c>"` or
/// `"indicator"`).
///
/// # Safety
/// `model` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn svm_asym_theory_solve(
    model: *const c_char,
    delta: f64,
    lambda: f64,
    out: *mut *mut SvmAsymTheory,
) -> SvmAsymStatus {
    non_null!(out);
    *out = ptr::null_mut();
    let model = try_ffi!(str_arg(model, "model"));
    guard(|| {
        let kind: ModelKind = match model.parse() {
            Ok(k) => k,
            Err(e) => return from_error(e),
        };
        let spec = match ModelSpec::new(kind, delta, lambda) {
            Ok(s) => s,
            Err(e) => return from_error(e),
        };
        match theory_for(&spec) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(SvmAsymTheory(r)));
                SvmAsymStatus::Ok
            }
            Err(e) if e.code == EXIT_DIVERGED => fail(SvmAsymStatus::Diverged, e.message),
            Err(e) if e.code == EXIT_NON_CONVERGENCE => fail(SvmAsymStatus::NoSolution, e.message),
            Err(e) => fail(SvmAsymStatus::InvalidArgument, e.message),
        }
    })
}

/// # Safety
/// `theory` must be NULL or a handle from [`svm_asym_theory_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn svm_asym_theory_free(theory: *mut SvmAsymTheory) {
    if !theory.is_null() {
        drop(Box::from_raw(theory));
    }
}

/// # Safety
/// `theory` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn svm_asym_theory_values(
    theory: *const SvmAsymTheory,
    out: *mut SvmAsymTheoryValues,
) -> SvmAsymStatus {
    non_null!(theory, out);
    let r = &(*theory).0;
    *out = SvmAsymTheoryValues {
        alpha: r.alpha(),
        gamma: r.gamma(),
        sigma: r.sigma(),
        support_fraction: r.support_fraction,
        objective: r.limiting_objective,
        misclassification: r.misclassification,
    };
    SvmAsymStatus::Ok
}

/// Which predicted curve [`svm_asym_theory_curve`] evaluates.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvmAsymCurve {
    /// CDF of a centered coefficient.
    CoefCdf = 0,
    /// CDF of a training margin, including the atom at 1.
    MarginCdf = 1,
    /// Density of `alpha* V + sigma* Z`.
    Density = 2,
}

/// Evaluate a predicted curve at `len` points.
///
/// # Safety
/// `theory` must be a live handle; `x` and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn svm_asym_theory_curve(
    theory: *const SvmAsymTheory,
    curve: SvmAsymCurve,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> SvmAsymStatus {
    non_null!(theory, x, out);
    let r = &(*theory).0;
    let xs = std::slice::from_raw_parts(x, len);
    let ys = std::slice::from_raw_parts_mut(out, len);
    guard(|| {
        for (y, &x) in ys.iter_mut().zip(xs) {
            *y = match curve {
                SvmAsymCurve::CoefCdf => r.coef_cdf(x),
                SvmAsymCurve::MarginCdf => r.margin_cdf(x),
                SvmAsymCurve::Density => r.w_density(x),
            };
        }
        SvmAsymStatus::Ok
    })
}

/// # Safety
/// `model` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn svm_asym_dataset_generate(
    model: *const c_char,
    n: usize,
    p: usize,
    seed: u64,
    out: *mut *mut SvmAsymDataset,
) -> SvmAsymStatus {
    non_null!(out);
    *out = ptr::null_mut();
    let model = try_ffi!(str_arg(model, "model"));
    guard(|| {
        let data = model
            .parse::<ModelKind>()
            .and_then(|k| lab::generate_dataset(&k, n, p, seed));
        match data {
            Ok(d) => {
                *out = Box::into_raw(Box::new(SvmAsymDataset(d)));
                SvmAsymStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Load a dataset file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn svm_asym_dataset_load(path: *const c_char, out: *mut *mut SvmAsymDataset) -> SvmAsymStatus {
    non_null!(out);
    *out = ptr::null_mut();
    let path = try_ffi!(str_arg(path, "path"));
    guard(|| match lab::io::load(path) {
        Ok(d) => {
            *out = Box::into_raw(Box::new(SvmAsymDataset(d)));
            SvmAsymStatus::Ok
        }
        Err(e) => from_error(e),
    })
}

/// # Safety
/// `data` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn svm_asym_dataset_save(data: *const SvmAsymDataset, path: *const c_char) -> SvmAsymStatus {
    non_null!(data);
    let path = try_ffi!(str_arg(path, "path"));
    guard(|| match lab::io::save(&(*data).0, path) {
        Ok(()) => SvmAsymStatus::Ok,
        Err(e) => from_error(e),
    })
}

/// # Safety
/// `data` must be a live handle; `n` and `p` writable.
#[no_mangle]
pub unsafe extern "C" fn svm_asym_dataset_dims(data: *const SvmAsymDataset, n: *mut usize, p: *mut usize) -> SvmAsymStatus {
    non_null!(data, n, p);
    *n = (*data).0.n;
    *p = (*data).0.p;
    SvmAsymStatus::Ok
}

/// # Safety
/// `data` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn svm_asym_dataset_free(data: *mut SvmAsymDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Fit the hinge + ridge SVM. A fit that runs out of epochs is still
/// returned, together with [`SvmAsymStatus::NotConverged`].
///
/// # Safety
/// `data` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn svm_asym_fit(
    data: *const SvmAsymDataset,
    lambda: f64,
    tol: f64,
    max_epochs: usize,
    out: *mut *mut SvmAsymFit,
) -> SvmAsymStatus {
    non_null!(data, out);
    *out = ptr::null_mut();
    guard(|| match lab::fit_svm(&(*data).0, lambda, tol, max_epochs) {
        Ok(fit) => {
            let converged = fit.converged();
            let epochs = fit.epochs;
            *out = Box::into_raw(Box::new(SvmAsymFit(fit)));
            if converged {
                SvmAsymStatus::Ok
            } else {
                fail(SvmAsymStatus::NotConverged, format!("no convergence after {epochs} epochs"))
            }
        }
        Err(e) => from_error(e),
    })
}

/// # Safety
/// `fit` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn svm_asym_fit_free(fit: *mut SvmAsymFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// # Safety
/// `fit` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn svm_asym_fit_summary(fit: *const SvmAsymFit, out: *mut SvmAsymFitSummary) -> SvmAsymStatus {
    non_null!(fit, out);
    let f = &(*fit).0;
    *out = SvmAsymFitSummary {
        primal_objective: f.primal_objective,
        dual_objective: f.dual_objective,
        gap: f.gap,
        kkt_violation: f.kkt_violation,
        epochs: f.epochs,
        converged: f.converged(),
    };
    SvmAsymStatus::Ok
}

/// Which per-index vector [`svm_asym_fit_copy`] copies.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvmAsymFitVector {
    /// Length `p`.
    Coefficients = 0,
    /// Length `n`.
    Margins = 1,
    /// Length `n`.
    Duals = 2,
}

/// Copy a vector of the fit into `out`, which must hold exactly its length.
///
/// # Safety
/// `fit` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn svm_asym_fit_copy(
    fit: *const SvmAsymFit,
    which: SvmAsymFitVector,
    out: *mut f64,
    len: usize,
) -> SvmAsymStatus {
    non_null!(fit, out);
    let f = &(*fit).0;
    let src = match which {
        SvmAsymFitVector::Coefficients => &f.coefficients,
        SvmAsymFitVector::Margins => &f.margins,
        SvmAsymFitVector::Duals => &f.duals,
    };
    if src.len() != len {
        return fail(
            SvmAsymStatus::DimensionMismatch,
            format!("buffer holds {len} values, vector has {}", src.len()),
        );
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, len);
    SvmAsymStatus::Ok
}

/// Number of training points on the margin boundary.
///
/// # Safety
/// `fit` must be a live handle and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn svm_asym_fit_boundary_count(
    fit: *const SvmAsymFit,
    eps_dual: f64,
    count: *mut usize,
) -> SvmAsymStatus {
    non_null!(fit, count);
    match lab::count_boundary(&(*fit).0, eps_dual) {
        Ok(b) => {
            *count = b.count;
            SvmAsymStatus::Ok
        }
        Err(e) => from_error(e),
    }
}
