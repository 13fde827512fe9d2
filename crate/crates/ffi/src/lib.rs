//! C ABI over `qlap-core`.
//!
//! Plain parameter structs go by value; results come back as opaque handles
//! that the caller releases with the matching `*_free`. Every fallible call
//! returns a [`QlapStatus`]; on failure the message is available from
//! [`qlap_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qlap_core::minimize::{
    alpha0_bisect, estimate_d1, global_minimize, local_minimize, GridSpec, MinimizeOptions,
    MinimizeResult,
};
use qlap_core::params::{classify_regime, mass_critical_exponents, ProblemParams, RegimeKind};
use qlap_core::scaling::ThresholdReport;
use qlap_core::shoot::{find_ground_state, GroundStateOptions, L2Mass, ShootResult};
use qlap_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QlapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParams = 2,
    Regime = 3,
    NoSolution = 4,
    Numerical = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QlapRegimeKind {
    Subcritical = 0,
    MassCriticalLower = 1,
    Intermediate = 2,
    MassCriticalUpper = 3,
    Supercritical = 4,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QlapParams {
    pub dim: u32,
    pub q: f64,
    pub p: f64,
    pub alpha: f64,
    pub mass: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QlapRegime {
    pub kind: QlapRegimeKind,
    pub zero_mass_eligible: bool,
    pub p2: f64,
    pub pq: f64,
}

/// `r_max <= 0` picks the radius automatically.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QlapMinimizeOptions {
    pub max_iter: u32,
    pub restarts: u32,
    pub seed: u64,
    pub tol_grad: f64,
    pub grid_nodes: u32,
    pub r_max: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QlapThreshold {
    pub d1: f64,
    pub dm: f64,
    pub alpha0_formula: f64,
    /// NaN when bisection was not requested.
    pub alpha0_bisect: f64,
}

/// Opaque minimization result.
pub struct QlapMinResult(MinimizeResult);

/// Opaque shooting ground state.
pub struct QlapGroundState(ShootResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> QlapStatus {
    match err {
        Error::InvalidParams(_) | Error::Parse(_) => QlapStatus::InvalidParams,
        Error::Regime(_) => QlapStatus::Regime,
        Error::NoGroundState(_) | Error::NoLocalMinimizer(_) | Error::BracketNotFound(_) => {
            QlapStatus::NoSolution
        }
        _ => QlapStatus::Numerical,
    }
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Runs `f`, turning errors and panics into a status plus the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> QlapStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QlapStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("{what} is null"));
            QlapStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            QlapStatus::Panic
        }
    }
}

impl QlapParams {
    fn to_core(self) -> Result<ProblemParams, Error> {
        ProblemParams::new(self.dim as usize, self.q, self.p, self.alpha, self.mass)
    }
}

impl QlapMinimizeOptions {
    fn to_core(self) -> MinimizeOptions {
        let base = MinimizeOptions::default();
        MinimizeOptions {
            max_iter: self.max_iter as usize,
            restarts: self.restarts as usize,
            seed: self.seed,
            tol_grad: self.tol_grad,
            grid: GridSpec {
                n: self.grid_nodes as usize,
                r_max: (self.r_max > 0.0).then_some(self.r_max),
                ..base.grid
            },
            ..base
        }
    }
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qlap_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qlap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn qlap_minimize_options_default() -> QlapMinimizeOptions {
    let d = MinimizeOptions::default();
    QlapMinimizeOptions {
        max_iter: d.max_iter as u32,
        restarts: d.restarts as u32,
        seed: d.seed,
        tol_grad: d.tol_grad,
        grid_nodes: d.grid.n as u32,
        r_max: d.grid.r_max.unwrap_or(0.0),
    }
}

/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qlap_classify_regime(params: QlapParams, out: *mut QlapRegime) -> QlapStatus {
    guard(|| {
        let out = unsafe { out.as_mut() }.ok_or(Failure::Null("out"))?;
        let core = params.to_core()?;
        let (p2, pq) = mass_critical_exponents(core.dim, core.q)?;
        let regime = classify_regime(&core);
        let kind = match regime.kind {
            RegimeKind::Subcritical => QlapRegimeKind::Subcritical,
            RegimeKind::MassCriticalLower => QlapRegimeKind::MassCriticalLower,
            RegimeKind::Intermediate => QlapRegimeKind::Intermediate,
            RegimeKind::MassCriticalUpper => QlapRegimeKind::MassCriticalUpper,
            RegimeKind::Supercritical => QlapRegimeKind::Supercritical,
        };
        *out = QlapRegime { kind, zero_mass_eligible: regime.zero_mass_eligible, p2, pq };
        Ok(())
    })
}

/// Global minimization on the mass sphere. `opts` may be null for defaults.
///
/// # Safety
/// `opts` must be null or point to a valid struct; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qlap_minimize_global(
    params: QlapParams,
    opts: *const QlapMinimizeOptions,
    out: *mut *mut QlapMinResult,
) -> QlapStatus {
    guard(|| {
        let out = unsafe { out.as_mut() }.ok_or(Failure::Null("out"))?;
        let opts = unsafe { opts.as_ref() }.map_or_else(MinimizeOptions::default, |o| o.to_core());
        let res = global_minimize(&params.to_core()?, &opts)?;
        *out = Box::into_raw(Box::new(QlapMinResult(res)));
        Ok(())
    })
}

/// Local minimization over `K > rho/2`.
///
/// # Safety
/// As [`qlap_minimize_global`].
#[no_mangle]
pub unsafe extern "C" fn qlap_minimize_local(
    params: QlapParams,
    rho: f64,
    opts: *const QlapMinimizeOptions,
    out: *mut *mut QlapMinResult,
) -> QlapStatus {
    guard(|| {
        let out = unsafe { out.as_mut() }.ok_or(Failure::Null("out"))?;
        let opts = unsafe { opts.as_ref() }.map_or_else(MinimizeOptions::default, |o| o.to_core());
        let res = local_minimize(&params.to_core()?, rho, &opts)?;
        *out = Box::into_raw(Box::new(QlapMinResult(res)));
        Ok(())
    })
}

/// # Safety
/// `res` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qlap_min_result_free(res: *mut QlapMinResult) {
    if !res.is_null() {
        drop(unsafe { Box::from_raw(res) });
    }
}

/// Energy; NaN for a null handle.
///
/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qlap_min_result_energy(res: *const QlapMinResult) -> f64 {
    unsafe { res.as_ref() }.map_or(f64::NAN, |r| r.0.energy)
}

/// Lagrange multiplier; NaN for a null handle.
///
/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qlap_min_result_lambda(res: *const QlapMinResult) -> f64 {
    unsafe { res.as_ref() }.map_or(f64::NAN, |r| r.0.lambda)
}

/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qlap_min_result_converged(res: *const QlapMinResult) -> bool {
    unsafe { res.as_ref() }.is_some_and(|r| r.0.converged)
}

/// True when no negative energy was reached (the infimum is zero).
///
/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qlap_min_result_vanishing(res: *const QlapMinResult) -> bool {
    unsafe { res.as_ref() }.is_some_and(|r| r.0.vanishing)
}

/// Number of grid nodes of the minimizer; 0 for a null handle.
///
/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qlap_min_result_len(res: *const QlapMinResult) -> usize {
    unsafe { res.as_ref() }.map_or(0, |r| r.0.u.values().len())
}

/// Copies up to `len` nodes and values into `r` and `u`; returns the count.
///
/// # Safety
/// `r` and `u` must each be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn qlap_min_result_profile(
    res: *const QlapMinResult,
    r: *mut f64,
    u: *mut f64,
    len: usize,
) -> usize {
    let Some(res) = (unsafe { res.as_ref() }) else { return 0 };
    if r.is_null() || u.is_null() {
        return 0;
    }
    let nodes = res.0.u.grid().nodes();
    let values = res.0.u.values();
    let n = len.min(values.len());
    unsafe {
        ptr::copy_nonoverlapping(nodes.as_ptr(), r, n);
        ptr::copy_nonoverlapping(values.as_ptr(), u, n);
    }
    n
}

/// Threshold strength from `d(1)` and, if `bisect`, by bisection on the sign
/// of the minimum energy. `params.alpha` is ignored.
///
/// # Safety
/// `opts` must be null or valid; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qlap_alpha0(
    params: QlapParams,
    opts: *const QlapMinimizeOptions,
    bisect: bool,
    out: *mut QlapThreshold,
) -> QlapStatus {
    guard(|| {
        let out = unsafe { out.as_mut() }.ok_or(Failure::Null("out"))?;
        let opts = unsafe { opts.as_ref() }.map_or_else(MinimizeOptions::default, |o| o.to_core());
        let core = QlapParams { alpha: 1.0, ..params }.to_core()?;
        core.require_intermediate()?;
        let d1 = estimate_d1(&core, &opts)?;
        let b = if bisect { Some(alpha0_bisect(&core, &opts)?) } else { None };
        let rep = ThresholdReport::new(d1, b, &core)?;
        *out = QlapThreshold {
            d1: rep.d1,
            dm: rep.dm,
            alpha0_formula: rep.alpha0_formula,
            alpha0_bisect: rep.alpha0_bisect.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// Positive decaying radial solution at multiplier `lambda >= 0`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qlap_find_ground_state(
    params: QlapParams,
    lambda: f64,
    out: *mut *mut QlapGroundState,
) -> QlapStatus {
    guard(|| {
        let out = unsafe { out.as_mut() }.ok_or(Failure::Null("out"))?;
        let gs = find_ground_state(&params.to_core()?, lambda, &GroundStateOptions::default())?;
        *out = Box::into_raw(Box::new(QlapGroundState(gs.result)));
        Ok(())
    })
}

/// # Safety
/// `gs` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qlap_ground_state_free(gs: *mut QlapGroundState) {
    if !gs.is_null() {
        drop(unsafe { Box::from_raw(gs) });
    }
}

/// `u(0)`; NaN for a null handle.
///
/// # Safety
/// `gs` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qlap_ground_state_u0(gs: *const QlapGroundState) -> f64 {
    unsafe { gs.as_ref() }.map_or(f64::NAN, |g| g.0.u0)
}

/// Fitted tail slope of `ln|u|` against `ln r`; NaN when none was fitted.
///
/// # Safety
/// `gs` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qlap_ground_state_decay_slope(gs: *const QlapGroundState) -> f64 {
    unsafe { gs.as_ref() }
        .and_then(|g| g.0.decay.and_then(|d| d.slope()))
        .unwrap_or(f64::NAN)
}

/// `‖u‖₂²`; +infinity when divergent, NaN for a null handle.
///
/// # Safety
/// `gs` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qlap_ground_state_l2_mass(gs: *const QlapGroundState) -> f64 {
    match unsafe { gs.as_ref() }.map(|g| g.0.l2_mass) {
        Some(Some(L2Mass::Finite(m))) => m,
        Some(_) => f64::INFINITY,
        None => f64::NAN,
    }
}

/// Relative Pohozaev residual of the grid-mapped profile; NaN if unavailable.
///
/// # Safety
/// `gs` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qlap_ground_state_pohozaev_residual(gs: *const QlapGroundState) -> f64 {
    unsafe { gs.as_ref() }.and_then(|g| g.0.pohozaev_residual).unwrap_or(f64::NAN)
}

/// `u(r)` including the analytic tail; NaN for a null handle.
///
/// # Safety
/// `gs` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qlap_ground_state_eval(gs: *const QlapGroundState, r: f64) -> f64 {
    unsafe { gs.as_ref() }.map_or(f64::NAN, |g| g.0.eval(r))
}
