//! C interface to the bang-bang shooting solver.
//!
//! Problems are opaque [`BbProblem`] handles created by one of the
//! `bb_problem_*` constructors and released with [`bb_problem_free`]. Every
//! fallible function returns a [`BbStatus`]; on failure a description is
//! available from [`bb_last_error`] on the same thread.
//!
//! Filter kinds are passed as the integers [`BB_FILTER_HARD`],
//! [`BB_FILTER_L2`] and [`BB_FILTER_TANH`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bangbang_core::config::RunConfig;
use bangbang_core::continuation::{continue_solve, ContinuationSchedule};
use bangbang_core::numerics::{IntegratorConfig, RootSolveConfig};
use bangbang_core::problem::{evaluate_residual, propagate_trajectory, solve_problem, IndirectProblem};
use bangbang_core::smoothing::{self, ControlBounds, FilterKind, SmoothingFilter};
use bangbang_core::Error;

pub const BB_FILTER_HARD: i32 = 0;
pub const BB_FILTER_L2: i32 = 1;
pub const BB_FILTER_TANH: i32 = 2;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BbStatus {
    Ok = 0,
    /// The solver ran but did not meet its tolerance.
    NotConverged = 1,
    InvalidArgument = 2,
    NullPointer = 3,
    /// Integration or evaluation failed numerically.
    Numerical = 4,
    /// A Rust panic was caught at the boundary.
    Internal = 5,
}

/// Problem definition together with its integrator and solver settings.
pub struct BbProblem {
    problem: Box<dyn IndirectProblem>,
    integrator: IntegratorConfig,
    solver: RootSolveConfig,
    schedule: Option<ContinuationSchedule>,
}

/// Summary of a solve written by [`bb_solve`] and [`bb_continue`].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BbSolveSummary {
    pub converged: bool,
    pub residual_norm: f64,
    pub iterations: u32,
    pub function_evaluations: u32,
    /// Objective of the converged trajectory; NaN otherwise.
    pub cost: f64,
    /// Filter constant of the returned solution.
    pub constant: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> BbStatus {
    if e.is_evaluation_failure() || matches!(e, Error::DegenerateDirection(_)) {
        BbStatus::Numerical
    } else {
        BbStatus::InvalidArgument
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard<F>(f: F) -> BbStatus
where
    F: FnOnce() -> Result<BbStatus, (BbStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            BbStatus::Internal
        }
    }
}

fn err(e: Error) -> (BbStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (BbStatus, String) {
    (BbStatus::NullPointer, format!("{what} is null"))
}

fn filter_of(kind: i32, constant: f64) -> Result<SmoothingFilter, (BbStatus, String)> {
    let kind = match kind {
        BB_FILTER_HARD => FilterKind::Hard,
        BB_FILTER_L2 => FilterKind::L2,
        BB_FILTER_TANH => FilterKind::Tanh,
        other => return Err((BbStatus::InvalidArgument, format!("unknown filter kind {other}"))),
    };
    SmoothingFilter::new(kind, constant).map_err(err)
}

/// # Safety
/// `ptr` must be null or valid for reading `len` values.
unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], (BbStatus, String)> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `ptr` must be null or valid for writing `len` values.
unsafe fn slice_mut<'a>(ptr: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], (BbStatus, String)> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

/// Description of the last failure on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Normalized L²-norm filter `x / sqrt(delta + x²)`.
///
/// # Safety
/// `out` must be null or point to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn bb_sat_l2(x: f64, delta: f64, out: *mut f64) -> BbStatus {
    guard(|| {
        let v = smoothing::sat_l2(x, delta).map_err(err)?;
        *slice_mut(out, 1, "out")?.first_mut().unwrap() = v;
        Ok(BbStatus::Ok)
    })
}

/// Hyperbolic tangent filter `tanh(x / rho)`.
///
/// # Safety
/// `out` must be null or point to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn bb_sat_tanh(x: f64, rho: f64, out: *mut f64) -> BbStatus {
    guard(|| {
        let v = smoothing::sat_tanh(x, rho).map_err(err)?;
        *slice_mut(out, 1, "out")?.first_mut().unwrap() = v;
        Ok(BbStatus::Ok)
    })
}

/// Smoothed bang-bang control of the switching function value `s`.
///
/// # Safety
/// `out` must be null or point to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn bb_smooth_control(
    s: f64,
    u_min: f64,
    u_max: f64,
    filter_kind: i32,
    constant: f64,
    out: *mut f64,
) -> BbStatus {
    guard(|| {
        let bounds = ControlBounds::new(u_min, u_max).map_err(err)?;
        let filter = filter_of(filter_kind, constant)?;
        let v = smoothing::smooth_control(s, bounds, filter).map_err(err)?;
        *slice_mut(out, 1, "out")?.first_mut().unwrap() = v;
        Ok(BbStatus::Ok)
    })
}

fn into_handle(config: &RunConfig) -> Result<*mut BbProblem, (BbStatus, String)> {
    let problem = config.validate().map_err(err)?;
    Ok(Box::into_raw(Box::new(BbProblem {
        problem,
        integrator: config.integrator(),
        solver: config.solver(),
        schedule: config.schedule,
    })))
}

fn construct(config: impl FnOnce() -> Result<RunConfig, (BbStatus, String)>) -> *mut BbProblem {
    let mut handle = ptr::null_mut();
    guard(|| {
        handle = into_handle(&config()?)?;
        Ok(BbStatus::Ok)
    });
    handle
}

/// Minimal-time oscillator from (1, 1) to the origin with default settings.
#[no_mangle]
pub extern "C" fn bb_problem_oscillator() -> *mut BbProblem {
    construct(|| Ok(RunConfig { problem: "oscillator".into(), ..RunConfig::default() }))
}

/// GTO→GEO minimal-fuel transfer with the default spacecraft and orbits.
#[no_mangle]
pub extern "C" fn bb_problem_gto_geo() -> *mut BbProblem {
    construct(|| Ok(RunConfig { problem: "gto-geo".into(), ..RunConfig::default() }))
}

/// Problem and settings from a TOML run configuration. Returns null on
/// error.
///
/// # Safety
/// `toml` must be null or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn bb_problem_from_toml(toml: *const c_char) -> *mut BbProblem {
    construct(|| {
        if toml.is_null() {
            return Err(null("toml"));
        }
        let text = CStr::from_ptr(toml).to_str().map_err(|e| (BbStatus::InvalidArgument, e.to_string()))?;
        RunConfig::from_toml_str(text).map_err(err)
    })
}

/// # Safety
/// `problem` must be null or a handle from a `bb_problem_*` constructor that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn bb_problem_free(problem: *mut BbProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Length of the shooting vector, or 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bb_problem_shooting_dim(problem: *const BbProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.problem.shooting_dim())
}

/// Shooting residual at `eta`; `out` receives `n` values.
///
/// # Safety
/// `problem` must be a live handle; `eta` and `out` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn bb_evaluate_residual(
    problem: *const BbProblem,
    eta: *const f64,
    n: usize,
    filter_kind: i32,
    constant: f64,
    out: *mut f64,
) -> BbStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let eta = slice(eta, n, "eta")?;
        let out = slice_mut(out, n, "out")?;
        let filter = filter_of(filter_kind, constant)?;
        let r = evaluate_residual(p.problem.as_ref(), eta, &filter, &p.integrator).map_err(err)?;
        out.copy_from_slice(&r);
        Ok(BbStatus::Ok)
    })
}

/// Newton solve at a fixed filter constant. `solution` receives the final
/// iterate whether or not it converged.
///
/// # Safety
/// `problem` must be a live handle; `eta0` and `solution` must hold `n`
/// values; `summary` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn bb_solve(
    problem: *const BbProblem,
    eta0: *const f64,
    n: usize,
    filter_kind: i32,
    constant: f64,
    solution: *mut f64,
    summary: *mut BbSolveSummary,
) -> BbStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let eta0 = slice(eta0, n, "eta0")?;
        let out = slice_mut(solution, n, "solution")?;
        let filter = filter_of(filter_kind, constant)?;
        let sol = solve_problem(p.problem.as_ref(), eta0, &filter, &p.integrator, &p.solver).map_err(err)?;
        out.copy_from_slice(&sol.report.solution);
        if let Some(s) = summary.as_mut() {
            *s = BbSolveSummary {
                converged: sol.report.converged,
                residual_norm: sol.report.residual_norm,
                iterations: sol.report.iterations as u32,
                function_evaluations: sol.report.function_evaluations as u32,
                cost: sol.cost.unwrap_or(f64::NAN),
                constant,
            };
        }
        Ok(if sol.report.converged { BbStatus::Ok } else { BbStatus::NotConverged })
    })
}

/// Decade continuation using the schedule of the handle's configuration,
/// or from 1 down to the filter's default floor when none was given.
///
/// # Safety
/// As for [`bb_solve`].
#[no_mangle]
pub unsafe extern "C" fn bb_continue(
    problem: *const BbProblem,
    eta0: *const f64,
    n: usize,
    filter_kind: i32,
    seed: u64,
    solution: *mut f64,
    summary: *mut BbSolveSummary,
) -> BbStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        let eta0 = slice(eta0, n, "eta0")?;
        let out = slice_mut(solution, n, "solution")?;
        let kind = filter_of(filter_kind, 1.0)?.kind;
        let schedule = p.schedule.unwrap_or_else(|| ContinuationSchedule::for_filter(kind));
        let rep = continue_solve(p.problem.as_ref(), eta0, kind, &schedule, &p.integrator, &p.solver, seed)
            .map_err(err)?;
        out.copy_from_slice(&rep.final_solution);
        if let Some(s) = summary.as_mut() {
            let iterations: usize = rep.steps.iter().map(|s| s.report.iterations).sum();
            let evaluations: usize = rep.steps.iter().map(|s| s.report.function_evaluations).sum();
            let constant = rep.final_constant.unwrap_or(f64::NAN);
            let cost = match rep.final_constant.filter(|_| rep.converged) {
                Some(c) => {
                    let filter = SmoothingFilter::new(kind, c).map_err(err)?;
                    let traj = propagate_trajectory(p.problem.as_ref(), &rep.final_solution, &filter, &p.integrator)
                        .map_err(err)?;
                    p.problem.cost_of(&traj)
                }
                None => f64::NAN,
            };
            *s = BbSolveSummary {
                converged: rep.converged,
                residual_norm: rep.steps.last().map_or(f64::NAN, |s| s.report.residual_norm),
                iterations: iterations as u32,
                function_evaluations: evaluations as u32,
                cost,
                constant,
            };
        }
        Ok(if rep.converged { BbStatus::Ok } else { BbStatus::NotConverged })
    })
}
