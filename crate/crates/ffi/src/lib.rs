//! C ABI over the `relsec` bound evaluators and optimizers.
//!
//! Every fallible function returns a [`RelsecStatus`]; on failure a message is
//! available from [`relsec_last_error_message`] on the same thread. Results
//! are written through caller-provided pointers. Panics never cross the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use relsec::optimizer::{self, Problem};
use relsec::rates::{self, Bandwidth};
use relsec::{Allocation, Error, Mode, ModePartition, OptimizerConfig, PowerBudget, SubchannelParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelsecStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Shape = 3,
    Infeasible = 4,
    Unsupported = 5,
    InvalidMode = 6,
    Panic = 7,
    Other = 8,
}

/// Mode codes accepted in `modes` arrays.
pub const RELSEC_MODE_DF: u8 = 0;
pub const RELSEC_MODE_NF: u8 = 1;

/// Noise variances and relay gain ratios of one subchannel. Use
/// `INFINITY` for `sigma1_sq` when the relay does not hear the source.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelsecSubchannel {
    pub sigma_sq: f64,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub rho1: f64,
    pub rho2: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelsecOptimizerConfig {
    pub restarts: u32,
    pub max_iters: u32,
    pub step_init: f64,
    pub tol: f64,
    pub seed: u64,
}

/// Opaque parallel channel with its power budgets.
pub struct RelsecProblem {
    subchannels: Vec<SubchannelParams>,
    budget: PowerBudget,
    bandwidth: Bandwidth,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> RelsecStatus {
    match e {
        Error::Domain(_) | Error::DegenerateState(_) => RelsecStatus::Domain,
        Error::Shape(_) => RelsecStatus::Shape,
        Error::Infeasible(_) => RelsecStatus::Infeasible,
        Error::Unsupported(_) => RelsecStatus::Unsupported,
        _ => RelsecStatus::Other,
    }
}

fn guard(f: impl FnOnce() -> Result<(), RelsecStatus>) -> RelsecStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RelsecStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside relsec");
            RelsecStatus::Panic
        }
    }
}

fn fail(e: Error) -> RelsecStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null(what: &str) -> RelsecStatus {
    set_error(format!("{what} is null"));
    RelsecStatus::NullPointer
}

unsafe fn problem_ref<'a>(p: *const RelsecProblem) -> Result<&'a RelsecProblem, RelsecStatus> {
    p.as_ref().ok_or_else(|| null("problem"))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], RelsecStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn modes_from(p: *const u8, len: usize) -> Result<ModePartition, RelsecStatus> {
    if p.is_null() {
        return Err(null("modes"));
    }
    std::slice::from_raw_parts(p, len)
        .iter()
        .map(|&m| match m {
            RELSEC_MODE_DF => Ok(Mode::DecodeForward),
            RELSEC_MODE_NF => Ok(Mode::NoiseForward),
            other => {
                set_error(format!("mode code {other} is neither DF (0) nor NF (1)"));
                Err(RelsecStatus::InvalidMode)
            }
        })
        .collect::<Result<Vec<_>, _>>()
        .map(ModePartition)
}

unsafe fn write_out(dst: *mut f64, values: &[f64]) {
    if !dst.is_null() {
        std::ptr::copy_nonoverlapping(values.as_ptr(), dst, values.len());
    }
}

unsafe fn config_from(c: *const RelsecOptimizerConfig) -> OptimizerConfig {
    match c.as_ref() {
        None => OptimizerConfig::default(),
        Some(c) => OptimizerConfig {
            restarts: c.restarts as usize,
            max_iters: c.max_iters as usize,
            step_init: c.step_init,
            tol: c.tol,
            seed: c.seed,
            ..OptimizerConfig::default()
        },
    }
}

impl RelsecProblem {
    fn problem(&self) -> Problem<'_> {
        Problem::new(&self.subchannels, self.budget).with_bandwidth(self.bandwidth)
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn relsec_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next `relsec_*` call on this thread.
#[no_mangle]
pub extern "C" fn relsec_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn relsec_optimizer_config_default() -> RelsecOptimizerConfig {
    let d = OptimizerConfig::default();
    RelsecOptimizerConfig {
        restarts: d.restarts as u32,
        max_iters: d.max_iters as u32,
        step_init: d.step_init,
        tol: d.tol,
        seed: d.seed,
    }
}

/// `C(x) = 1/2 log2(1 + x)`, doubled when `complex` is true.
///
/// # Safety
/// `out` must be null or valid for a write of one `double`.
#[no_mangle]
pub unsafe extern "C" fn relsec_cap(x: f64, complex: bool, out: *mut f64) -> RelsecStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let bw = if complex { Bandwidth::Complex } else { Bandwidth::Real };
        *out = rates::cap(x, bw).map_err(fail)?;
        Ok(())
    })
}

/// Creates an empty problem with the given sum-power budgets.
///
/// # Safety
/// `out` must be valid for a write of one pointer. The handle must be
/// released with [`relsec_problem_free`].
#[no_mangle]
pub unsafe extern "C" fn relsec_problem_new(
    p1_total: f64,
    p2_total: f64,
    complex: bool,
    out: *mut *mut RelsecProblem,
) -> RelsecStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let budget = PowerBudget::new(p1_total, p2_total).map_err(fail)?;
        let p = RelsecProblem {
            subchannels: Vec::new(),
            budget,
            bandwidth: if complex { Bandwidth::Complex } else { Bandwidth::Real },
        };
        *out = Box::into_raw(Box::new(p));
        Ok(())
    })
}

/// Releases a problem. Null is ignored.
///
/// # Safety
/// `problem` must be null or a handle from [`relsec_problem_new`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn relsec_problem_free(problem: *mut RelsecProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Appends a subchannel after validating it.
///
/// # Safety
/// `problem` must be a live handle and `sub` valid for one read.
#[no_mangle]
pub unsafe extern "C" fn relsec_problem_add_subchannel(
    problem: *mut RelsecProblem,
    sub: *const RelsecSubchannel,
) -> RelsecStatus {
    guard(|| {
        let p = problem.as_mut().ok_or_else(|| null("problem"))?;
        let s = sub.as_ref().ok_or_else(|| null("sub"))?;
        let params = SubchannelParams::new(s.sigma_sq, s.sigma1_sq, s.sigma2_sq, s.rho1, s.rho2).map_err(fail)?;
        p.subchannels.push(params);
        Ok(())
    })
}

/// Number of subchannels, or 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn relsec_problem_len(problem: *const RelsecProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.subchannels.len())
}

/// Condensed lower bound at a fixed allocation. Arrays have one entry per
/// subchannel; `alpha` is read only on DF subchannels but must be present.
///
/// # Safety
/// `problem` must be a live handle; `modes`, `p1`, `p2`, `alpha` must each be
/// valid for `relsec_problem_len(problem)` reads; `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn relsec_lower_bound(
    problem: *const RelsecProblem,
    modes: *const u8,
    p1: *const f64,
    p2: *const f64,
    alpha: *const f64,
    out: *mut f64,
) -> RelsecStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        let l = p.subchannels.len();
        if out.is_null() {
            return Err(null("out"));
        }
        let modes = modes_from(modes, l)?;
        let alloc = Allocation {
            p1: slice(p1, l, "p1")?.to_vec(),
            p2: slice(p2, l, "p2")?.to_vec(),
            alpha: slice(alpha, l, "alpha")?.to_vec(),
            psi: vec![0.0; l],
        };
        alloc.validate(l, &p.budget, 1.0).map_err(fail)?;
        *out = rates::lower_bound(&p.subchannels, &alloc, &modes, p.bandwidth).map_err(fail)?.value;
        Ok(())
    })
}

/// Upper bound at a fixed allocation.
///
/// # Safety
/// As [`relsec_lower_bound`], with `psi` in place of `modes` and `alpha`.
#[no_mangle]
pub unsafe extern "C" fn relsec_upper_bound(
    problem: *const RelsecProblem,
    p1: *const f64,
    p2: *const f64,
    psi: *const f64,
    out: *mut f64,
) -> RelsecStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        let l = p.subchannels.len();
        if out.is_null() {
            return Err(null("out"));
        }
        let alloc = Allocation {
            p1: slice(p1, l, "p1")?.to_vec(),
            p2: slice(p2, l, "p2")?.to_vec(),
            alpha: vec![1.0; l],
            psi: slice(psi, l, "psi")?.to_vec(),
        };
        alloc.validate(l, &p.budget, 1.0).map_err(fail)?;
        *out = rates::upper_bound(&p.subchannels, &alloc, p.bandwidth).map_err(fail)?.0;
        Ok(())
    })
}

/// Maximizes the lower bound under a fixed partition. `config` may be null
/// for defaults. Any of `out_p1`, `out_p2`, `out_alpha` may be null.
///
/// # Safety
/// `problem` must be a live handle; `modes` valid for `len` reads; non-null
/// output arrays valid for `len` writes; `out_rate` for one write.
#[no_mangle]
pub unsafe extern "C" fn relsec_optimize_lower(
    problem: *const RelsecProblem,
    modes: *const u8,
    config: *const RelsecOptimizerConfig,
    out_rate: *mut f64,
    out_p1: *mut f64,
    out_p2: *mut f64,
    out_alpha: *mut f64,
) -> RelsecStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        if out_rate.is_null() {
            return Err(null("out_rate"));
        }
        let modes = modes_from(modes, p.subchannels.len())?;
        let sol = optimizer::optimize_lower(&p.problem(), &modes, &config_from(config)).map_err(fail)?;
        *out_rate = sol.rate;
        write_out(out_p1, &sol.allocation.p1);
        write_out(out_p2, &sol.allocation.p2);
        write_out(out_alpha, &sol.allocation.alpha);
        Ok(())
    })
}

/// Maximizes the upper bound over powers and correlations.
///
/// # Safety
/// As [`relsec_optimize_lower`] without `modes`.
#[no_mangle]
pub unsafe extern "C" fn relsec_optimize_upper(
    problem: *const RelsecProblem,
    config: *const RelsecOptimizerConfig,
    out_rate: *mut f64,
    out_p1: *mut f64,
    out_p2: *mut f64,
    out_psi: *mut f64,
) -> RelsecStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        if out_rate.is_null() {
            return Err(null("out_rate"));
        }
        let sol = optimizer::optimize_upper(&p.problem(), &config_from(config)).map_err(fail)?;
        *out_rate = sol.rate;
        write_out(out_p1, &sol.allocation.p1);
        write_out(out_p2, &sol.allocation.p2);
        write_out(out_psi, &sol.allocation.psi);
        Ok(())
    })
}

/// Deaf-relay capacity expression and the optimized all-NF lower bound.
///
/// # Safety
/// `problem` must be a live handle; `out_capacity` valid for one write;
/// `out_all_nf_lower` null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn relsec_optimize_deaf_relay(
    problem: *const RelsecProblem,
    config: *const RelsecOptimizerConfig,
    out_capacity: *mut f64,
    out_all_nf_lower: *mut f64,
) -> RelsecStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        if out_capacity.is_null() {
            return Err(null("out_capacity"));
        }
        let d = optimizer::optimize_deaf_relay(&p.problem(), &config_from(config)).map_err(fail)?;
        *out_capacity = d.capacity;
        if !out_all_nf_lower.is_null() {
            *out_all_nf_lower = d.all_nf_lower.rate;
        }
        Ok(())
    })
}
