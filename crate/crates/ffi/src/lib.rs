//! C interface to the `turnpike` library.
//!
//! Markets, dual utilities and problems are opaque heap handles created by
//! `tp_*_new`/`tp_dual_parse` and released by the matching `tp_*_free`.
//! Every fallible call returns a [`TpStatus`] and writes its result through
//! an out-pointer; on failure `tp_last_error` gives a message for the
//! calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use turnpike::dual::{marginal_inverse, parse_dual, SharedDual};
use turnpike::error::Error;
use turnpike::feynman_kac::QuadratureConfig;
use turnpike::harness::output::to_csv;
use turnpike::harness::tables::{run_table, TableOverrides};
use turnpike::market::{DerivedParams, MarketParams, RegimeKind};
use turnpike::strategy::{strategy, Method, ProblemSpec};
use turnpike::turnpike::{limit_strategy, ConsumptionLimit, LimitKind};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TpStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad input: parameters, utility specs, table ids, wealth or horizon.
    InvalidArgument = 2,
    /// Root bracketing, quadrature or overflow failure.
    Numerical = 3,
    Panic = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TpRegimeKind {
    Turnpike = 0,
    NonTurnpike = 1,
    Boundary = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TpLimitKind {
    MertonLinear = 0,
    NonlinearFixedPoint = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TpMethod {
    /// Closed forms for power mixtures, quadrature otherwise.
    Auto = 0,
    Quadrature = 1,
    ClosedForm = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TpDerived {
    pub r: f64,
    pub sigma: f64,
    pub theta: f64,
    pub delta: f64,
    pub alpha: f64,
    pub a: f64,
    pub beta: f64,
    pub q_star: f64,
    pub p_star: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TpRegime {
    pub kind: TpRegimeKind,
    pub q_min: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TpStrategyPoint {
    pub x: f64,
    pub t: f64,
    pub y: f64,
    pub amount: f64,
    pub fraction: f64,
    pub consumption: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TpLimit {
    pub regime: TpRegimeKind,
    pub kind: TpLimitKind,
    pub x: f64,
    pub q_eff: f64,
    pub merton_pi: f64,
    /// NaN for linear limits.
    pub shadow_price: f64,
    pub amount: f64,
    pub fraction: f64,
    /// Limiting consumption level; NaN when consumption only converges
    /// after rescaling, or when there is none.
    pub consumption: f64,
}

pub struct TpMarket {
    params: MarketParams,
    derived: DerivedParams,
}

pub struct TpDual(SharedDual);

pub struct TpProblem(ProblemSpec);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> TpStatus {
    if e.is_numerical() {
        TpStatus::Numerical
    } else {
        TpStatus::InvalidArgument
    }
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), TpStatus>) -> TpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TpStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            TpStatus::Panic
        }
    }
}

fn fail(e: Error) -> TpStatus {
    set_error(&e.to_string());
    status_of(&e)
}

fn null(what: &str) -> TpStatus {
    set_error(&format!("{what} is null"));
    TpStatus::NullPointer
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, TpStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, v: T) -> Result<(), TpStatus> {
    if out.is_null() {
        return Err(null("out"));
    }
    out.write(v);
    Ok(())
}

fn regime_kind(k: RegimeKind) -> TpRegimeKind {
    match k {
        RegimeKind::Turnpike => TpRegimeKind::Turnpike,
        RegimeKind::NonTurnpike => TpRegimeKind::NonTurnpike,
        RegimeKind::Boundary => TpRegimeKind::Boundary,
    }
}

fn new_market(params: MarketParams, out: *mut *mut TpMarket) -> TpStatus {
    guard(|| {
        let derived = params.derive().map_err(fail)?;
        let handle = Box::into_raw(Box::new(TpMarket { params, derived }));
        // SAFETY: the caller passes a writable out-pointer or null.
        unsafe { write(out, handle) }.inspect_err(|_| drop(unsafe { Box::from_raw(handle) }))
    })
}

/// Market from the Sharpe ratio `theta`.
///
/// # Safety
/// `out` must be null or point to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn tp_market_new(r: f64, sigma: f64, theta: f64, delta: f64, out: *mut *mut TpMarket) -> TpStatus {
    new_market(MarketParams::with_theta(r, sigma, theta, delta), out)
}

/// Market from the drift `mu`.
///
/// # Safety
/// As [`tp_market_new`].
#[no_mangle]
pub unsafe extern "C" fn tp_market_new_mu(r: f64, sigma: f64, mu: f64, delta: f64, out: *mut *mut TpMarket) -> TpStatus {
    new_market(MarketParams::with_mu(r, sigma, mu, delta), out)
}

/// # Safety
/// `market` must be null or a handle from `tp_market_new*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tp_market_free(market: *mut TpMarket) {
    if !market.is_null() {
        drop(Box::from_raw(market));
    }
}

/// # Safety
/// `market` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tp_market_derived(market: *const TpMarket, out: *mut TpDerived) -> TpStatus {
    guard(|| {
        let d = deref(market, "market")?.derived;
        write(
            out,
            TpDerived {
                r: d.r,
                sigma: d.sigma,
                theta: d.theta,
                delta: d.delta,
                alpha: d.alpha,
                a: d.a,
                beta: d.beta,
                q_star: d.q_star,
                p_star: d.p_star,
            },
        )
    })
}

/// `λ(q)` for `q ≤ 1`.
///
/// # Safety
/// `market` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tp_market_lambda(market: *const TpMarket, q: f64, out: *mut f64) -> TpStatus {
    guard(|| {
        let m = deref(market, "market")?;
        write(out, m.derived.lambda(q).map_err(fail)?)
    })
}

/// # Safety
/// `market` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tp_classify(market: *const TpMarket, q1: f64, q2: f64, out: *mut TpRegime) -> TpStatus {
    guard(|| {
        let m = deref(market, "market")?;
        let regime = m.derived.classify(q1, q2);
        write(
            out,
            TpRegime {
                kind: regime_kind(regime.kind),
                q_min: regime.q_min,
            },
        )
    })
}

/// Parses `power:q=<v>[,k=<v>]`, `nonhara:p=<v>` or `zero`.
///
/// # Safety
/// `spec` must be null or a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tp_dual_parse(spec: *const c_char, out: *mut *mut TpDual) -> TpStatus {
    guard(|| {
        if spec.is_null() {
            return Err(null("spec"));
        }
        let text = CStr::from_ptr(spec).to_str().map_err(|_| {
            set_error("spec is not valid UTF-8");
            TpStatus::InvalidArgument
        })?;
        let dual = parse_dual(text).map_err(fail)?;
        let handle = Box::into_raw(Box::new(TpDual(dual)));
        write(out, handle).inspect_err(|_| drop(Box::from_raw(handle)))
    })
}

/// # Safety
/// `dual` must be null or a handle from `tp_dual_parse` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tp_dual_free(dual: *mut TpDual) {
    if !dual.is_null() {
        drop(Box::from_raw(dual));
    }
}

/// `y` with `−V'(y) = x`.
///
/// # Safety
/// `dual` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tp_dual_marginal_inverse(dual: *const TpDual, x: f64, out: *mut f64) -> TpStatus {
    guard(|| {
        let d = deref(dual, "dual")?;
        write(out, marginal_inverse(d.0.as_ref(), x).map_err(fail)?)
    })
}

/// Problem with terminal dual `terminal` and consumption dual
/// `consumption`. The problem keeps its own references, so the inputs may
/// be freed afterwards.
///
/// # Safety
/// All handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tp_problem_new(
    terminal: *const TpDual,
    consumption: *const TpDual,
    market: *const TpMarket,
    out: *mut *mut TpProblem,
) -> TpStatus {
    guard(|| {
        let u1 = deref(terminal, "terminal")?.0.clone();
        let u2 = deref(consumption, "consumption")?.0.clone();
        let m = deref(market, "market")?.params;
        let spec = ProblemSpec::new(u1, u2, m).map_err(fail)?;
        let handle = Box::into_raw(Box::new(TpProblem(spec)));
        write(out, handle).inspect_err(|_| drop(Box::from_raw(handle)))
    })
}

/// # Safety
/// `problem` must be null or a handle from `tp_problem_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tp_problem_free(problem: *mut TpProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Optimal strategy at wealth `x` with `t` years to go; `method` is one of
/// the `TpMethod` values.
///
/// # Safety
/// `problem` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tp_optimal_strategy(
    problem: *const TpProblem,
    x: f64,
    t: f64,
    method: u32,
    out: *mut TpStrategyPoint,
) -> TpStatus {
    guard(|| {
        let spec = &deref(problem, "problem")?.0;
        let method = match method {
            m if m == TpMethod::Auto as u32 => Method::Auto,
            m if m == TpMethod::Quadrature as u32 => Method::Quadrature,
            m if m == TpMethod::ClosedForm as u32 => Method::ClosedForm,
            _ => {
                set_error("unknown method");
                return Err(TpStatus::InvalidArgument);
            }
        };
        let p = strategy(spec, x, t, method, &QuadratureConfig::default()).map_err(fail)?;
        write(
            out,
            TpStrategyPoint {
                x: p.x,
                t: p.t,
                y: p.y,
                amount: p.amount,
                fraction: p.fraction,
                consumption: p.consumption,
            },
        )
    })
}

/// Limiting strategy as the horizon grows.
///
/// # Safety
/// `problem` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tp_limit_strategy(problem: *const TpProblem, x: f64, out: *mut TpLimit) -> TpStatus {
    guard(|| {
        let spec = &deref(problem, "problem")?.0;
        let l = limit_strategy(spec, x, &QuadratureConfig::default()).map_err(fail)?;
        write(
            out,
            TpLimit {
                regime: regime_kind(l.regime.kind),
                kind: match l.kind {
                    LimitKind::MertonLinear => TpLimitKind::MertonLinear,
                    LimitKind::NonlinearFixedPoint => TpLimitKind::NonlinearFixedPoint,
                },
                x: l.x,
                q_eff: l.q_eff,
                merton_pi: l.merton_pi,
                shadow_price: l.shadow_price.unwrap_or(f64::NAN),
                amount: l.amount,
                fraction: l.fraction(),
                consumption: match l.consumption {
                    ConsumptionLimit::Level(c) => c,
                    _ => f64::NAN,
                },
            },
        )
    })
}

/// Reference table `id` (1 to 5) as CSV with `precision` decimals. Release
/// the string with `tp_string_free`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_table_csv(id: u32, precision: u32, out: *mut *mut c_char) -> TpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if !(4..=12).contains(&precision) {
            set_error("precision must lie in [4, 12]");
            return Err(TpStatus::InvalidArgument);
        }
        let rows = run_table(id, &TableOverrides::default(), 0).map_err(fail)?;
        let csv = to_csv(&rows, precision as usize).map_err(fail)?;
        let c = CString::new(csv).map_err(|_| {
            set_error("table contains a NUL byte");
            TpStatus::Panic
        })?;
        write(out, c.into_raw())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failed call on this thread, empty after a success.
/// Valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn tp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}
