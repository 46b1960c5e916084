//! Root finder for strictly decreasing positive maps `y ↦ F(y)` on `y > 0`.
//!
//! Every equation solved in this crate (the budget constraint, the
//! infinite-horizon fixed point, the marginal-utility inverse) has this shape,
//! and the natural derivative available is the elasticity-like quantity
//! `D(y) = −y F'(y) > 0`. The search runs in `ℓ = ln y`: geometric bracket
//! expansion from `start`, then bisection in `ℓ` with Newton steps on
//! `ln F(e^ℓ) − ln x` taken only when they land strictly inside the bracket
//! and keep shrinking the residual.

use std::cell::Cell;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootOptions {
    /// First trial point.
    pub start: f64,
    /// Multiplicative bracket growth factor (> 1).
    pub growth: f64,
    pub max_expansions: usize,
    /// Stop when the bracket is this narrow in `ln y` (relative width in `y`).
    pub rel_width: f64,
    /// Stop when `|F(y)/x − 1|` falls below this.
    pub rel_residual: f64,
    pub max_iter: usize,
    pub newton: bool,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            start: 1.0,
            growth: 2.0,
            max_expansions: 200,
            rel_width: 1e-12,
            rel_residual: 1e-15,
            max_iter: 400,
            newton: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub y: f64,
    /// `F(y)` at the returned point.
    pub value: f64,
    /// `D(y) = −y F'(y)` at the returned point (NaN when not supplied).
    pub slope: f64,
    /// Final bracket in `y`.
    pub lo: f64,
    pub hi: f64,
    pub evaluations: usize,
}

impl Root {
    pub fn rel_residual(&self, target: f64) -> f64 {
        (self.value - target).abs() / target
    }
}

#[derive(Clone, Copy)]
struct Sample {
    l: f64,
    v: f64,
    d: f64,
}

impl Sample {
    fn log_gap(&self, ln_target: f64) -> f64 {
        if self.v > 0.0 {
            (self.v.ln() - ln_target).abs()
        } else {
            f64::INFINITY
        }
    }
}

/// Solves `F(y) = target` where `f(y)` returns `(F(y), −y F'(y))`.
pub fn solve_decreasing<F>(mut f: F, target: f64, opts: &RootOptions) -> Result<Root>
where
    F: FnMut(f64) -> (f64, f64),
{
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::InvalidArgument {
            name: "target",
            value: target,
            reason: "must be positive and finite",
        });
    }
    if !(opts.growth > 1.0) || !(opts.start > 0.0) {
        return Err(Error::InvalidConfig("bracket growth must exceed 1 and start must be positive"));
    }
    let ln_target = target.ln();
    let evaluations = Cell::new(0usize);
    let mut eval = |l: f64| -> Result<Sample> {
        evaluations.set(evaluations.get() + 1);
        let y = l.exp();
        let (v, d) = f(y);
        if v.is_nan() {
            return Err(Error::NonFinite { y, value: v });
        }
        Ok(Sample { l, v, d })
    };

    let step = opts.growth.ln();
    let first = eval(opts.start.ln())?;
    let mut best = first;
    // Invariant: F(lo) > target > F(hi).
    let (mut lo, mut hi);
    if first.v == target {
        return Ok(finish(first, first.l, first.l, evaluations.get()));
    } else if first.v > target {
        lo = first;
        let mut expansions = 0;
        loop {
            if expansions == opts.max_expansions {
                return Err(Error::Bracket {
                    lo: lo.l.exp(),
                    hi: f64::INFINITY,
                    expansions,
                });
            }
            expansions += 1;
            let s = eval(lo.l + step)?;
            if s.v <= target {
                hi = s;
                break;
            }
            lo = s;
        }
    } else {
        hi = first;
        let mut expansions = 0;
        loop {
            if expansions == opts.max_expansions {
                return Err(Error::Bracket {
                    lo: 0.0,
                    hi: hi.l.exp(),
                    expansions,
                });
            }
            expansions += 1;
            let s = eval(hi.l - step)?;
            if s.v >= target {
                lo = s;
                break;
            }
            hi = s;
        }
    }
    for s in [lo, hi] {
        if s.log_gap(ln_target) < best.log_gap(ln_target) {
            best = s;
        }
    }
    if best.v == target {
        return Ok(finish(best, lo.l, hi.l, evaluations.get()));
    }

    let mut current = best;
    let mut last_gap = f64::INFINITY;
    for _ in 0..opts.max_iter {
        if hi.l - lo.l <= opts.rel_width
            || (best.v - target).abs() <= opts.rel_residual * target
        {
            return Ok(finish(best, lo.l, hi.l, evaluations.get()));
        }
        let gap = current.log_gap(ln_target);
        let newton = if opts.newton
            && current.v > 0.0
            && current.v.is_finite()
            && current.d.is_finite()
            && current.d > 0.0
            && gap < 0.5 * last_gap
        {
            current.l + (current.v.ln() - ln_target) * current.v / current.d
        } else {
            f64::NAN
        };
        last_gap = gap;
        let next = if newton.is_finite() && newton > lo.l && newton < hi.l {
            newton
        } else {
            last_gap = f64::INFINITY;
            0.5 * (lo.l + hi.l)
        };
        if next == current.l {
            // Newton has converged to machine precision.
            return Ok(finish(best, lo.l, hi.l, evaluations.get()));
        }
        let s = eval(next)?;
        if s.v > target {
            lo = s;
        } else if s.v < target {
            hi = s;
        } else {
            return Ok(finish(s, s.l, s.l, evaluations.get()));
        }
        if s.log_gap(ln_target) <= best.log_gap(ln_target) {
            best = s;
        }
        current = s;
    }
    Err(Error::RootNonConvergence {
        lo: lo.l.exp(),
        hi: hi.l.exp(),
    })
}

fn finish(s: Sample, lo: f64, hi: f64, evaluations: usize) -> Root {
    Root {
        y: s.l.exp(),
        value: s.v,
        slope: s.d,
        lo: lo.exp(),
        hi: hi.exp(),
        evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_inverse() {
        // F(y) = y^{-2}, root of F = 0.25 is y = 2.
        let root = solve_decreasing(|y| (y.powi(-2), 2.0 * y.powi(-2)), 0.25, &RootOptions::default())
            .unwrap();
        assert!((root.y - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bisection_only_still_converges() {
        let opts = RootOptions {
            newton: false,
            ..Default::default()
        };
        let f = |y: f64| (3.0 * y.powf(-1.5) + y.powf(-0.5), f64::NAN);
        let root = solve_decreasing(f, 10.0, &opts).unwrap();
        assert!(root.rel_residual(10.0) < 1e-11);
        assert!(root.hi / root.lo - 1.0 <= 2e-12);
    }

    #[test]
    fn bracket_expansion_downwards() {
        let root = solve_decreasing(|y| (1.0 / y, 1.0 / y), 1e30, &RootOptions::default()).unwrap();
        assert!((root.y * 1e30 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reports_failed_bracket() {
        let err = solve_decreasing(|_| (1.0, 0.0), 2.0, &RootOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Bracket { expansions: 200, .. }));
    }

    #[test]
    fn bad_slope_falls_back_to_bisection() {
        // Deliberately wrong derivative: Newton proposals leave the bracket.
        let f = |y: f64| (y.powf(-3.0), 1e-9);
        let root = solve_decreasing(f, 5.0, &RootOptions::default()).unwrap();
        assert!(root.rel_residual(5.0) < 1e-10);
    }
}
