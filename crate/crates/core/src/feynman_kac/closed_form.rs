//! Exact kernels for duals that decompose into power terms.
//!
//! For `V'(y) = −k·y^{q−1}` every kernel is `k·y^{q−1}` times a function of
//! `λ(q)` and `t`; mixtures are summed term by term.

use crate::dual::{DualUtility, PowerTerm};
use crate::error::{Error, Result};
use crate::market::DerivedParams;

/// Below this `|λt|` the annuity factor switches to its Taylor series.
pub const SERIES_THRESHOLD: f64 = 1e-6;

/// `(e^{λt} − 1)/λ`, equal to `t` at `λ = 0`.
pub fn annuity(lambda: f64, t: f64) -> f64 {
    let z = lambda * t;
    if z.abs() < SERIES_THRESHOLD {
        t * (1.0 + z / 2.0 * (1.0 + z / 3.0 * (1.0 + z / 4.0)))
    } else {
        z.exp_m1() / lambda
    }
}

fn terms(dual: &dyn DualUtility) -> Result<Vec<PowerTerm>> {
    dual.power_terms()
        .ok_or(Error::Undefined("dual has no power-term decomposition"))
}

fn sum_terms(dual: &dyn DualUtility, mut f: impl FnMut(&PowerTerm) -> Result<f64>) -> Result<f64> {
    let mut total = 0.0;
    for term in terms(dual)? {
        total += f(&term)?;
    }
    Ok(total)
}

pub fn terminal_i(dual: &dyn DualUtility, y: f64, t: f64, d: &DerivedParams) -> Result<f64> {
    sum_terms(dual, |p| Ok(p.marginal(y) * (d.rate(p.q) * t).exp()))
}

pub fn terminal_j(dual: &dyn DualUtility, y: f64, t: f64, d: &DerivedParams) -> Result<f64> {
    sum_terms(dual, |p| {
        Ok((1.0 - p.q) * p.marginal(y) * (d.rate(p.q) * t).exp())
    })
}

pub fn consumption_k(dual: &dyn DualUtility, y: f64, t: f64, d: &DerivedParams) -> Result<f64> {
    sum_terms(dual, |p| Ok(p.marginal(y) * annuity(d.rate(p.q), t)))
}

pub fn consumption_jk(dual: &dyn DualUtility, y: f64, t: f64, d: &DerivedParams) -> Result<f64> {
    sum_terms(dual, |p| {
        Ok((1.0 - p.q) * p.marginal(y) * annuity(d.rate(p.q), t))
    })
}

fn decay(p: &PowerTerm, d: &DerivedParams) -> Result<f64> {
    let lambda = d.rate(p.q);
    if lambda < 0.0 {
        Ok(-lambda)
    } else {
        Err(Error::DivergentHorizon {
            exponent: p.q,
            lambda,
        })
    }
}

/// `h(y) = Σ k·y^{q−1}/|λ(q)|`.
pub fn h_infinite(dual: &dyn DualUtility, y: f64, d: &DerivedParams) -> Result<f64> {
    sum_terms(dual, |p| Ok(p.marginal(y) / decay(p, d)?))
}

/// `∫₀^∞ J₂ dτ = −y·h'(y)`.
pub fn horizon_j(dual: &dyn DualUtility, y: f64, d: &DerivedParams) -> Result<f64> {
    sum_terms(dual, |p| Ok((1.0 - p.q) * p.marginal(y) / decay(p, d)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::{NonHaraDual, PowerDual, ZeroDual};
    use crate::market::{derive, MarketParams};

    #[test]
    fn annuity_branches_agree() {
        for lambda in [1e-9_f64, -1e-9, 1e-7, 0.07, -0.03] {
            let t = 5.0;
            let exact = (lambda * t).exp_m1() / lambda;
            assert!((annuity(lambda, t) / exact - 1.0).abs() < 1e-14);
        }
        assert_eq!(annuity(0.0, 5.0), 5.0);
        // Continuity across the threshold.
        let t = 1.0;
        let below = annuity(0.999_999e-6, t);
        let above = annuity(1.000_001e-6, t);
        assert!((above - below).abs() < 1e-11);
    }

    #[test]
    fn examples() {
        let d = derive(&MarketParams::reference(0.02)).unwrap();
        let q2 = PowerDual::unit(-2.0).unwrap();
        let i = terminal_i(&q2, 2.0, 1.0, &d).unwrap();
        assert!((i - 0.07f64.exp() / 8.0).abs() < 1e-14);
        let k = consumption_k(&q2, 1.0, 1.0, &d).unwrap();
        assert!((k - 0.07f64.exp_m1() / 0.07).abs() < 1e-14);
        let q1 = PowerDual::unit(-1.0).unwrap();
        assert!((consumption_k(&q1, 1.0, 5.0, &d).unwrap() - 5.0).abs() < 1e-12);
        assert!((terminal_j(&q1, 1.0, 9.0, &d).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(consumption_k(&ZeroDual, 1.0, 3.0, &d).unwrap(), 0.0);
    }

    #[test]
    fn horizon_kernel() {
        let d = derive(&MarketParams::reference(0.02)).unwrap();
        let p = PowerDual::unit(-1.0 / 3.0).unwrap();
        let h = h_infinite(&p, 2.0, &d).unwrap();
        assert!((h - 2f64.powf(-4.0 / 3.0) / -d.rate(-1.0 / 3.0)).abs() < 1e-14);
        let nh = NonHaraDual::new(0.25).unwrap();
        let h = h_infinite(&nh, 1.0, &d).unwrap();
        let expect = 1.0 / -d.rate(-1.0 / 3.0) + 1.0 / -d.rate(1.0 / 3.0);
        assert!((h / expect - 1.0).abs() < 1e-14);
        let divergent = PowerDual::unit(-2.0).unwrap();
        assert!(matches!(
            h_infinite(&divergent, 1.0, &d),
            Err(Error::DivergentHorizon { .. })
        ));
    }
}
