//! Market constants, the quadratic rate function `λ(q)`, the threshold `q*`
//! and the turnpike regime classification.
//!
//! The Black–Scholes market has a riskless rate `r`, one risky asset with
//! volatility `sigma` and Sharpe ratio `theta = (mu - r)/sigma`, and the
//! investor discounts utility at rate `delta`. Every kernel of the dual
//! representation grows or decays like `exp(λ(q) t)` for a dual exponent
//! `q`, and the unique negative root `q*` of `λ` separates the regimes.

/// Absolute tolerance used when both `mu` and `theta` are supplied.
pub const SHARPE_CONSISTENCY_TOL: f64 = 1e-12;

/// Default tolerance for deciding `q_i = q*`.
pub const DEFAULT_THRESHOLD_TOL: f64 = 1e-12;

use crate::error::{Error, Result};

/// Raw market inputs. Exactly one of `mu` and `theta` may be omitted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    pub r: f64,
    pub sigma: f64,
    pub mu: Option<f64>,
    pub theta: Option<f64>,
    pub delta: f64,
}

impl MarketParams {
    pub fn with_theta(r: f64, sigma: f64, theta: f64, delta: f64) -> Self {
        Self {
            r,
            sigma,
            mu: None,
            theta: Some(theta),
            delta,
        }
    }

    pub fn with_mu(r: f64, sigma: f64, mu: f64, delta: f64) -> Self {
        Self {
            r,
            sigma,
            mu: Some(mu),
            theta: None,
            delta,
        }
    }

    /// The market used throughout the reference tables: `theta = sigma = 0.2`
    /// and `delta = 0.02 + r/2`, which puts the threshold at `q* = -1`.
    pub fn reference(r: f64) -> Self {
        Self::with_theta(r, 0.2, 0.2, 0.02 + 0.5 * r)
    }

    /// Sharpe ratio, preferring `theta` when both inputs are present.
    pub fn sharpe(&self) -> Result<f64> {
        match (self.theta, self.mu) {
            (Some(theta), Some(mu)) => {
                let implied = (mu - self.r) / self.sigma;
                if (theta - implied).abs() > SHARPE_CONSISTENCY_TOL * theta.abs().max(1.0) {
                    return Err(Error::InconsistentSharpe { theta, implied });
                }
                Ok(theta)
            }
            (Some(theta), None) => Ok(theta),
            (None, Some(mu)) => Ok((mu - self.r) / self.sigma),
            (None, None) => Err(Error::MissingSharpe),
        }
    }

    pub fn derive(&self) -> Result<DerivedParams> {
        derive(self)
    }
}

/// Quantities derived from [`MarketParams`]; everything downstream works
/// with this type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    pub r: f64,
    pub sigma: f64,
    pub delta: f64,
    pub theta: f64,
    pub alpha: f64,
    pub a: f64,
    pub beta: f64,
    pub q_star: f64,
    pub p_star: f64,
}

impl DerivedParams {
    /// `λ(q) = ½θ²q(q−1) − rq + δ(q−1)`, evaluated without a domain check.
    #[inline]
    pub fn rate(&self, q: f64) -> f64 {
        0.5 * self.theta * self.theta * q * (q - 1.0) - self.r * q + self.delta * (q - 1.0)
    }

    /// The same quadratic in vertex form, `β + (α − q)²a²`.
    #[inline]
    pub fn rate_vertex_form(&self, q: f64) -> f64 {
        let d = self.alpha - q;
        self.beta + d * d * self.a * self.a
    }

    /// `θ/σ`, the factor turning `y v_yy` into a risky amount.
    #[inline]
    pub fn theta_over_sigma(&self) -> f64 {
        self.theta / self.sigma
    }

    /// Merton fraction `(θ/σ)(1 − q)` for a power dual with exponent `q`.
    #[inline]
    pub fn merton_fraction(&self, q: f64) -> f64 {
        self.theta_over_sigma() * (1.0 - q)
    }

    pub fn lambda(&self, q: f64) -> Result<f64> {
        lambda_of(self, q)
    }

    pub fn classify(&self, q1: f64, q2: f64) -> Regime {
        classify(q1, q2, self)
    }
}

pub fn derive(params: &MarketParams) -> Result<DerivedParams> {
    let MarketParams { r, sigma, delta, .. } = *params;
    check_positive("r", r)?;
    check_positive("sigma", sigma)?;
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidMarket {
            name: "delta",
            value: delta,
            reason: "must be positive; q* is only unique when lambda(0) = -delta < 0",
        });
    }
    let theta = params.sharpe()?;
    if theta == 0.0 || !theta.is_finite() {
        return Err(Error::InvalidMarket {
            name: "theta",
            value: theta,
            reason: "must be finite and nonzero",
        });
    }
    let theta2 = theta * theta;
    let alpha = 0.5 + (r - delta) / theta2;
    let a = theta / std::f64::consts::SQRT_2;
    let beta = -a * a * alpha * alpha - delta;
    let q_star = threshold(alpha, delta, theta);
    Ok(DerivedParams {
        r,
        sigma,
        delta,
        theta,
        alpha,
        a,
        beta,
        q_star,
        p_star: q_star / (q_star - 1.0),
    })
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidMarket {
            name,
            value,
            reason: "must be positive and finite",
        })
    }
}

// α − √(α² + 2δ/θ²), rationalised when α > 0 to avoid cancellation as δ → 0.
fn threshold(alpha: f64, delta: f64, theta: f64) -> f64 {
    let c = 2.0 * delta / (theta * theta);
    let root = (alpha * alpha + c).sqrt();
    if alpha > 0.0 {
        -c / (alpha + root)
    } else {
        alpha - root
    }
}

/// `λ(q)`; the quadratic is only meaningful for `q ≤ 1` (`λ(1) = −r`).
pub fn lambda_of(derived: &DerivedParams, q: f64) -> Result<f64> {
    if !(q <= 1.0) {
        return Err(Error::InvalidArgument {
            name: "q",
            value: q,
            reason: "dual exponent must not exceed 1",
        });
    }
    Ok(derived.rate(q))
}

/// The threshold `q*`, recomputed from the derived constants.
pub fn q_star(derived: &DerivedParams) -> f64 {
    threshold(derived.alpha, derived.delta, derived.theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegimeKind {
    /// `q1 < q*` or `q2 ≤ q*`: the amount invested becomes linear in wealth.
    Turnpike,
    /// `q1 > q*` and `q2 > q*`.
    NonTurnpike,
    /// `q1 = q*` and `q2 > q*`.
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RateClass {
    Exponential,
    Polynomial,
    Unspecified,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regime {
    pub kind: RegimeKind,
    pub q_min: f64,
    pub rate_class: RateClass,
}

pub fn classify(q1: f64, q2: f64, derived: &DerivedParams) -> Regime {
    classify_with_tol(q1, q2, derived.q_star, DEFAULT_THRESHOLD_TOL)
}

/// Regime classification against an explicit threshold. Infinite exponents
/// are allowed and stand for an absent utility.
pub fn classify_with_tol(q1: f64, q2: f64, q_star: f64, tol: f64) -> Regime {
    let below = |q: f64| q < q_star - tol;
    let at = |q: f64| (q - q_star).abs() <= tol;
    let above = |q: f64| q > q_star + tol;

    let kind = if below(q1) || below(q2) || at(q2) {
        RegimeKind::Turnpike
    } else if at(q1) && above(q2) {
        RegimeKind::Boundary
    } else {
        debug_assert!(above(q1) && above(q2));
        RegimeKind::NonTurnpike
    };
    let rate_class = if below(q1) || below(q2) {
        RateClass::Exponential
    } else if at(q2) {
        RateClass::Polynomial
    } else {
        RateClass::Unspecified
    };
    Regime {
        kind,
        q_min: q1.min(q2),
        rate_class,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_market(r: f64, delta: f64) -> DerivedParams {
        MarketParams::with_theta(r, 0.2, 0.2, delta).derive().unwrap()
    }

    #[test]
    fn reference_markets_have_threshold_minus_one() {
        let d = reference_market(0.02, 0.03);
        assert!((d.alpha - 0.25).abs() < 1e-15);
        assert!((d.q_star + 1.0).abs() < 1e-12);
        assert!((d.p_star - 0.5).abs() < 1e-12);
        for r in [0.06, 0.10] {
            let d = MarketParams::reference(r).derive().unwrap();
            assert!((d.q_star + 1.0).abs() < 1e-12, "r = {r}: {}", d.q_star);
            assert!(d.rate(d.q_star).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_rates_give_alpha_half() {
        let d = reference_market(0.04, 0.04);
        assert_eq!(d.alpha, 0.5);
    }

    #[test]
    fn lambda_values() {
        let d = reference_market(0.02, 0.03);
        assert_eq!(d.lambda(0.0).unwrap(), -0.03);
        assert!((d.lambda(1.0).unwrap() + 0.02).abs() < 1e-16);
        assert!((d.lambda(-2.0).unwrap() - 0.07).abs() < 1e-15);
        for r in [0.02, 0.06, 0.10] {
            let d = MarketParams::reference(r).derive().unwrap();
            assert!((d.rate(-3.0) - (0.16 + r)).abs() < 1e-14);
        }
        assert!(d.lambda(1.5).is_err());
    }

    #[test]
    fn threshold_is_a_root_off_the_reference_market() {
        let d = reference_market(0.02, 0.05);
        assert!(d.q_star < 0.0);
        assert!(d.rate(d.q_star).abs() < 1e-12);
        assert_eq!(q_star(&d), d.q_star);
    }

    #[test]
    fn threshold_tends_to_zero_with_discount() {
        let d = reference_market(0.05, 1e-9);
        assert!(d.q_star < 0.0 && d.q_star > -1e-6, "{}", d.q_star);
        assert!(d.rate(d.q_star).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(MarketParams::with_theta(0.0, 0.2, 0.2, 0.03).derive().is_err());
        assert!(MarketParams::with_theta(0.02, -0.2, 0.2, 0.03).derive().is_err());
        assert!(matches!(
            MarketParams::with_theta(0.02, 0.2, 0.2, 0.0).derive(),
            Err(Error::InvalidMarket { name: "delta", .. })
        ));
        let both = MarketParams {
            r: 0.02,
            sigma: 0.2,
            mu: Some(0.07),
            theta: Some(0.2),
            delta: 0.03,
        };
        assert!(matches!(both.derive(), Err(Error::InconsistentSharpe { .. })));
        let none = MarketParams {
            mu: None,
            theta: None,
            ..both
        };
        assert_eq!(none.derive(), Err(Error::MissingSharpe));
    }

    #[test]
    fn mu_and_theta_inputs_agree() {
        let a = MarketParams::with_theta(0.02, 0.2, 0.2, 0.03).derive().unwrap();
        let b = MarketParams::with_mu(0.02, 0.2, 0.06, 0.03).derive().unwrap();
        let c = MarketParams {
            mu: Some(0.06),
            ..MarketParams::with_theta(0.02, 0.2, 0.2, 0.03)
        }
        .derive()
        .unwrap();
        assert!((a.q_star - b.q_star).abs() < 1e-12);
        assert_eq!(a, c);
        for (q1, q2) in [(-0.5, -2.0), (-1.0 / 3.0, -1.0 / 3.0), (-0.5, -0.25)] {
            assert_eq!(a.classify(q1, q2).kind, b.classify(q1, q2).kind);
        }
    }

    #[test]
    fn classification_examples() {
        let d = reference_market(0.02, 0.03);
        let reg = d.classify(-0.5, -2.0);
        assert_eq!(reg.kind, RegimeKind::Turnpike);
        assert_eq!(reg.q_min, -2.0);
        assert_eq!(reg.rate_class, RateClass::Exponential);

        let reg = d.classify(-1.0 / 3.0, -1.0 / 3.0);
        assert_eq!(reg.kind, RegimeKind::NonTurnpike);
        assert_eq!(reg.rate_class, RateClass::Unspecified);

        let reg = d.classify(d.q_star, d.q_star + 0.5);
        assert_eq!(reg.kind, RegimeKind::Boundary);

        let reg = d.classify(-0.5, d.q_star);
        assert_eq!(reg.kind, RegimeKind::Turnpike);
        assert_eq!(reg.rate_class, RateClass::Polynomial);
    }

    #[test]
    fn classification_tolerance_is_configurable() {
        let reg = classify_with_tol(-1.0 + 1e-9, -0.5, -1.0, 1e-12);
        assert_eq!(reg.kind, RegimeKind::NonTurnpike);
        let reg = classify_with_tol(-1.0 + 1e-9, -0.5, -1.0, 1e-8);
        assert_eq!(reg.kind, RegimeKind::Boundary);
    }
}
