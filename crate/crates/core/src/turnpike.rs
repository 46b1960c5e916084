//! Long-horizon limits of the optimal strategy, the scaling functions
//! `R(t)` and `E(t)`, relative errors against the limits and the empirical
//! convergence-rate estimator.

use crate::dual::{DualUtility, NonHaraDual};
use crate::error::{Error, Result};
use crate::feynman_kac::{annuity, closed_form, BudgetKernels, QuadratureConfig};
use crate::market::{DerivedParams, Regime, RegimeKind};
use crate::roots::{solve_decreasing, RootOptions};
use crate::strategy::{ProblemSpec, StrategyPoint};

/// `R(t)`: `e^{λ₁t} + (e^{λ₂t}−1)/λ₂` when `q1 = q2`,
/// `e^{((q₂−1)/(q₁−1))λ₁t}` when `q1 < q2`, `(e^{λ₂t}−1)/λ₂` when `q1 > q2`.
pub fn r_of_t(q1: f64, q2: f64, d: &DerivedParams, t: f64) -> f64 {
    let (l1, l2) = (d.rate(q1), d.rate(q2));
    if q1 == q2 {
        (l1 * t).exp() + annuity(l2, t)
    } else if q1 < q2 {
        ((q2 - 1.0) / (q1 - 1.0) * l1 * t).exp()
    } else {
        annuity(l2, t)
    }
}

/// `E(t) = (e^{λ₁t} + (e^{λ₂t}−1)/λ₂)^{−1}`.
pub fn e_of_t(q1: f64, q2: f64, d: &DerivedParams, t: f64) -> f64 {
    1.0 / ((d.rate(q1) * t).exp() + annuity(d.rate(q2), t))
}

/// Regime of a problem together with the exponents used to decide it.
/// An absent utility is represented by an infinite exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemRegime {
    pub regime: Regime,
    pub q1: f64,
    pub q2: f64,
}

fn exponent_at_zero(dual: &dyn DualUtility) -> Result<f64> {
    if dual.is_zero() {
        Ok(f64::INFINITY)
    } else {
        dual.q0().ok_or(Error::UndeclaredExponent { end: "zero" })
    }
}

pub fn classify_problem(spec: &ProblemSpec) -> Result<ProblemRegime> {
    let q1 = exponent_at_zero(spec.terminal.as_ref())?;
    let q2 = exponent_at_zero(spec.consumption.as_ref())?;
    let mut regime = spec.derived().classify(q1, q2);
    if spec.consumption.is_zero() {
        // Without consumption the amount invested always tends to the
        // Merton rule of the terminal utility.
        regime.kind = RegimeKind::Turnpike;
    }
    Ok(ProblemRegime { regime, q1, q2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitKind {
    MertonLinear,
    NonlinearFixedPoint,
}

/// Consumption in the turnpike regime tends to zero; what converges is
/// `R̂(t)^{exponent}·C(x,t) → limit`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsumptionScaling {
    /// `(q̂−1)/(q₂−1)`.
    pub exponent: f64,
    pub limit: f64,
    pub q1: f64,
    pub q2: f64,
    pub q_hat: f64,
    pub k1: f64,
    pub k2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl ConsumptionScaling {
    /// `R̂(t)`, which reduces to `R(t)` for unit scales.
    pub fn r_hat(&self, t: f64) -> f64 {
        let terminal = self.k1 * (self.lambda1 * t).exp();
        let running = self.k2 * annuity(self.lambda2, t);
        if self.q1 == self.q2 {
            terminal + running
        } else if self.q1 < self.q2 {
            terminal.powf((self.q2 - 1.0) / (self.q1 - 1.0))
        } else {
            running
        }
    }

    /// `R̂(t)^{exponent}`.
    pub fn factor(&self, t: f64) -> f64 {
        self.r_hat(t).powf(self.exponent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConsumptionLimit {
    /// No consumption utility.
    None,
    /// `C(x,t) → level`.
    Level(f64),
    Scaled(ConsumptionScaling),
    /// Turnpike regime, but the consumption dual declares no exponent at
    /// infinity.
    Unavailable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurnpikeLimit {
    pub regime: Regime,
    pub kind: LimitKind,
    pub x: f64,
    /// Exponent of the reference Merton rule.
    pub q_eff: f64,
    /// `(θ/σ)(1 − q_eff)`.
    pub merton_pi: f64,
    /// Fixed-point shadow price `Y` (nonlinear limits only).
    pub shadow_price: Option<f64>,
    /// Limiting amount `A_∞(x)`.
    pub amount: f64,
    pub consumption: ConsumptionLimit,
}

impl TurnpikeLimit {
    pub fn fraction(&self) -> f64 {
        self.amount / self.x
    }
}

/// How `h` and `∫J₂` are evaluated in the fixed-point equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HorizonMethod {
    /// Closed form for power mixtures, quadrature otherwise.
    #[default]
    Auto,
    Quadrature,
}

fn check_wealth(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument {
            name: "x",
            value: x,
            reason: "wealth must be positive",
        })
    }
}

/// Limiting strategy as the horizon grows, chosen by regime.
pub fn limit_strategy(spec: &ProblemSpec, x: f64, cfg: &QuadratureConfig) -> Result<TurnpikeLimit> {
    check_wealth(x)?;
    let pr = classify_problem(spec)?;
    let d = spec.derived();
    let u2 = spec.consumption.as_ref();
    match pr.regime.kind {
        RegimeKind::Turnpike => {
            let q_eff = pr.q1.min(pr.q2);
            let merton_pi = d.merton_fraction(q_eff);
            Ok(TurnpikeLimit {
                regime: pr.regime,
                kind: LimitKind::MertonLinear,
                x,
                q_eff,
                merton_pi,
                shadow_price: None,
                amount: merton_pi * x,
                consumption: turnpike_consumption(spec, &pr, x),
            })
        }
        RegimeKind::NonTurnpike if single_power(u2).is_some() => {
            let q2 = pr.q2;
            let merton_pi = d.merton_fraction(q2);
            Ok(TurnpikeLimit {
                regime: pr.regime,
                kind: LimitKind::MertonLinear,
                x,
                q_eff: q2,
                merton_pi,
                shadow_price: None,
                amount: merton_pi * x,
                consumption: ConsumptionLimit::Level(-d.rate(q2) * x),
            })
        }
        _ => fixed_point_limit(spec, x, cfg, HorizonMethod::Auto),
    }
}

fn single_power(dual: &dyn DualUtility) -> Option<f64> {
    match dual.power_terms()?.as_slice() {
        [p] => Some(p.q),
        _ => None,
    }
}

fn turnpike_consumption(spec: &ProblemSpec, pr: &ProblemRegime, x: f64) -> ConsumptionLimit {
    let u2 = spec.consumption.as_ref();
    if u2.is_zero() {
        return ConsumptionLimit::None;
    }
    let Some(q_hat) = u2.q_inf() else {
        return ConsumptionLimit::Unavailable;
    };
    let d = spec.derived();
    let q_min = pr.q1.min(pr.q2);
    let k1 = if spec.terminal.is_zero() { 0.0 } else { spec.terminal.k0() };
    let c = (q_hat - 1.0) / (q_min - 1.0);
    ConsumptionLimit::Scaled(ConsumptionScaling {
        exponent: (q_hat - 1.0) / (pr.q2 - 1.0),
        limit: u2.k_inf() * x.powf(c),
        q1: pr.q1,
        q2: pr.q2,
        q_hat,
        k1,
        k2: u2.k0(),
        lambda1: if pr.q1.is_finite() { d.rate(pr.q1) } else { 0.0 },
        lambda2: d.rate(pr.q2),
    })
}

/// Nonlinear limit: `Y` solves `x = k₁Y^{q₁−1}·1{q1=q*} + h(Y)`, then
/// `A_∞ = (θ/σ)[(1−q₁)k₁Y^{q₁−1}·1{q1=q*} + ∫₀^∞J₂(Y,τ)dτ]` and
/// `C_∞ = −V₂'(Y)`. Valid in the non-turnpike and boundary regimes.
pub fn fixed_point_limit(
    spec: &ProblemSpec,
    x: f64,
    cfg: &QuadratureConfig,
    method: HorizonMethod,
) -> Result<TurnpikeLimit> {
    check_wealth(x)?;
    let pr = classify_problem(spec)?;
    if pr.regime.kind == RegimeKind::Turnpike {
        return Err(Error::Undefined("fixed-point limit requires q1 >= q* and q2 > q*"));
    }
    let d = spec.derived();
    let u2 = spec.consumption.as_ref();
    let boundary = pr.regime.kind == RegimeKind::Boundary;
    let (q1, k1) = (pr.q1, spec.terminal.k0());
    let closed = method == HorizonMethod::Auto && u2.power_terms().is_some();
    let kernels = if closed {
        None
    } else {
        Some(BudgetKernels::horizon(u2, d, cfg)?)
    };
    let horizon = |y: f64| -> Result<(f64, f64)> {
        match &kernels {
            Some(k) => {
                let v = k.eval(y);
                Ok((v.k, v.jk))
            }
            None => Ok((closed_form::h_infinite(u2, y, d)?, closed_form::horizon_j(u2, y, d)?)),
        }
    };
    // Surface divergence before the root search swallows it.
    horizon(1.0)?;
    let terminal = |y: f64| if boundary { k1 * y.powf(q1 - 1.0) } else { 0.0 };
    let root = solve_decreasing(
        |y| match horizon(y) {
            Ok((h, hj)) => {
                let t = terminal(y);
                (t + h, (1.0 - q1) * t + hj)
            }
            Err(_) => (f64::NAN, f64::NAN),
        },
        x,
        &RootOptions {
            growth: cfg.bracket_growth,
            ..RootOptions::default()
        },
    )?;
    let y = root.y;
    let (_, hj) = horizon(y)?;
    let amount = d.theta_over_sigma() * ((1.0 - q1) * terminal(y) + hj);
    let q_eff = q1.min(pr.q2);
    Ok(TurnpikeLimit {
        regime: pr.regime,
        kind: LimitKind::NonlinearFixedPoint,
        x,
        q_eff,
        merton_pi: d.merton_fraction(q_eff),
        shadow_price: Some(y),
        amount,
        consumption: ConsumptionLimit::Level(-u2.vp(y)),
    })
}

/// Closed-form limit for a power terminal utility with exponent
/// `q = p/(p−1)` and non-HARA consumption with parameter `p`:
/// `Z = 2x/(√(1/λ̄² − 4x/λ) − 1/λ̄)`, `A_∞ = (θ/σ)(1−q)(x + Z/(2λ̄))`,
/// `C_∞ = Z² + Z`, with `λ = λ(q)`, `λ̄ = λ(q̄)`.
pub fn nonhara_consumption_limit(p: f64, d: &DerivedParams, x: f64) -> Result<TurnpikeLimit> {
    check_wealth(x)?;
    let dual = NonHaraDual::new(p)?;
    let (q, qb) = (dual.q(), dual.q_bar());
    let (l, lb) = (d.rate(q), d.rate(qb));
    for (exponent, lambda) in [(q, l), (qb, lb)] {
        if lambda >= 0.0 {
            return Err(Error::DivergentHorizon { exponent, lambda });
        }
    }
    let z = 2.0 * x / ((1.0 / (lb * lb) - 4.0 * x / l).sqrt() - 1.0 / lb);
    let regime = d.classify(q, q);
    Ok(TurnpikeLimit {
        regime,
        kind: LimitKind::NonlinearFixedPoint,
        x,
        q_eff: q,
        merton_pi: d.merton_fraction(q),
        shadow_price: Some(z.powf(1.0 / (qb - 1.0))),
        amount: d.theta_over_sigma() * (1.0 - q) * (x + z / (2.0 * lb)),
        consumption: ConsumptionLimit::Level(z * z + z),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeErrors {
    /// `π_M/π* − 1`.
    pub e_merton: f64,
    /// `A_∞(x)/(xπ*) − 1`.
    pub e_limit: f64,
    /// Consumption error: `limit/(R̂(t)^{κ}C) − 1` in the turnpike regime,
    /// `C_∞/C − 1` otherwise; absent without consumption.
    pub f: Option<f64>,
    /// `|π* − π_M|`.
    pub abs_err: f64,
}

pub fn relative_errors(point: &StrategyPoint, limit: &TurnpikeLimit) -> Result<RelativeErrors> {
    if !(point.fraction > 0.0) {
        return Err(Error::InvalidArgument {
            name: "pi",
            value: point.fraction,
            reason: "relative errors need a positive fraction",
        });
    }
    let pi = point.fraction;
    let f = if point.consumption > 0.0 {
        match limit.consumption {
            ConsumptionLimit::Scaled(s) => Some(s.limit / (s.factor(point.t) * point.consumption) - 1.0),
            ConsumptionLimit::Level(c) => Some(c / point.consumption - 1.0),
            ConsumptionLimit::None | ConsumptionLimit::Unavailable => None,
        }
    } else {
        None
    };
    Ok(RelativeErrors {
        e_merton: limit.merton_pi / pi - 1.0,
        e_limit: limit.amount / (point.x * pi) - 1.0,
        f,
        abs_err: (pi - limit.merton_pi).abs(),
    })
}

/// Errors `eₙ` observed at times `tₙ` with the gaps used by the rate
/// estimator; by default the gap is the time distance `tₙ₊₁ − tₙ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries {
    times: Vec<f64>,
    errors: Vec<f64>,
    gaps: Vec<f64>,
}

impl ErrorSeries {
    pub fn new(times: Vec<f64>, errors: Vec<f64>) -> Result<Self> {
        let gaps = times.windows(2).map(|w| w[1] - w[0]).collect();
        Self::with_gaps(times, errors, gaps)
    }

    pub fn with_gaps(times: Vec<f64>, errors: Vec<f64>, gaps: Vec<f64>) -> Result<Self> {
        if times.len() != errors.len() || gaps.len() + 1 != times.len().max(1) {
            return Err(Error::Undefined("error series lengths are inconsistent"));
        }
        if !times.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Undefined("error series times must be strictly increasing"));
        }
        if gaps.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::Undefined("error series gaps must be positive"));
        }
        Ok(Self { times, errors, gaps })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn errors(&self) -> &[f64] {
        &self.errors
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }
}

/// `cₙ₊₁ = −ln(|eₙ₊₁|/|eₙ|)/mₙ`, aligned with `times`; the first entry and
/// any entry next to a zero error are `None`.
pub fn convergence_rates(series: &ErrorSeries) -> Vec<Option<f64>> {
    let e = &series.errors;
    let mut rates = Vec::with_capacity(e.len());
    if e.is_empty() {
        return rates;
    }
    rates.push(None);
    for n in 0..e.len() - 1 {
        let (a, b) = (e[n].abs(), e[n + 1].abs());
        rates.push(if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() {
            Some(-(b / a).ln() / series.gaps[n])
        } else {
            None
        });
    }
    rates
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::dual::{PowerDual, SharedDual, ZeroDual};
    use crate::market::MarketParams;
    use crate::strategy::{nonhara_consumption_strategy, nonhara_terminal_strategy, power_power_strategy};

    fn power(q: f64) -> SharedDual {
        Arc::new(PowerDual::unit(q).unwrap())
    }

    fn spec(u1: SharedDual, u2: SharedDual, r: f64) -> ProblemSpec {
        ProblemSpec::new(u1, u2, MarketParams::reference(r)).unwrap()
    }

    #[test]
    fn scaling_functions() {
        let d = MarketParams::reference(0.02).derive().unwrap();
        assert_eq!(r_of_t(-3.0, -3.0, &d, 0.0), 1.0);
        assert!((r_of_t(-0.5, -1.0, &d, 5.0) - 5.0).abs() < 1e-12);
        let l = d.rate(-3.0);
        assert!((l - 0.18).abs() < 1e-14);
        let expect = l.exp() + l.exp_m1() / l;
        assert!((r_of_t(-3.0, -3.0, &d, 1.0) - expect).abs() < 1e-13);
        assert_eq!(e_of_t(-3.0, -3.0, &d, 0.0), 1.0);
        assert!(e_of_t(-3.0, -3.0, &d, 500.0) < 1e-30);
    }

    #[test]
    fn turnpike_limit_is_merton() {
        let cfg = QuadratureConfig::default();
        let s = spec(power(-0.5), power(-2.0), 0.02);
        let lim = limit_strategy(&s, 10.0, &cfg).unwrap();
        assert_eq!(lim.kind, LimitKind::MertonLinear);
        assert_eq!(lim.merton_pi, 3.0);
        assert_eq!(lim.amount, 30.0);
        let s = spec(power(-2.0), Arc::new(ZeroDual), 0.06);
        let lim = limit_strategy(&s, 1.0, &cfg).unwrap();
        assert_eq!(lim.regime.kind, RegimeKind::Turnpike);
        assert_eq!(lim.merton_pi, 3.0);
        assert_eq!(lim.consumption, ConsumptionLimit::None);
    }

    #[test]
    fn nonturnpike_power_consumption() {
        let cfg = QuadratureConfig::default();
        let s = spec(power(-0.5), power(-0.25), 0.10);
        let d = *s.derived();
        let lim = limit_strategy(&s, 10.0, &cfg).unwrap();
        assert_eq!(lim.kind, LimitKind::MertonLinear);
        assert!((lim.merton_pi - 1.25).abs() < 1e-15);
        assert_eq!(lim.consumption, ConsumptionLimit::Level(-d.rate(-0.25) * 10.0));
        // The general fixed point reproduces the same limit.
        for method in [HorizonMethod::Auto, HorizonMethod::Quadrature] {
            let fp = fixed_point_limit(&s, 10.0, &cfg, method).unwrap();
            assert!((fp.amount / lim.amount - 1.0).abs() < 1e-8);
            let ConsumptionLimit::Level(c) = fp.consumption else { panic!() };
            assert!((c / (-d.rate(-0.25) * 10.0) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn boundary_case_fixed_point() {
        let cfg = QuadratureConfig::default();
        let s = spec(power(-1.0), power(-0.5), 0.06);
        let d = *s.derived();
        let lim = limit_strategy(&s, 10.0, &cfg).unwrap();
        assert_eq!(lim.regime.kind, RegimeKind::Boundary);
        let y = lim.shadow_price.unwrap();
        let l2 = d.rate(-0.5);
        let residual = y.powf(-2.0) - y.powf(-1.5) / l2 - 10.0;
        assert!(residual.abs() < 1e-10 * 10.0);
        let amount = 2.0 * y.powf(-2.0) - 1.5 * y.powf(-1.5) / l2;
        assert!((lim.amount / amount - 1.0).abs() < 1e-12);
        // Finite horizons approach it.
        let far = power_power_strategy(-1.0, -0.5, &d, 10.0, 2000.0).unwrap();
        assert!((far.amount / lim.amount - 1.0).abs() < 1e-2);
    }

    #[test]
    fn example_two_limit_matches_fixed_point() {
        let cfg = QuadratureConfig::default();
        for r in [0.02, 0.06, 0.10] {
            let s = spec(power(-1.0 / 3.0), Arc::new(NonHaraDual::new(0.25).unwrap()), r);
            let d = *s.derived();
            for x in [1.0, 10.0, 100.0] {
                let z = nonhara_consumption_limit(0.25, &d, x).unwrap();
                for method in [HorizonMethod::Auto, HorizonMethod::Quadrature] {
                    let fp = fixed_point_limit(&s, x, &cfg, method).unwrap();
                    assert!((fp.amount / z.amount - 1.0).abs() < 1e-8, "r={r} x={x}");
                    assert_eq!(fp.kind, LimitKind::NonlinearFixedPoint);
                }
                let far = nonhara_consumption_strategy(0.25, &d, x, 200.0).unwrap();
                assert!((far.fraction - z.fraction()).abs() < 1e-2, "r={r} x={x}");
            }
        }
    }

    #[test]
    fn errors_against_limits() {
        let cfg = QuadratureConfig::default();
        let d = MarketParams::reference(0.02).derive().unwrap();
        let s = spec(Arc::new(NonHaraDual::new(0.75).unwrap()), power(-3.0), 0.02);
        let lim = limit_strategy(&s, 10.0, &cfg).unwrap();
        let p = nonhara_terminal_strategy(0.75, &d, 10.0, 1.0).unwrap();
        let e = relative_errors(&p, &lim).unwrap();
        assert!((e.e_merton - 0.1039).abs() < 5e-5);
        assert!((e.f.unwrap() - 0.2318).abs() < 5e-5);
        let ConsumptionLimit::Scaled(sc) = lim.consumption else { panic!() };
        assert!((sc.r_hat(7.0) - r_of_t(-3.0, -3.0, &d, 7.0)).abs() < 1e-12);
        let exact = StrategyPoint { fraction: lim.merton_pi, amount: lim.merton_pi * 10.0, ..p };
        let e = relative_errors(&exact, &lim).unwrap();
        assert_eq!((e.e_merton, e.e_limit, e.abs_err), (0.0, 0.0, 0.0));
    }

    #[test]
    fn rate_estimator() {
        let times = vec![1.0, 2.0, 5.0, 10.0, 25.0, 50.0, 100.0];
        let errors: Vec<f64> = times.iter().map(|t: &f64| (-0.1 * t).exp()).collect();
        let series = ErrorSeries::new(times.clone(), errors).unwrap();
        assert_eq!(series.gaps(), &[1.0, 3.0, 5.0, 15.0, 25.0, 50.0]);
        let rates = convergence_rates(&series);
        assert_eq!(rates[0], None);
        for c in &rates[1..] {
            assert!((c.unwrap() - 0.1).abs() < 1e-12);
        }
        let series = ErrorSeries::new(vec![1.0, 2.0, 3.0], vec![0.5, 0.0, 0.1]).unwrap();
        assert_eq!(convergence_rates(&series), vec![None, None, None]);
        assert!(ErrorSeries::new(vec![2.0, 1.0], vec![1.0, 1.0]).is_err());
    }
}
