//! Optimal strategies at finite horizon.
//!
//! The shadow price `y` solves the budget equation `x = I₁(y,t) + K(y,t)`;
//! the amount in the risky asset is then `A = (θ/σ)(J₁ + JK)` and the
//! consumption rate is `C = −V₂'(y)`.

use crate::dual::{DualUtility, NonHaraDual, PowerTerm, SharedDual};
use crate::error::{Error, Result};
use crate::feynman_kac::{annuity, BudgetKernels, Kernels, QuadratureConfig};
use crate::market::{DerivedParams, MarketParams};
use crate::roots::{solve_decreasing, Root, RootOptions};

/// Terminal dual, consumption dual and market.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub terminal: SharedDual,
    pub consumption: SharedDual,
    pub market: MarketParams,
    derived: DerivedParams,
}

impl ProblemSpec {
    pub fn new(terminal: SharedDual, consumption: SharedDual, market: MarketParams) -> Result<Self> {
        if terminal.is_zero() && consumption.is_zero() {
            return Err(Error::DegenerateProblem);
        }
        let derived = market.derive()?;
        Ok(Self {
            terminal,
            consumption,
            market,
            derived,
        })
    }

    pub fn derived(&self) -> &DerivedParams {
        &self.derived
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyPoint {
    pub x: f64,
    pub t: f64,
    /// Shadow price solving the budget equation.
    pub y: f64,
    /// Amount held in the risky asset, `A(x,t)`.
    pub amount: f64,
    /// `π*(x,t) = A/x`.
    pub fraction: f64,
    /// Consumption rate `C(x,t)`.
    pub consumption: f64,
}

impl StrategyPoint {
    fn new(x: f64, t: f64, y: f64, amount: f64, consumption: f64) -> Self {
        Self {
            x,
            t,
            y,
            amount,
            fraction: amount / x,
            consumption,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Closed forms when both duals are power mixtures, quadrature otherwise.
    #[default]
    Auto,
    Quadrature,
    ClosedForm,
}

fn check_inputs(x: f64, t: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::InvalidArgument {
            name: "x",
            value: x,
            reason: "wealth must be positive",
        });
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument {
            name: "t",
            value: t,
            reason: "horizon must be non-negative",
        });
    }
    Ok(())
}

fn root_options(cfg: &QuadratureConfig) -> RootOptions {
    RootOptions {
        growth: cfg.bracket_growth,
        ..RootOptions::default()
    }
}

fn solve_with(kernels: &BudgetKernels<'_>, x: f64, opts: &RootOptions) -> Result<(Root, Kernels)> {
    let root = solve_decreasing(
        |y| {
            let k = kernels.eval(y);
            (k.budget(), k.slope())
        },
        x,
        opts,
    )?;
    Ok((root, kernels.eval(root.y)))
}

/// Shadow price `y` with `I₁(y,t) + K(y,t) = x`, by quadrature.
pub fn solve_budget(spec: &ProblemSpec, x: f64, t: f64, cfg: &QuadratureConfig) -> Result<f64> {
    optimal_strategy(spec, x, t, cfg).map(|p| p.y)
}

/// Exact strategy by quadrature. The root is found on the base plan and the
/// budget is re-evaluated on a refined plan at the root; if the two disagree
/// beyond `time_tol` the solve is repeated on the refined plan.
pub fn optimal_strategy(spec: &ProblemSpec, x: f64, t: f64, cfg: &QuadratureConfig) -> Result<StrategyPoint> {
    check_inputs(x, t)?;
    cfg.validate()?;
    let d = spec.derived();
    let (u1, u2) = (spec.terminal.as_ref(), spec.consumption.as_ref());
    let opts = root_options(cfg);
    let mut current = *cfg;
    let mut attempt = 0;
    loop {
        let kernels = BudgetKernels::new(u1, u2, d, t, &current)?;
        let (root, k) = solve_with(&kernels, x, &opts)?;
        let finer = current.refined();
        let check = BudgetKernels::new(u1, u2, d, t, &finer)?.eval(root.y);
        let drift = (check.budget() - k.budget()).abs() / k.budget();
        let slope_drift = (check.slope() - k.slope()).abs() / k.slope();
        if drift <= cfg.time_tol && slope_drift <= cfg.time_tol {
            let amount = d.theta_over_sigma() * k.slope();
            return Ok(StrategyPoint::new(x, t, root.y, amount, -u2.vp(root.y)));
        }
        attempt += 1;
        if attempt > cfg.max_refinements {
            return Err(Error::QuadratureNonConvergence {
                estimate: k.budget(),
                error_bound: (check.budget() - k.budget()).abs(),
            });
        }
        current = finer;
    }
}

fn mixture(dual: &dyn DualUtility) -> Result<Vec<PowerTerm>> {
    dual.power_terms()
        .ok_or(Error::Undefined("closed form requires power-mixture duals"))
}

/// Closed-form strategy for duals that are sums of power terms; only the
/// scalar budget equation is solved numerically.
pub fn power_mixture_strategy(spec: &ProblemSpec, x: f64, t: f64) -> Result<StrategyPoint> {
    check_inputs(x, t)?;
    let d = spec.derived();
    // Each entry: (q, coefficient of y^{q−1} in the budget).
    let mut budget: Vec<(f64, f64)> = Vec::new();
    for p in mixture(spec.terminal.as_ref())? {
        budget.push((p.q, p.k * (d.rate(p.q) * t).exp()));
    }
    for p in mixture(spec.consumption.as_ref())? {
        budget.push((p.q, p.k * annuity(d.rate(p.q), t)));
    }
    let root = solve_power_sum(&budget, x)?;
    let amount = d.theta_over_sigma()
        * budget
            .iter()
            .map(|&(q, c)| (1.0 - q) * c * root.y.powf(q - 1.0))
            .sum::<f64>();
    Ok(StrategyPoint::new(x, t, root.y, amount, -spec.consumption.vp(root.y)))
}

// Root of Σ cᵢ y^{qᵢ−1} = x; D(y) = Σ (1−qᵢ) cᵢ y^{qᵢ−1}.
fn solve_power_sum(terms: &[(f64, f64)], x: f64) -> Result<Root> {
    solve_decreasing(
        |y| {
            terms.iter().fold((0.0, 0.0), |(v, s), &(q, c)| {
                let term = c * y.powf(q - 1.0);
                (v + term, s + (1.0 - q) * term)
            })
        },
        x,
        &RootOptions::default(),
    )
}

/// Both utilities power with unit scale: `V_i' = −y^{q_i−1}`.
pub fn power_power_strategy(q1: f64, q2: f64, d: &DerivedParams, x: f64, t: f64) -> Result<StrategyPoint> {
    check_inputs(x, t)?;
    for (name, q) in [("q1", q1), ("q2", q2)] {
        if !(q < 1.0) {
            return Err(Error::InvalidArgument {
                name,
                value: q,
                reason: "power exponent must be below 1",
            });
        }
    }
    let c1 = (d.rate(q1) * t).exp();
    let c2 = annuity(d.rate(q2), t);
    let root = solve_power_sum(&[(q1, c1), (q2, c2)], x)?;
    let y = root.y;
    let amount = d.theta_over_sigma() * ((1.0 - q1) * c1 * y.powf(q1 - 1.0) + (1.0 - q2) * c2 * y.powf(q2 - 1.0));
    Ok(StrategyPoint::new(x, t, y, amount, y.powf(q2 - 1.0)))
}

// Positive root of R z² + b z = x.
fn quadratic_root(r: f64, b: f64, x: f64) -> f64 {
    2.0 * x / (b + (b * b + 4.0 * r * x).sqrt())
}

/// Non-HARA terminal utility with parameter `p` and power consumption with
/// the matching exponent `q = p/(p−1)`. With `z = y^{q̄−1}` the budget is
/// `R(t) z² + e^{λ(q̄)t} z = x`.
pub fn nonhara_terminal_strategy(p: f64, d: &DerivedParams, x: f64, t: f64) -> Result<StrategyPoint> {
    check_inputs(x, t)?;
    let dual = NonHaraDual::new(p)?;
    let (q, qb) = (dual.q(), dual.q_bar());
    let r_t = (d.rate(q) * t).exp() + annuity(d.rate(q), t);
    let b = (d.rate(qb) * t).exp();
    let z = quadratic_root(r_t, b, x);
    let amount = d.theta_over_sigma() * ((1.0 - q) * r_t * z * z + (1.0 - qb) * b * z);
    Ok(StrategyPoint::new(x, t, z.powf(1.0 / (qb - 1.0)), amount, z * z))
}

/// Power terminal utility with exponent `q = p/(p−1)` and non-HARA
/// consumption with parameter `p`. The budget is `R(t) z² + R₁(t) z = x`
/// with `R₁(t) = (e^{λ(q̄)t} − 1)/λ(q̄)`.
pub fn nonhara_consumption_strategy(p: f64, d: &DerivedParams, x: f64, t: f64) -> Result<StrategyPoint> {
    check_inputs(x, t)?;
    let dual = NonHaraDual::new(p)?;
    let (q, qb) = (dual.q(), dual.q_bar());
    let r_t = (d.rate(q) * t).exp() + annuity(d.rate(q), t);
    let r1 = annuity(d.rate(qb), t);
    let z = if r1 == 0.0 { (x / r_t).sqrt() } else { quadratic_root(r_t, r1, x) };
    let amount = d.theta_over_sigma() * ((1.0 - q) * r_t * z * z + (1.0 - qb) * r1 * z);
    Ok(StrategyPoint::new(x, t, z.powf(1.0 / (qb - 1.0)), amount, z * z + z))
}

/// Dispatches on `method`.
pub fn strategy(spec: &ProblemSpec, x: f64, t: f64, method: Method, cfg: &QuadratureConfig) -> Result<StrategyPoint> {
    match method {
        Method::Quadrature => optimal_strategy(spec, x, t, cfg),
        Method::ClosedForm => power_mixture_strategy(spec, x, t),
        Method::Auto => {
            if spec.terminal.power_terms().is_some() && spec.consumption.power_terms().is_some() {
                power_mixture_strategy(spec, x, t)
            } else {
                optimal_strategy(spec, x, t, cfg)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::dual::{marginal_inverse, CustomDual, PowerDual, ZeroDual};

    fn spec(u1: SharedDual, u2: SharedDual, r: f64) -> ProblemSpec {
        ProblemSpec::new(u1, u2, MarketParams::reference(r)).unwrap()
    }

    fn power(q: f64) -> SharedDual {
        Arc::new(PowerDual::unit(q).unwrap())
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a / b - 1.0).abs()
    }

    #[test]
    fn degenerate_problem_rejected() {
        let err = ProblemSpec::new(Arc::new(ZeroDual), Arc::new(ZeroDual), MarketParams::reference(0.02));
        assert!(matches!(err, Err(Error::DegenerateProblem)));
    }

    #[test]
    fn table_rows_by_closed_form() {
        let d = MarketParams::reference(0.02).derive().unwrap();
        let p = power_power_strategy(-0.5, -2.0, &d, 10.0, 1.0).unwrap();
        assert!((p.fraction - 2.6075).abs() < 5e-5);
        assert!((p.y - 0.51961).abs() < 5e-5);
        let d6 = MarketParams::reference(0.06).derive().unwrap();
        let p = power_power_strategy(-2.0, -0.5, &d6, 10.0, 25.0).unwrap();
        assert!((p.fraction - 1.7963).abs() < 5e-5);
        let d10 = MarketParams::reference(0.10).derive().unwrap();
        let p = power_power_strategy(-0.5, -0.25, &d10, 10.0, 100.0).unwrap();
        assert!((p.fraction - 1.2502).abs() < 5e-5);
        let p = nonhara_terminal_strategy(0.75, &d, 10.0, 1.0).unwrap();
        assert!((p.fraction - 3.6237).abs() < 5e-5);
        assert!((p.consumption - 3.5407).abs() < 5e-5);
        let p = nonhara_consumption_strategy(0.25, &d, 10.0, 1.0).unwrap();
        assert!((p.fraction - 1.2008).abs() < 5e-5);
        let p = nonhara_consumption_strategy(0.25, &d10, 1.0, 100.0).unwrap();
        assert!((p.fraction - 0.7400).abs() < 5e-5);
    }

    #[test]
    fn equal_exponents_give_merton() {
        let d = MarketParams::reference(0.06).derive().unwrap();
        for x in [0.1, 1.0, 10.0, 100.0] {
            for t in [1.0, 30.0] {
                let p = power_power_strategy(-3.0, -3.0, &d, x, t).unwrap();
                assert!((p.fraction - 4.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quadrature_matches_closed_forms() {
        let cfg = QuadratureConfig::default();
        for r in [0.02, 0.10] {
            let d = MarketParams::reference(r).derive().unwrap();
            for t in [1.0, 25.0, 100.0] {
                let s = spec(power(-0.5), power(-2.0), r);
                let a = optimal_strategy(&s, 10.0, t, &cfg).unwrap();
                let b = power_power_strategy(-0.5, -2.0, &d, 10.0, t).unwrap();
                assert!(rel(a.fraction, b.fraction) < 1e-7 && rel(a.y, b.y) < 1e-7);

                let s = spec(Arc::new(NonHaraDual::new(0.75).unwrap()), power(-3.0), r);
                let a = optimal_strategy(&s, 10.0, t, &cfg).unwrap();
                let b = nonhara_terminal_strategy(0.75, &d, 10.0, t).unwrap();
                assert!(rel(a.fraction, b.fraction) < 1e-7, "r={r} t={t}");
                assert!(rel(a.consumption, b.consumption) < 1e-7);
                let c = power_mixture_strategy(&s, 10.0, t).unwrap();
                assert!(rel(c.fraction, b.fraction) < 1e-10);

                let s = spec(power(-1.0 / 3.0), Arc::new(NonHaraDual::new(0.25).unwrap()), r);
                let a = optimal_strategy(&s, 10.0, t, &cfg).unwrap();
                let b = nonhara_consumption_strategy(0.25, &d, 10.0, t).unwrap();
                assert!(rel(a.fraction, b.fraction) < 1e-7, "r={r} t={t}");
                assert!(rel(a.consumption, b.consumption) < 1e-7);
            }
        }
    }

    #[test]
    fn budget_residual_and_pure_terminal() {
        let cfg = QuadratureConfig::default();
        let s = spec(power(-2.0), Arc::new(ZeroDual), 0.06);
        let d = *s.derived();
        let p = optimal_strategy(&s, 3.0, 4.0, &cfg).unwrap();
        let expect = ((d.rate(-2.0) * 4.0).exp() / 3.0).powf(1.0 / 3.0);
        assert!(rel(p.y, expect) < 1e-10);
        assert_eq!(p.consumption, 0.0);
        assert!((p.fraction - 3.0).abs() < 1e-9);
        // t → 0 recovers the marginal-utility inverse.
        let p = optimal_strategy(&s, 3.0, 0.0, &cfg).unwrap();
        let y0 = marginal_inverse(s.terminal.as_ref(), 3.0).unwrap();
        assert!(rel(p.y, y0) < 1e-12);
    }

    #[test]
    fn custom_dual_goes_through_quadrature() {
        let cfg = QuadratureConfig::default();
        let custom = CustomDual::new(
            "power-2",
            |y: f64| -y.powf(-3.0),
            |y: f64| 3.0 * y.powf(-4.0),
            -2.0,
        )
        .unwrap();
        let s = spec(Arc::new(custom), power(-0.5), 0.02);
        assert!(strategy(&s, 10.0, 5.0, Method::ClosedForm, &cfg).is_err());
        let a = strategy(&s, 10.0, 5.0, Method::Auto, &cfg).unwrap();
        let b = power_power_strategy(-2.0, -0.5, s.derived(), 10.0, 5.0).unwrap();
        assert!(rel(a.fraction, b.fraction) < 1e-8);
    }

    #[test]
    fn shadow_price_decreases_in_wealth() {
        let d = MarketParams::reference(0.02).derive().unwrap();
        let ys: Vec<f64> = [0.5, 1.0, 2.0, 8.0, 40.0]
            .iter()
            .map(|&x| power_power_strategy(-0.5, -2.0, &d, x, 10.0).unwrap().y)
            .collect();
        assert!(ys.windows(2).all(|w| w[0] > w[1]));
    }
}
