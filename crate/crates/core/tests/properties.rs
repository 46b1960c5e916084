use std::sync::Arc;

use proptest::prelude::*;
use turnpike::dual::{marginal_inverse, DualUtility, NonHaraDual, PowerDual};
use turnpike::feynman_kac::{self as fk, KernelPlan, QuadratureConfig};
use turnpike::market::{classify, MarketParams};
use turnpike::strategy::{optimal_strategy, power_power_strategy, ProblemSpec};
use turnpike::turnpike::{fixed_point_limit, HorizonMethod};

fn market() -> impl Strategy<Value = MarketParams> {
    (0.0..0.15f64, 0.05..0.6f64, 0.05..1.0f64, 0.005..0.2f64)
        .prop_map(|(r, sigma, theta, delta)| MarketParams::with_theta(r, sigma, theta, delta))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn threshold_is_the_negative_root(m in market(), q in -10.0..1.0f64) {
        let d = m.derive().unwrap();
        prop_assert!(d.q_star < 0.0);
        prop_assert!(d.rate(d.q_star).abs() < 1e-9);
        let lam = d.rate(q);
        prop_assert!((lam - d.rate_vertex_form(q)).abs() <= 1e-12 * lam.abs().max(1.0));
        if (q - d.q_star).abs() > 1e-6 {
            prop_assert_eq!(lam < 0.0, q > d.q_star);
        }
    }

    #[test]
    fn mu_and_theta_inputs_classify_alike(m in market(), q1 in -4.0..0.9f64, q2 in -4.0..0.9f64) {
        let theta = m.theta.unwrap();
        let via_mu = MarketParams::with_mu(m.r, m.sigma, m.r + theta * m.sigma, m.delta);
        let (a, b) = (m.derive().unwrap(), via_mu.derive().unwrap());
        prop_assert_eq!(classify(q1, q2, &a).kind, classify(q1, q2, &b).kind);
    }
}

proptest! {
    #[test]
    fn dual_marginals_decrease_and_invert(p in 0.05..0.95f64, q in -5.0..0.95f64, l in -4.0..4.0f64) {
        let y = 10f64.powf(l);
        let duals: [Box<dyn DualUtility>; 2] = [Box::new(NonHaraDual::new(p).unwrap()), Box::new(PowerDual::unit(q).unwrap())];
        for dual in &duals {
            prop_assert!(dual.vp(y) < dual.vp(1.01 * y));
            prop_assert!(dual.vpp(y) > 0.0);
            let back = marginal_inverse(dual.as_ref(), -dual.vp(y)).unwrap();
            prop_assert!((back / y - 1.0).abs() < 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernels_are_linear_in_the_dual(p in 0.1..0.9f64, t in 0.1..50.0f64, y in 0.1..10.0f64) {
        let d = MarketParams::reference(0.06).derive().unwrap();
        let cfg = QuadratureConfig::default();
        let whole = NonHaraDual::new(p).unwrap();
        let a = PowerDual::unit(whole.q()).unwrap();
        let b = PowerDual::unit(whole.q_bar()).unwrap();
        for plan in [KernelPlan::terminal(&whole, &d, t, &cfg), KernelPlan::running(&whole, &d, t, &cfg)] {
            let (i, j) = plan.eval(&whole, y);
            let (ia, ja) = plan.eval(&a, y);
            let (ib, jb) = plan.eval(&b, y);
            prop_assert!((i / (ia + ib) - 1.0).abs() < 1e-12);
            prop_assert!((j / (ja + jb) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kernels_decrease_in_y(q in -3.0..0.5f64, t in 0.1..50.0f64, y in 0.1..10.0f64) {
        let d = MarketParams::reference(0.02).derive().unwrap();
        let cfg = QuadratureConfig::default();
        let dual = PowerDual::unit(q).unwrap();
        prop_assert!(fk::terminal_i(&dual, y, t, &d, &cfg).unwrap() > fk::terminal_i(&dual, 1.05 * y, t, &d, &cfg).unwrap());
        prop_assert!(fk::consumption_k(&dual, y, t, &d, &cfg).unwrap() > fk::consumption_k(&dual, 1.05 * y, t, &d, &cfg).unwrap());
    }

    #[test]
    fn shadow_price_decreases_in_wealth(x in 0.1..100.0f64, t in 0.5..60.0f64, r in 0.0..0.1f64) {
        let m = MarketParams::reference(r);
        let e = NonHaraDual::new(0.25).unwrap();
        let spec = ProblemSpec::new(Arc::new(PowerDual::unit(e.q()).unwrap()), Arc::new(e), m).unwrap();
        let cfg = QuadratureConfig::default();
        let lo = optimal_strategy(&spec, x, t, &cfg).unwrap();
        let hi = optimal_strategy(&spec, 1.1 * x, t, &cfg).unwrap();
        prop_assert!(hi.y < lo.y);
    }

    #[test]
    fn equal_exponents_are_homogeneous(q in -4.0..0.5f64, t in 0.1..100.0f64, x in 0.1..100.0f64) {
        let d = MarketParams::reference(0.06).derive().unwrap();
        let a = power_power_strategy(q, q, &d, x, t).unwrap();
        prop_assert!((a.fraction - d.merton_fraction(q)).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_solves_its_equation(x in 0.1..100.0f64, r in 0.0..0.1f64) {
        let m = MarketParams::reference(r);
        let e = NonHaraDual::new(0.25).unwrap();
        let spec = ProblemSpec::new(Arc::new(PowerDual::unit(e.q()).unwrap()), Arc::new(e), m).unwrap();
        let cfg = QuadratureConfig::default();
        let limit = fixed_point_limit(&spec, x, &cfg, HorizonMethod::Quadrature).unwrap();
        let y = limit.shadow_price.unwrap();
        let h = fk::h_infinite(&e, y, spec.derived(), &cfg).unwrap();
        prop_assert!((h - x).abs() <= 1e-10 * x);
    }
}
