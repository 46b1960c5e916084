use std::ffi::{CStr, CString};
use std::ptr;

use turnpike_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(tp_last_error()) }.to_string_lossy().into_owned()
}

fn dual(spec: &str) -> *mut TpDual {
    let c = CString::new(spec).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { tp_dual_parse(c.as_ptr(), &mut out) }, TpStatus::Ok);
    out
}

fn reference_market(r: f64) -> *mut TpMarket {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { tp_market_new(r, 0.2, 0.2, 0.02 + r / 2.0, &mut m) }, TpStatus::Ok);
    m
}

#[test]
fn market_round_trip() {
    unsafe {
        let m = reference_market(0.06);
        let mut d = TpDerived::default();
        assert_eq!(tp_market_derived(m, &mut d), TpStatus::Ok);
        assert!((d.q_star + 1.0).abs() < 1e-12);
        let mut lam = 0.0;
        assert_eq!(tp_market_lambda(m, 1.0, &mut lam), TpStatus::Ok);
        assert!((lam + 0.06).abs() < 1e-15);
        assert_eq!(tp_market_lambda(m, 1.5, &mut lam), TpStatus::InvalidArgument);
        assert!(last_error().contains("q"));
        let mut regime = TpRegime { kind: TpRegimeKind::Boundary, q_min: 0.0 };
        assert_eq!(tp_classify(m, -0.5, -0.25, &mut regime), TpStatus::Ok);
        assert_eq!(regime.kind, TpRegimeKind::NonTurnpike);
        tp_market_free(m);

        let mut via_mu = ptr::null_mut();
        assert_eq!(tp_market_new_mu(0.02, 0.2, 0.06, 0.03, &mut via_mu), TpStatus::Ok);
        assert_eq!(tp_market_derived(via_mu, &mut d), TpStatus::Ok);
        assert!((d.theta - 0.2).abs() < 1e-12);
        tp_market_free(via_mu);

        let mut bad = ptr::null_mut();
        assert_eq!(tp_market_new(0.02, 0.2, 0.2, 0.0, &mut bad), TpStatus::InvalidArgument);
        assert!(bad.is_null());
        assert!(!last_error().is_empty());
    }
}

#[test]
fn strategies_through_handles() {
    unsafe {
        let m = reference_market(0.02);
        let u1 = dual("power:q=-1/3");
        let u2 = dual("nonhara:p=1/4");
        let mut problem = ptr::null_mut();
        assert_eq!(tp_problem_new(u1, u2, m, &mut problem), TpStatus::Ok);
        // The problem holds its own references.
        tp_dual_free(u1);
        tp_dual_free(u2);
        tp_market_free(m);

        let mut point = TpStrategyPoint::default();
        assert_eq!(tp_optimal_strategy(problem, 10.0, 1.0, TpMethod::Auto as u32, &mut point), TpStatus::Ok);
        assert!((point.fraction - 1.2008).abs() < 5e-5);
        assert_eq!(tp_optimal_strategy(problem, 10.0, 1.0, 7, &mut point), TpStatus::InvalidArgument);
        assert_eq!(tp_optimal_strategy(problem, -1.0, 1.0, 0, &mut point), TpStatus::InvalidArgument);

        let mut limit = std::mem::MaybeUninit::<TpLimit>::uninit();
        assert_eq!(tp_limit_strategy(problem, 10.0, limit.as_mut_ptr()), TpStatus::Ok);
        let limit = limit.assume_init();
        assert_eq!(limit.kind, TpLimitKind::NonlinearFixedPoint);
        assert!((limit.merton_pi - 4.0 / 3.0).abs() < 1e-12);
        assert!(limit.shadow_price > 0.0 && limit.consumption > 0.0);
        tp_problem_free(problem);
    }
}

#[test]
fn marginal_inverse_and_errors() {
    unsafe {
        let d = dual("power:q=-1");
        let mut y = 0.0;
        assert_eq!(tp_dual_marginal_inverse(d, 0.25, &mut y), TpStatus::Ok);
        assert!((y - 2.0).abs() < 1e-12);
        tp_dual_free(d);

        let zero = dual("zero");
        assert_eq!(tp_dual_marginal_inverse(zero, 1.0, &mut y), TpStatus::InvalidArgument);
        let mut problem = ptr::null_mut();
        let m = reference_market(0.02);
        assert_eq!(tp_problem_new(zero, zero, m, &mut problem), TpStatus::InvalidArgument);
        assert!(last_error().contains("zero"));
        tp_dual_free(zero);
        tp_market_free(m);

        let bad = CString::new("power:k=1").unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(tp_dual_parse(bad.as_ptr(), &mut out), TpStatus::InvalidArgument);
        assert_eq!(tp_dual_parse(ptr::null(), &mut out), TpStatus::NullPointer);
        assert_eq!(tp_dual_marginal_inverse(ptr::null(), 1.0, &mut y), TpStatus::NullPointer);
        tp_dual_free(ptr::null_mut());
        tp_string_free(ptr::null_mut());
    }
}

#[test]
fn numerical_failures_have_their_own_code() {
    unsafe {
        let m = reference_market(0.02);
        let (u1, u2) = (dual("power:q=-2"), dual("power:q=-0.5"));
        let mut problem = ptr::null_mut();
        assert_eq!(tp_problem_new(u1, u2, m, &mut problem), TpStatus::Ok);
        let mut point = TpStrategyPoint::default();
        assert_eq!(tp_optimal_strategy(problem, 10.0, 1e5, 0, &mut point), TpStatus::Numerical);
        assert!(last_error().contains("bracket"));
        tp_problem_free(problem);
        tp_dual_free(u1);
        tp_dual_free(u2);
        tp_market_free(m);
    }
}

#[test]
fn table_csv_matches_golden() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(tp_table_csv(5, 4, &mut s), TpStatus::Ok);
        let text = CStr::from_ptr(s).to_str().unwrap().to_owned();
        tp_string_free(s);
        let golden = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/golden/table5.csv")).unwrap();
        assert_eq!(text, golden);
        assert_eq!(tp_table_csv(6, 4, &mut s), TpStatus::InvalidArgument);
        assert_eq!(tp_table_csv(1, 2, &mut s), TpStatus::InvalidArgument);
    }
}

#[test]
fn header_declares_the_interface_and_compiles() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let header = std::fs::read_to_string(format!("{dir}/include/turnpike.h")).unwrap();
    for name in [
        "tp_market_new", "tp_market_new_mu", "tp_market_free", "tp_market_derived", "tp_market_lambda", "tp_classify",
        "tp_dual_parse", "tp_dual_free", "tp_dual_marginal_inverse", "tp_problem_new", "tp_problem_free",
        "tp_optimal_strategy", "tp_limit_strategy", "tp_table_csv", "tp_string_free", "tp_last_error",
        "typedef struct TpMarket TpMarket", "TP_STATUS_NUMERICAL",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
    // Syntax check with the system C compiler when one is installed.
    if let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", &format!("{dir}/include/turnpike.h")])
        .status()
    {
        assert!(status.success(), "header does not compile");
    }
}
