//! Gauss–Hermite and Gauss–Legendre rules, computed once per order and shared.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

/// Largest Gauss–Hermite order this crate will build.
pub const MAX_HERMITE_NODES: usize = 384;

/// Hermite nodes for the weight `e^{−u²}`, with weights kept as logarithms
/// since they underflow long before the nodes run out at high order.
#[derive(Debug)]
pub struct HermiteRule {
    pub nodes: Vec<f64>,
    pub log_weights: Vec<f64>,
}

#[derive(Debug)]
pub struct LegendreRule {
    /// Nodes on `[−1, 1]`.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

type Cache<T> = OnceLock<RwLock<HashMap<usize, Arc<T>>>>;

static HERMITE: Cache<HermiteRule> = OnceLock::new();
static LEGENDRE: Cache<LegendreRule> = OnceLock::new();

fn cached<T>(cache: &'static Cache<T>, n: usize, build: fn(usize) -> T) -> Arc<T> {
    let map = cache.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(rule) = map.read().unwrap_or_else(|e| e.into_inner()).get(&n) {
        return rule.clone();
    }
    let rule = Arc::new(build(n));
    map.write()
        .unwrap_or_else(|e| e.into_inner())
        .entry(n)
        .or_insert(rule)
        .clone()
}

/// Cached `n`-point Gauss–Hermite rule. Panics if `n` is 0 or above the cap.
pub fn hermite(n: usize) -> Arc<HermiteRule> {
    assert!(n > 0 && n <= MAX_HERMITE_NODES, "hermite order {n} out of range");
    cached(&HERMITE, n, build_hermite)
}

/// Cached `n`-point Gauss–Legendre rule.
pub fn legendre(n: usize) -> Arc<LegendreRule> {
    assert!(n > 0, "legendre order must be positive");
    cached(&LEGENDRE, n, build_legendre)
}

// Eigenvalues of the Jacobi matrix give starting points; each is then
// polished by Newton on the orthonormal recursion, which also yields the
// weight as 2/p_n'(x)².
fn build_hermite(n: usize) -> HermiteRule {
    let mut guess = vec![0.0; n];
    let mut off: Vec<f64> = (0..n)
        .map(|i| if i + 1 < n { (0.5 * (i + 1) as f64).sqrt() } else { 0.0 })
        .collect();
    symmetric_tridiagonal_eigenvalues(&mut guess, &mut off);
    guess.sort_by(f64::total_cmp);

    let nf = n as f64;
    let pim4 = PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut lw = vec![0.0; n];
    // Positive half (and zero for odd n), mirrored afterwards.
    for i in n / 2..n {
        let mut z = if n % 2 == 1 && i == n / 2 { 0.0 } else { guess[i] };
        let mut pp = 1.0;
        for _ in 0..20 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let step = p1 / pp;
            z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        let w = 2f64.ln() - 2.0 * pp.abs().ln();
        x[i] = z;
        lw[i] = w;
        x[n - 1 - i] = -z;
        lw[n - 1 - i] = w;
    }
    HermiteRule {
        nodes: x,
        log_weights: lw,
    }
}

// Implicit QL with Wilkinson shifts; `off[i]` couples rows i and i+1 and
// `off[n−1]` must be zero. Eigenvalues are left in `diag`.
fn symmetric_tridiagonal_eigenvalues(diag: &mut [f64], off: &mut [f64]) {
    let n = diag.len();
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let scale = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * scale {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            assert!(iterations < 100, "tridiagonal QL failed to converge");
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
}

fn build_legendre(n: usize) -> LegendreRule {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 1.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    LegendreRule {
        nodes: x,
        weights: w,
    }
}
