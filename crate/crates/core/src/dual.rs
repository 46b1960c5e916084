//! Convex-conjugate (dual) utilities `V(y) = sup_x {U(x) − xy}`.
//!
//! The solver only ever needs `V'` and `V''` on `y > 0`, plus the declared
//! power-law exponents of `V'` at the two ends of the half line: `q0` near
//! zero, where `V'(y) ≈ −k0·y^{q0−1}`, and optionally `q_inf` at infinity.
//! The declared exponents drive regime classification and turnpike limits
//! only; the exact finite-horizon solver never uses them.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::roots::{solve_decreasing, RootOptions};

/// One term `V'(y) = −k·y^{q−1}` of a power mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTerm {
    pub q: f64,
    pub k: f64,
}

impl PowerTerm {
    #[inline]
    pub fn marginal(&self, y: f64) -> f64 {
        self.k * y.powf(self.q - 1.0)
    }
}

/// A dual utility. Implementations must keep `vp < 0` and `vpp > 0` on
/// `y > 0` (the zero dual is the one exception).
pub trait DualUtility: fmt::Debug + Send + Sync {
    /// `V'(y)`.
    fn vp(&self, y: f64) -> f64;
    /// `V''(y)`.
    fn vpp(&self, y: f64) -> f64;
    /// `V(y)` when known in closed form.
    fn v(&self, _y: f64) -> Option<f64> {
        None
    }
    /// Exponent of `V'` at `y → 0`. `None` only for the zero dual.
    fn q0(&self) -> Option<f64>;
    fn k0(&self) -> f64 {
        1.0
    }
    /// Exponent of `V'` at `y → ∞`, when declared.
    fn q_inf(&self) -> Option<f64> {
        None
    }
    fn k_inf(&self) -> f64 {
        1.0
    }
    fn is_zero(&self) -> bool {
        false
    }
    /// Exact decomposition of `−V'` into power terms, when one exists.
    fn power_terms(&self) -> Option<Vec<PowerTerm>> {
        None
    }
    /// Closed-form solution of `−V'(y) = x`, when one exists.
    fn marginal_inverse_closed(&self, _x: f64) -> Option<f64> {
        None
    }
    /// Modelling caveats that do not prevent computation.
    fn warnings(&self) -> Vec<String> {
        Vec::new()
    }
    /// Text in the utility spec grammar (or a descriptive label).
    fn spec(&self) -> String;
}

pub type SharedDual = Arc<dyn DualUtility>;

/// `V(y) = −(k/q)·y^q`, the dual of a power utility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerDual {
    q: f64,
    k: f64,
}

impl PowerDual {
    pub fn new(q: f64, k: f64) -> Result<Self> {
        if !(q < 1.0) || !q.is_finite() {
            return Err(Error::InvalidArgument {
                name: "q",
                value: q,
                reason: "power dual exponent must be finite and below 1",
            });
        }
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidArgument {
                name: "k",
                value: k,
                reason: "scale must be positive",
            });
        }
        Ok(Self { q, k })
    }

    pub fn unit(q: f64) -> Result<Self> {
        Self::new(q, 1.0)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn k(&self) -> f64 {
        self.k
    }
}

impl DualUtility for PowerDual {
    fn vp(&self, y: f64) -> f64 {
        -self.k * y.powf(self.q - 1.0)
    }

    fn vpp(&self, y: f64) -> f64 {
        self.k * (1.0 - self.q) * y.powf(self.q - 2.0)
    }

    fn v(&self, y: f64) -> Option<f64> {
        if self.q == 0.0 {
            // Dual of k·ln x.
            Some(self.k * (self.k.ln() - y.ln() - 1.0))
        } else {
            Some(-self.k / self.q * y.powf(self.q))
        }
    }

    fn q0(&self) -> Option<f64> {
        Some(self.q)
    }

    fn k0(&self) -> f64 {
        self.k
    }

    fn q_inf(&self) -> Option<f64> {
        Some(self.q)
    }

    fn k_inf(&self) -> f64 {
        self.k
    }

    fn power_terms(&self) -> Option<Vec<PowerTerm>> {
        Some(vec![PowerTerm { q: self.q, k: self.k }])
    }

    fn marginal_inverse_closed(&self, x: f64) -> Option<f64> {
        Some((x / self.k).powf(1.0 / (self.q - 1.0)))
    }

    fn warnings(&self) -> Vec<String> {
        if self.q >= 0.0 {
            vec![format!(
                "power dual with q = {} has U(0) = -inf; only the power-power closed forms are justified",
                self.q
            )]
        } else {
            Vec::new()
        }
    }

    fn spec(&self) -> String {
        if self.k == 1.0 {
            format!("power:q={}", self.q)
        } else {
            format!("power:q={},k={}", self.q, self.k)
        }
    }
}

/// The two-term non-HARA dual `V(y) = −(1/q)y^q − (1/q̄)y^{q̄}` with
/// `q = p/(p−1)` and `q̄ = (q+1)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonHaraDual {
    p: f64,
    q: f64,
    q_bar: f64,
}

impl NonHaraDual {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument {
                name: "p",
                value: p,
                reason: "non-HARA parameter must lie in (0, 1)",
            });
        }
        let q = p / (p - 1.0);
        Ok(Self {
            p,
            q,
            q_bar: 0.5 * (q + 1.0),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn q_bar(&self) -> f64 {
        self.q_bar
    }

    pub fn p_bar(&self) -> f64 {
        2.0 * self.p - 1.0
    }

    // z = y^{q̄−1}; since q − 1 = 2(q̄ − 1), y^{q−1} = z².
    #[inline]
    fn z(&self, y: f64) -> f64 {
        y.powf(self.q_bar - 1.0)
    }

    /// `H(x) = 2^{1−p̄}(√(1+4x) − 1)^{p̄−1}`, the inverse of `−V'`.
    pub fn h(&self, x: f64) -> f64 {
        // z solves z² + z = x; rationalised form avoids cancellation at small x.
        let z = 2.0 * x / (1.0 + (1.0 + 4.0 * x).sqrt());
        z.powf(self.p_bar() - 1.0)
    }
}

impl DualUtility for NonHaraDual {
    fn vp(&self, y: f64) -> f64 {
        let z = self.z(y);
        -(z * z + z)
    }

    fn vpp(&self, y: f64) -> f64 {
        let z = self.z(y);
        ((1.0 - self.q) * z * z + (1.0 - self.q_bar) * z) / y
    }

    fn v(&self, y: f64) -> Option<f64> {
        Some(-y.powf(self.q) / self.q - y.powf(self.q_bar) / self.q_bar)
    }

    fn q0(&self) -> Option<f64> {
        Some(self.q)
    }

    fn q_inf(&self) -> Option<f64> {
        Some(self.q_bar)
    }

    fn power_terms(&self) -> Option<Vec<PowerTerm>> {
        Some(vec![
            PowerTerm { q: self.q, k: 1.0 },
            PowerTerm {
                q: self.q_bar,
                k: 1.0,
            },
        ])
    }

    fn marginal_inverse_closed(&self, x: f64) -> Option<f64> {
        Some(self.h(x))
    }

    fn spec(&self) -> String {
        format!("nonhara:p={}", self.p)
    }
}

/// `V ≡ 0`: no terminal utility, or no consumption utility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ZeroDual;

impl DualUtility for ZeroDual {
    fn vp(&self, _y: f64) -> f64 {
        0.0
    }

    fn vpp(&self, _y: f64) -> f64 {
        0.0
    }

    fn v(&self, _y: f64) -> Option<f64> {
        Some(0.0)
    }

    fn q0(&self) -> Option<f64> {
        None
    }

    fn is_zero(&self) -> bool {
        true
    }

    fn power_terms(&self) -> Option<Vec<PowerTerm>> {
        Some(Vec::new())
    }

    fn spec(&self) -> String {
        "zero".to_string()
    }
}

type RealFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied dual. Tail exponents are declared, never fitted.
pub struct CustomDual {
    label: String,
    vp: RealFn,
    vpp: RealFn,
    v: Option<RealFn>,
    q0: f64,
    k0: f64,
    q_inf: Option<f64>,
    k_inf: f64,
}

impl CustomDual {
    pub fn new(
        label: impl Into<String>,
        vp: impl Fn(f64) -> f64 + Send + Sync + 'static,
        vpp: impl Fn(f64) -> f64 + Send + Sync + 'static,
        q0: f64,
    ) -> Result<Self> {
        if !(q0 < 1.0) {
            return Err(Error::InvalidArgument {
                name: "q0",
                value: q0,
                reason: "declared exponent must be below 1",
            });
        }
        Ok(Self {
            label: label.into(),
            vp: Box::new(vp),
            vpp: Box::new(vpp),
            v: None,
            q0,
            k0: 1.0,
            q_inf: None,
            k_inf: 1.0,
        })
    }

    pub fn with_value(mut self, v: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.v = Some(Box::new(v));
        self
    }

    pub fn with_scale_at_zero(mut self, k0: f64) -> Self {
        self.k0 = k0;
        self
    }

    pub fn with_tail(mut self, q_inf: f64, k_inf: f64) -> Result<Self> {
        if !(q_inf < 1.0) {
            return Err(Error::InvalidArgument {
                name: "q_inf",
                value: q_inf,
                reason: "declared exponent must be below 1",
            });
        }
        self.q_inf = Some(q_inf);
        self.k_inf = k_inf;
        Ok(self)
    }
}

impl fmt::Debug for CustomDual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomDual")
            .field("label", &self.label)
            .field("q0", &self.q0)
            .field("k0", &self.k0)
            .field("q_inf", &self.q_inf)
            .field("k_inf", &self.k_inf)
            .finish_non_exhaustive()
    }
}

impl DualUtility for CustomDual {
    fn vp(&self, y: f64) -> f64 {
        (self.vp)(y)
    }

    fn vpp(&self, y: f64) -> f64 {
        (self.vpp)(y)
    }

    fn v(&self, y: f64) -> Option<f64> {
        self.v.as_ref().map(|v| v(y))
    }

    fn q0(&self) -> Option<f64> {
        Some(self.q0)
    }

    fn k0(&self) -> f64 {
        self.k0
    }

    fn q_inf(&self) -> Option<f64> {
        self.q_inf
    }

    fn k_inf(&self) -> f64 {
        self.k_inf
    }

    fn spec(&self) -> String {
        format!("custom:{}", self.label)
    }
}

/// Which end of `(0, ∞)` an asymptotic statement refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    Zero,
    Infinity,
}

/// Returns `y` with `−V'(y) = x`.
pub fn marginal_inverse(dual: &dyn DualUtility, x: f64) -> Result<f64> {
    if dual.is_zero() {
        return Err(Error::ZeroDual("marginal_inverse"));
    }
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidArgument {
            name: "x",
            value: x,
            reason: "must be positive",
        });
    }
    if let Some(y) = dual.marginal_inverse_closed(x) {
        return Ok(y);
    }
    let root = solve_decreasing(
        |y| (-dual.vp(y), y * dual.vpp(y)),
        x,
        &RootOptions::default(),
    )?;
    Ok(root.y)
}

/// Primal non-HARA utility `U(x) = V(H(x)) + x·H(x)`.
pub fn nonhara_primal(p: f64, x: f64) -> Result<f64> {
    let dual = NonHaraDual::new(p)?;
    if !(x > 0.0) {
        return Err(Error::InvalidArgument {
            name: "x",
            value: x,
            reason: "must be positive",
        });
    }
    let h = dual.h(x);
    let (q, qb) = (dual.q, dual.q_bar);
    Ok(-h.powf(q) / q - h.powf(qb) / qb + x * h)
}

/// `V'(y)/(−k·y^{q−1}) − 1` at the requested end; a diagnostic.
pub fn asymptote_residual(dual: &dyn DualUtility, y: f64, end: End) -> Result<f64> {
    let (q, k) = match end {
        End::Zero => (
            dual.q0().ok_or(Error::UndeclaredExponent { end: "zero" })?,
            dual.k0(),
        ),
        End::Infinity => (
            dual.q_inf()
                .ok_or(Error::UndeclaredExponent { end: "infinity" })?,
            dual.k_inf(),
        ),
    };
    Ok(dual.vp(y) / (-k * y.powf(q - 1.0)) - 1.0)
}

/// Dual relative risk aversion `−y V''(y)/V'(y)`.
pub fn rra_dual(dual: &dyn DualUtility, y: f64) -> Result<f64> {
    if dual.is_zero() {
        return Err(Error::ZeroDual("rra_dual"));
    }
    Ok(-y * dual.vpp(y) / dual.vp(y))
}

/// Parsed form of the utility spec grammar
/// `power:q=<v>[,k=<v>]` | `nonhara:p=<v>` | `zero`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UtilitySpec {
    Power { q: f64, k: f64 },
    NonHara { p: f64 },
    Zero,
}

impl UtilitySpec {
    pub fn build(&self) -> Result<SharedDual> {
        Ok(match *self {
            UtilitySpec::Power { q, k } => Arc::new(PowerDual::new(q, k)?),
            UtilitySpec::NonHara { p } => Arc::new(NonHaraDual::new(p)?),
            UtilitySpec::Zero => Arc::new(ZeroDual),
        })
    }
}

impl fmt::Display for UtilitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            UtilitySpec::Power { q, k: 1.0 } => write!(f, "power:q={q}"),
            UtilitySpec::Power { q, k } => write!(f, "power:q={q},k={k}"),
            UtilitySpec::NonHara { p } => write!(f, "nonhara:p={p}"),
            UtilitySpec::Zero => f.write_str("zero"),
        }
    }
}

impl FromStr for UtilitySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let fail = |reason: &str| Error::UtilitySpec {
            spec: s.to_string(),
            reason: reason.to_string(),
        };
        let text = s.trim();
        if text == "zero" {
            return Ok(UtilitySpec::Zero);
        }
        let (family, args) = text
            .split_once(':')
            .ok_or_else(|| fail("expected `power:...`, `nonhara:...` or `zero`"))?;
        let mut fields = Vec::new();
        for part in args.split(',') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| fail("arguments must be key=value"))?;
            let value: f64 = parse_number(value.trim()).ok_or_else(|| fail("bad number"))?;
            fields.push((key.trim(), value));
        }
        let get = |name: &str| fields.iter().find(|(k, _)| *k == name).map(|(_, v)| *v);
        let unknown = |allowed: &[&str]| fields.iter().any(|(k, _)| !allowed.contains(k));
        match family.trim() {
            "power" => {
                if unknown(&["q", "k"]) {
                    return Err(fail("power accepts only q and k"));
                }
                let q = get("q").ok_or_else(|| fail("power requires q"))?;
                Ok(UtilitySpec::Power {
                    q,
                    k: get("k").unwrap_or(1.0),
                })
            }
            "nonhara" => {
                if unknown(&["p"]) {
                    return Err(fail("nonhara accepts only p"));
                }
                let p = get("p").ok_or_else(|| fail("nonhara requires p"))?;
                Ok(UtilitySpec::NonHara { p })
            }
            _ => Err(fail("unknown utility family")),
        }
    }
}

/// Accepts plain decimals and simple fractions such as `-1/3`.
pub(crate) fn parse_number(text: &str) -> Option<f64> {
    if let Some((num, den)) = text.split_once('/') {
        let num: f64 = num.trim().parse().ok()?;
        let den: f64 = den.trim().parse().ok()?;
        if den == 0.0 {
            return None;
        }
        Some(num / den)
    } else {
        text.parse().ok()
    }
}

/// Parses the utility spec grammar straight into a dual.
pub fn parse_dual(spec: &str) -> Result<SharedDual> {
    spec.parse::<UtilitySpec>()?.build()
}
