//! Line-oriented scenario files: `[section]` headers and `key = value`
//! lines, `#` or `;` comments.
//!
//! ```text
//! [market]
//! r = 0.02
//! sigma = 0.2
//! theta = 0.2
//! delta_rule = 0.02+r/2
//!
//! [utility]
//! utility1 = nonhara:p=3/4
//! utility2 = power:q=-1/3
//!
//! [grid]
//! x = 10
//! t = 1, 2, 5, 10
//! r = 0.02, 0.06
//!
//! [output]
//! format = csv
//! precision = 4
//! ```

use std::path::PathBuf;
use std::str::FromStr;

use crate::dual::{self, UtilitySpec};
use crate::error::{Error, Result};
use crate::harness::output::{Format, DEFAULT_PRECISION};
use crate::market::MarketParams;

pub const MIN_PRECISION: usize = 4;
pub const MAX_PRECISION: usize = 12;

/// `delta = constant + slope * r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaRule {
    pub constant: f64,
    pub slope: f64,
}

impl DeltaRule {
    pub const REFERENCE: DeltaRule = DeltaRule {
        constant: 0.02,
        slope: 0.5,
    };

    pub fn fixed(delta: f64) -> Self {
        Self {
            constant: delta,
            slope: 0.0,
        }
    }

    pub fn at(&self, r: f64) -> f64 {
        self.constant + self.slope * r
    }
}

impl FromStr for DeltaRule {
    type Err = String;

    /// Affine expressions in `r` such as `0.02+r/2`, `0.5*r + 0.02` or `0.03`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let text: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if text.is_empty() {
            return Err("empty delta rule".to_string());
        }
        let mut rule = DeltaRule::fixed(0.0);
        let mut terms = Vec::new();
        let mut start = 0;
        for (i, c) in text.char_indices() {
            // A sign starts a new term unless it follows an exponent marker.
            let prev = text[..i].chars().last();
            if i > 0 && (c == '+' || c == '-') && !matches!(prev, Some('e' | 'E' | '*' | '/')) {
                terms.push(&text[start..i]);
                start = i;
            }
        }
        terms.push(&text[start..]);
        for term in terms {
            let (sign, body) = match term.strip_prefix('-') {
                Some(rest) => (-1.0, rest),
                None => (1.0, term.strip_prefix('+').unwrap_or(term)),
            };
            let bad = || format!("cannot read term {term:?}");
            if body.contains('r') {
                let coef = if body == "r" {
                    1.0
                } else if let Some(den) = body.strip_prefix("r/") {
                    1.0 / dual::parse_number(den).filter(|d| *d != 0.0).ok_or_else(bad)?
                } else if let Some(c) = body.strip_suffix("*r") {
                    dual::parse_number(c).ok_or_else(bad)?
                } else if let Some(c) = body.strip_prefix("r*") {
                    dual::parse_number(c).ok_or_else(bad)?
                } else {
                    return Err(bad());
                };
                rule.slope += sign * coef;
            } else {
                rule.constant += sign * dual::parse_number(body).ok_or_else(bad)?;
            }
        }
        if rule.constant.is_finite() && rule.slope.is_finite() {
            Ok(rule)
        } else {
            Err("delta rule is not finite".to_string())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sharpe {
    Theta(f64),
    Mu(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub sigma: f64,
    pub sharpe: Sharpe,
    pub delta: DeltaRule,
    /// Terminal-wealth dual.
    pub utility1: UtilitySpec,
    /// Consumption dual.
    pub utility2: UtilitySpec,
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    pub format: Format,
    /// Decimal places in the output.
    pub precision: usize,
    pub path: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn market(&self, r: f64) -> MarketParams {
        let delta = self.delta.at(r);
        match self.sharpe {
            Sharpe::Theta(theta) => MarketParams::with_theta(r, self.sigma, theta, delta),
            Sharpe::Mu(mu) => MarketParams::with_mu(r, self.sigma, mu, delta),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut section = String::new();
        let mut r_single = None;
        let mut sigma = None;
        let mut theta = None;
        let mut mu = None;
        let mut delta = None;
        let mut u1 = None;
        let mut u2 = None;
        let mut grid_x = None;
        let mut grid_t = None;
        let mut grid_r = None;
        let mut format = Format::default();
        let mut precision = DEFAULT_PRECISION;
        let mut path = None;

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| Error::Config { line, message };
            let content = raw.split(['#', ';']).next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| err("unterminated section header".to_string()))?
                    .trim();
                if !["market", "utility", "grid", "output"].contains(&name) {
                    return Err(err(format!("unknown section [{name}]")));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, found {content:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let number = |v: &str| -> Result<f64> {
                dual::parse_number(v)
                    .filter(|n| n.is_finite())
                    .ok_or_else(|| err(format!("{section}.{key}: {v:?} is not a number")))
            };
            let list = |v: &str| -> Result<Vec<f64>> {
                let values = v.split(',').map(|p| number(p.trim())).collect::<Result<Vec<_>>>()?;
                if values.is_empty() {
                    return Err(err(format!("{section}.{key}: empty list")));
                }
                Ok(values)
            };
            match (section.as_str(), key) {
                ("", _) => return Err(err(format!("key {key:?} outside any section"))),
                ("market", "r") => r_single = Some(number(value)?),
                ("market", "sigma") => sigma = Some(number(value)?),
                ("market", "theta") => theta = Some(number(value)?),
                ("market", "mu") => mu = Some(number(value)?),
                ("market", "delta") => delta = Some(DeltaRule::fixed(number(value)?)),
                ("market", "delta_rule") => {
                    delta = Some(value.parse().map_err(|m| err(format!("market.delta_rule: {m}")))?)
                }
                ("utility", "utility1") => {
                    u1 = Some(value.parse::<UtilitySpec>().map_err(|e| err(e.to_string()))?)
                }
                ("utility", "utility2") => {
                    u2 = Some(value.parse::<UtilitySpec>().map_err(|e| err(e.to_string()))?)
                }
                ("grid", "x") => grid_x = Some(list(value)?),
                ("grid", "t") => grid_t = Some(list(value)?),
                ("grid", "r") => grid_r = Some(list(value)?),
                ("output", "format") => format = value.parse().map_err(|e: Error| err(e.to_string()))?,
                ("output", "precision") => {
                    let p: usize = value
                        .parse()
                        .map_err(|_| err(format!("output.precision: {value:?} is not an integer")))?;
                    if !(MIN_PRECISION..=MAX_PRECISION).contains(&p) {
                        return Err(err(format!(
                            "output.precision must lie in [{MIN_PRECISION}, {MAX_PRECISION}], got {p}"
                        )));
                    }
                    precision = p;
                }
                ("output", "path") => path = Some(PathBuf::from(value)),
                (s, k) => return Err(err(format!("unknown key {s}.{k}"))),
            }
        }

        let missing = |what: &str| Error::Config {
            line: 0,
            message: format!("missing {what}"),
        };
        let sharpe = match (theta, mu) {
            (Some(_), Some(_)) => {
                return Err(Error::Config {
                    line: 0,
                    message: "give only one of market.theta and market.mu".to_string(),
                })
            }
            (Some(t), None) => Sharpe::Theta(t),
            (None, Some(m)) => Sharpe::Mu(m),
            (None, None) => Sharpe::Theta(0.2),
        };
        let r = grid_r.or(r_single.map(|r| vec![r])).unwrap_or_else(|| vec![0.02]);
        let t = grid_t.ok_or_else(|| missing("grid.t"))?;
        if !t.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config {
                line: 0,
                message: "grid.t must be strictly increasing".to_string(),
            });
        }
        Ok(Self {
            sigma: sigma.unwrap_or(0.2),
            sharpe,
            delta: delta.unwrap_or(DeltaRule::REFERENCE),
            utility1: u1.ok_or_else(|| missing("utility.utility1"))?,
            utility2: u2.ok_or_else(|| missing("utility.utility2"))?,
            x: grid_x.ok_or_else(|| missing("grid.x"))?,
            t,
            r,
            format,
            precision,
            path,
        })
    }
}

impl FromStr for ScenarioConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
# Example 1 sweep
[market]
sigma = 0.2
theta = 0.2
delta_rule = 0.02 + r/2

[utility]
utility1 = nonhara:p=3/4
utility2 = power:q=-1/3   ; consumption

[grid]
x = 10
t = 1, 2, 5
r = 0.02, 0.06, 0.10

[output]
format = markdown
precision = 6
";

    #[test]
    fn parses_sample() {
        let cfg: ScenarioConfig = SAMPLE.parse().unwrap();
        assert_eq!(cfg.r, vec![0.02, 0.06, 0.10]);
        assert_eq!(cfg.t, vec![1.0, 2.0, 5.0]);
        assert_eq!(cfg.utility1, UtilitySpec::NonHara { p: 0.75 });
        assert_eq!(cfg.format, Format::Markdown);
        assert_eq!(cfg.precision, 6);
        assert!((cfg.market(0.06).delta - 0.05).abs() < 1e-15);
    }

    #[test]
    fn delta_rules() {
        let cases = [("0.02+r/2", 0.02, 0.5), ("0.5*r+0.02", 0.02, 0.5), ("0.03", 0.03, 0.0), ("r-1e-3", -1e-3, 1.0)];
        for (text, c, s) in cases {
            let rule: DeltaRule = text.parse().unwrap();
            assert!((rule.constant - c).abs() < 1e-15 && (rule.slope - s).abs() < 1e-15, "{text}");
        }
        assert!("0.02+x".parse::<DeltaRule>().is_err());
        assert!("r/0".parse::<DeltaRule>().is_err());
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let text = "[market]\nr = 0.02\n[grid]\nt = 1, two\n";
        match ScenarioConfig::parse(text) {
            Err(Error::Config { line, message }) => {
                assert_eq!(line, 4);
                assert!(message.contains("grid.t"));
            }
            other => panic!("{other:?}"),
        }
        let text = "[output]\nprecision = 3\n";
        assert!(matches!(ScenarioConfig::parse(text), Err(Error::Config { line: 2, .. })));
        let text = "[utility]\nutility1 = power:q\n";
        assert!(matches!(ScenarioConfig::parse(text), Err(Error::Config { line: 2, .. })));
        let text = "[grid]\nx = 1\nt = 2, 1\n[utility]\nutility1 = zero\nutility2 = zero\n";
        assert!(matches!(ScenarioConfig::parse(text), Err(Error::Config { line: 0, .. })));
    }
}
