//! Runs a [`ScenarioConfig`]: one strategy per grid cell, the limiting
//! strategy per `(r, x)` and the convergence rates of `|π* − π_M|`.

use rayon::prelude::*;

use crate::error::Result;
use crate::feynman_kac::QuadratureConfig;
use crate::harness::config::ScenarioConfig;
use crate::harness::output::{format_coord, format_value, Format};
use crate::strategy::{strategy, Method, ProblemSpec, StrategyPoint};
use crate::turnpike::{
    convergence_rates, limit_strategy, relative_errors, ConsumptionLimit, ErrorSeries, RelativeErrors,
    TurnpikeLimit,
};

pub const SCENARIO_HEADER: [&str; 14] = [
    "r", "delta", "x", "t", "y", "pi_star", "amount", "c_star", "e_M", "e", "f", "abs_err", "c_n", "error",
];

/// One output line. `t = ∞` marks the limit summary of a block.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRow {
    pub r: f64,
    pub delta: f64,
    pub x: f64,
    pub t: f64,
    pub point: Option<StrategyPoint>,
    pub limit: Option<TurnpikeLimit>,
    pub errors: Option<RelativeErrors>,
    pub c_n: Option<f64>,
    pub error: Option<String>,
}

impl ScenarioRow {
    fn empty(r: f64, delta: f64, x: f64, t: f64) -> Self {
        Self {
            r,
            delta,
            x,
            t,
            point: None,
            limit: None,
            errors: None,
            c_n: None,
            error: None,
        }
    }

    pub fn is_limit(&self) -> bool {
        self.t.is_infinite()
    }
}

pub fn run_scenario(cfg: &ScenarioConfig, threads: usize) -> Result<Vec<ScenarioRow>> {
    // Validate the utilities once up front so a bad spec fails the whole run.
    cfg.utility1.build()?;
    cfg.utility2.build()?;
    let blocks: Vec<(f64, f64)> = cfg
        .r
        .iter()
        .flat_map(|&r| cfg.x.iter().map(move |&x| (r, x)))
        .collect();
    let compute = || -> Vec<Vec<ScenarioRow>> { blocks.par_iter().map(|&(r, x)| block(cfg, r, x)).collect() };
    let nested = if threads == 0 {
        compute()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|_| crate::error::Error::InvalidConfig("could not start worker threads"))?
            .install(compute)
    };
    Ok(nested.into_iter().flatten().collect())
}

fn block(cfg: &ScenarioConfig, r: f64, x: f64) -> Vec<ScenarioRow> {
    let market = cfg.market(r);
    let delta = market.delta;
    let quad = QuadratureConfig::default();
    let spec = cfg
        .utility1
        .build()
        .and_then(|u1| ProblemSpec::new(u1, cfg.utility2.build()?, market));
    let spec = match spec {
        Ok(s) => s,
        Err(e) => {
            let mut row = ScenarioRow::empty(r, delta, x, f64::INFINITY);
            row.error = Some(e.to_string());
            return vec![row];
        }
    };
    let limit = limit_strategy(&spec, x, &quad);
    let mut rows: Vec<ScenarioRow> = cfg
        .t
        .iter()
        .map(|&t| {
            let mut row = ScenarioRow::empty(r, delta, x, t);
            match strategy(&spec, x, t, Method::Auto, &quad) {
                Ok(p) => {
                    row.point = Some(p);
                    if let Ok(l) = &limit {
                        row.errors = relative_errors(&p, l).ok();
                    }
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect();

    // Rates only over a contiguous run of successful cells.
    if let Some(abs) = rows
        .iter()
        .map(|r| r.errors.map(|e| e.abs_err))
        .collect::<Option<Vec<f64>>>()
    {
        if let Ok(series) = ErrorSeries::new(cfg.t.clone(), abs) {
            for (row, c) in rows.iter_mut().zip(convergence_rates(&series)) {
                row.c_n = c;
            }
        }
    }

    let mut summary = ScenarioRow::empty(r, delta, x, f64::INFINITY);
    match limit {
        Ok(l) => summary.limit = Some(l),
        Err(e) => summary.error = Some(e.to_string()),
    }
    rows.push(summary);
    rows
}

fn cells(row: &ScenarioRow, decimals: usize) -> Vec<String> {
    let f = |v: Option<f64>| v.map(|v| format_value(v, decimals)).unwrap_or_default();
    let t = if row.is_limit() { "inf".to_string() } else { format_coord(row.t) };
    let (y, pi, amount, c) = match (&row.point, &row.limit) {
        (Some(p), _) => (Some(p.y), Some(p.fraction), Some(p.amount), Some(p.consumption)),
        (None, Some(l)) => {
            let c = match l.consumption {
                ConsumptionLimit::Level(c) => Some(c),
                _ => None,
            };
            (l.shadow_price, Some(l.fraction()), Some(l.amount), c)
        }
        _ => (None, None, None, None),
    };
    let e = row.errors;
    vec![
        format_coord(row.r),
        format_coord(row.delta),
        format_coord(row.x),
        t,
        f(y),
        f(pi),
        f(amount),
        f(c),
        f(e.map(|e| e.e_merton)),
        f(e.map(|e| e.e_limit)),
        f(e.and_then(|e| e.f)),
        f(e.map(|e| e.abs_err)),
        f(row.c_n),
        row.error.clone().unwrap_or_default(),
    ]
}

pub fn render(rows: &[ScenarioRow], format: Format, decimals: usize) -> Result<String> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new());
            let io = |e: csv::Error| crate::error::Error::Config {
                line: 0,
                message: e.to_string(),
            };
            w.write_record(SCENARIO_HEADER).map_err(io)?;
            for row in rows {
                w.write_record(cells(row, decimals)).map_err(io)?;
            }
            let bytes = w.into_inner().map_err(|e| crate::error::Error::Config {
                line: 0,
                message: e.to_string(),
            })?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        Format::Markdown => {
            let mut out = format!("| {} |\n|{}\n", SCENARIO_HEADER.join(" | "), "---|".repeat(SCENARIO_HEADER.len()));
            for row in rows {
                out.push_str(&format!("| {} |\n", cells(row, decimals).join(" | ")));
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> Vec<ScenarioRow> {
        run_scenario(&text.parse().unwrap(), 1).unwrap()
    }

    #[test]
    fn equal_exponents_give_merton() {
        let rows = run("[utility]\nutility1 = power:q=-3\nutility2 = power:q=-3\n[grid]\nx = 1\nt = 10\n");
        assert_eq!(rows.len(), 2);
        let p = rows[0].point.unwrap();
        assert!((p.fraction - 4.0).abs() < 1e-12);
        assert!(rows[1].is_limit() && (rows[1].limit.unwrap().merton_pi - 4.0).abs() < 1e-12);
    }

    #[test]
    fn pure_terminal_turnpike() {
        let rows = run("[utility]\nutility1 = power:q=-2\nutility2 = zero\n[grid]\nx = 5\nt = 1, 10, 100\n");
        let pis: Vec<f64> = rows[..3].iter().map(|r| r.point.unwrap().fraction).collect();
        for pi in pis {
            assert!((pi - 3.0).abs() < 1e-12);
        }
        assert!((rows[3].limit.unwrap().merton_pi - 3.0).abs() < 1e-12);
    }

    #[test]
    fn example_two_cell() {
        let rows = run(
            "[market]\nr = 0.02\n[utility]\nutility1 = power:q=-1/3\nutility2 = nonhara:p=1/4\n[grid]\nx = 10\nt = 1\n",
        );
        let p = rows[0].point.unwrap();
        let d = crate::market::MarketParams::reference(0.02).derive().unwrap();
        let closed = crate::strategy::nonhara_consumption_strategy(0.25, &d, 10.0, 1.0).unwrap();
        assert!((p.consumption / closed.consumption - 1.0).abs() < 1e-7);
        let csv = render(&rows, Format::Csv, 4).unwrap();
        assert!(csv.starts_with(&SCENARIO_HEADER.join(",")));
        assert!(csv.lines().nth(2).unwrap().starts_with("0.02,0.03,10,inf,"));
    }

    #[test]
    fn cell_errors_are_reported_not_fatal() {
        let rows = run("[utility]\nutility1 = power:q=-2\nutility2 = zero\n[grid]\nx = -1, 1\nt = 1, 2\n");
        assert_eq!(rows.len(), 6);
        assert!(rows[..3].iter().all(|r| r.error.as_deref().is_some_and(|e| e.contains("wealth"))));
        assert!(rows[3..].iter().all(|r| r.error.is_none()));
    }
}
