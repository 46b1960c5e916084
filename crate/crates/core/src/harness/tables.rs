//! Regeneration of the reference tables from the closed-form paths.

use rayon::prelude::*;

use crate::dual::{NonHaraDual, PowerDual, SharedDual};
use crate::error::{Error, Result};
use crate::feynman_kac::QuadratureConfig;
use crate::market::{DerivedParams, MarketParams};
use crate::strategy::{
    nonhara_consumption_strategy, nonhara_terminal_strategy, power_power_strategy, ProblemSpec,
};
use crate::turnpike::{
    convergence_rates, limit_strategy, nonhara_consumption_limit, r_of_t, relative_errors, ErrorSeries,
};

pub const DEFAULT_TIMES: [f64; 7] = [1.0, 2.0, 5.0, 10.0, 25.0, 50.0, 100.0];
pub const DEFAULT_RATES: [f64; 3] = [0.02, 0.06, 0.10];
pub const DEFAULT_WEALTH: f64 = 10.0;
pub const TABLE5_WEALTH: [f64; 3] = [1.0, 10.0, 100.0];

/// Power–power cases of table 1 as `(label, q1, q2)`.
pub const POWER_CASES: [(&str, f64, f64); 3] = [
    ("case1", -0.5, -2.0),
    ("case2", -2.0, -0.5),
    ("case3", -0.5, -0.25),
];

/// Non-HARA parameter of the terminal-utility example (tables 2 and 3).
pub const EXAMPLE1_P: f64 = 0.75;
/// Non-HARA parameter of the consumption-utility example (tables 4 and 5).
pub const EXAMPLE2_P: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Column {
    PiStar,
    CStar,
    RT,
    Rc,
    EM,
    E,
    F,
    AbsErr,
    CN,
}

impl Column {
    pub const ALL: [Column; 9] = [
        Column::PiStar,
        Column::CStar,
        Column::RT,
        Column::Rc,
        Column::EM,
        Column::E,
        Column::F,
        Column::AbsErr,
        Column::CN,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Column::PiStar => "pi_star",
            Column::CStar => "c_star",
            Column::RT => "R_t",
            Column::Rc => "Rc",
            Column::EM => "e_M",
            Column::E => "e",
            Column::F => "f",
            Column::AbsErr => "abs_err",
            Column::CN => "c_n",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

/// Value columns present in each table.
pub fn columns(id: u32) -> Result<&'static [Column]> {
    Ok(match id {
        1 | 5 => &[Column::PiStar],
        2 => &[Column::PiStar, Column::EM],
        3 => &[Column::CStar, Column::RT, Column::Rc, Column::F, Column::AbsErr, Column::CN],
        4 => &[Column::PiStar, Column::E, Column::EM],
        _ => return Err(Error::UnknownTable(id)),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub table_id: u32,
    pub case: String,
    pub r: f64,
    pub delta: f64,
    pub t: f64,
    pub x: f64,
    /// Indexed like [`Column::ALL`]; `None` where the table has no entry.
    pub values: [Option<f64>; 9],
}

impl TableRow {
    pub fn get(&self, column: Column) -> Option<f64> {
        self.values[column as usize]
    }

    fn set(&mut self, column: Column, value: f64) {
        self.values[column as usize] = Some(value);
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TableOverrides {
    pub times: Option<Vec<f64>>,
    pub rates: Option<Vec<f64>>,
    /// Wealth levels; tables 1–4 use every level as a separate case block.
    pub wealth: Option<Vec<f64>>,
}

fn ordered(name: &'static str, values: &[f64]) -> Result<()> {
    if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidArgument {
            name,
            value: values.first().copied().unwrap_or(f64::NAN),
            reason: "grid values must be positive and finite",
        });
    }
    Ok(())
}

// One (case, r) block of a table: rows for every t in order.
#[derive(Debug, Clone)]
struct Block {
    case: String,
    r: f64,
    x: f64,
    kind: BlockKind,
}

#[derive(Debug, Clone, Copy)]
enum BlockKind {
    PowerPower(f64, f64),
    Example1,
    Example2,
}

/// Rows of table `id` in `(case, r, t)` order. `threads = 0` uses all cores.
pub fn run_table(id: u32, overrides: &TableOverrides, threads: usize) -> Result<Vec<TableRow>> {
    let cols = columns(id)?;
    let times = overrides.times.clone().unwrap_or_else(|| DEFAULT_TIMES.to_vec());
    let rates = overrides.rates.clone().unwrap_or_else(|| DEFAULT_RATES.to_vec());
    ordered("t", &times)?;
    ordered("r", &rates)?;
    if !times.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidArgument {
            name: "t",
            value: f64::NAN,
            reason: "times must be strictly increasing",
        });
    }
    let wealth = match &overrides.wealth {
        Some(w) => {
            ordered("x", w)?;
            w.clone()
        }
        None if id == 5 => TABLE5_WEALTH.to_vec(),
        None => vec![DEFAULT_WEALTH],
    };

    let mut blocks = Vec::new();
    let label = |base: &str, x: f64| {
        if wealth.len() > 1 || id == 5 {
            if id == 5 {
                format!("x={x}")
            } else {
                format!("{base},x={x}")
            }
        } else {
            base.to_string()
        }
    };
    match id {
        1 => {
            for &(name, q1, q2) in &POWER_CASES {
                for &x in &wealth {
                    for &r in &rates {
                        blocks.push(Block { case: label(name, x), r, x, kind: BlockKind::PowerPower(q1, q2) });
                    }
                }
            }
        }
        _ => {
            let (name, kind) = if id <= 3 {
                ("example1", BlockKind::Example1)
            } else {
                ("example2", BlockKind::Example2)
            };
            for &x in &wealth {
                for &r in &rates {
                    blocks.push(Block { case: label(name, x), r, x, kind });
                }
            }
        }
    }

    let compute = || -> Result<Vec<Vec<TableRow>>> {
        blocks
            .par_iter()
            .map(|b| block_rows(id, b, &times, cols))
            .collect()
    };
    let nested = if threads == 0 {
        compute()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|_| Error::InvalidConfig("could not start worker threads"))?
            .install(compute)?
    };
    Ok(nested.into_iter().flatten().collect())
}

fn market(r: f64) -> Result<(MarketParams, DerivedParams)> {
    let m = MarketParams::reference(r);
    Ok((m, m.derive()?))
}

fn block_rows(id: u32, b: &Block, times: &[f64], cols: &[Column]) -> Result<Vec<TableRow>> {
    let (m, d) = market(b.r)?;
    let cfg = QuadratureConfig::default();
    let mut rows = Vec::with_capacity(times.len());
    let mut abs_errors = Vec::with_capacity(times.len());
    let limit = match b.kind {
        BlockKind::PowerPower(..) => None,
        BlockKind::Example1 => {
            let u1: SharedDual = std::sync::Arc::new(NonHaraDual::new(EXAMPLE1_P)?);
            let q = u1.q0().unwrap_or_default();
            let u2: SharedDual = std::sync::Arc::new(PowerDual::unit(q)?);
            let spec = ProblemSpec::new(u1, u2, m)?;
            Some(limit_strategy(&spec, b.x, &cfg)?)
        }
        BlockKind::Example2 => Some(nonhara_consumption_limit(EXAMPLE2_P, &d, b.x)?),
    };
    for &t in times {
        let mut row = TableRow {
            table_id: id,
            case: b.case.clone(),
            r: b.r,
            delta: d.delta,
            t,
            x: b.x,
            values: [None; 9],
        };
        let point = match b.kind {
            BlockKind::PowerPower(q1, q2) => power_power_strategy(q1, q2, &d, b.x, t)?,
            BlockKind::Example1 => nonhara_terminal_strategy(EXAMPLE1_P, &d, b.x, t)?,
            BlockKind::Example2 => nonhara_consumption_strategy(EXAMPLE2_P, &d, b.x, t)?,
        };
        row.set(Column::PiStar, point.fraction);
        row.set(Column::CStar, point.consumption);
        if let Some(limit) = &limit {
            let errs = relative_errors(&point, limit)?;
            row.set(Column::EM, errs.e_merton);
            row.set(Column::E, errs.e_limit);
            row.set(Column::AbsErr, errs.abs_err);
            abs_errors.push(errs.abs_err);
            if let Some(f) = errs.f {
                row.set(Column::F, f);
            }
        }
        if let BlockKind::Example1 = b.kind {
            let q = NonHaraDual::new(EXAMPLE1_P)?.q();
            let rt = r_of_t(q, q, &d, t);
            row.set(Column::RT, rt);
            row.set(Column::Rc, rt * point.consumption);
        }
        rows.push(row);
    }
    if cols.contains(&Column::CN) {
        let series = ErrorSeries::new(times.to_vec(), abs_errors)?;
        for (row, c) in rows.iter_mut().zip(convergence_rates(&series)) {
            row.values[Column::CN as usize] = c;
        }
    }
    // Keep only the table's own columns.
    for row in &mut rows {
        for c in Column::ALL {
            if !cols.contains(&c) {
                row.values[c as usize] = None;
            }
        }
    }
    Ok(rows)
}
