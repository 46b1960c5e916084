//! CSV and markdown rendering of table rows, and reading golden files.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::harness::tables::{Column, TableRow};

pub const CSV_HEADER: [&str; 15] = [
    "table_id", "case", "r", "delta", "t", "x", "pi_star", "c_star", "R_t", "Rc", "e_M", "e", "f",
    "abs_err", "c_n",
];

pub const DEFAULT_PRECISION: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Markdown,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "markdown" | "md" => Ok(Format::Markdown),
            _ => Err(Error::UtilitySpec {
                spec: s.to_string(),
                reason: "format must be csv or markdown".to_string(),
            }),
        }
    }
}

/// Fixed-point rendering with `decimals` places. Ties round to even on the
/// exact binary value; a negative zero prints without its sign.
pub fn format_value(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => s,
    }
}

/// Shortest round-trip rendering of a grid coordinate, switching to
/// exponent notation far from unit scale.
pub fn format_coord(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn cells(row: &TableRow, decimals: usize) -> Vec<String> {
    let mut out = vec![
        row.table_id.to_string(),
        row.case.clone(),
        format_coord(row.r),
        format_coord(row.delta),
        format_coord(row.t),
        format_coord(row.x),
    ];
    out.extend(
        Column::ALL
            .iter()
            .map(|&c| row.get(c).map(|v| format_value(v, decimals)).unwrap_or_default()),
    );
    out
}

pub fn to_csv(rows: &[TableRow], decimals: usize) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let io = |e: csv::Error| Error::Config {
        line: 0,
        message: e.to_string(),
    };
    w.write_record(CSV_HEADER).map_err(io)?;
    for row in rows {
        w.write_record(cells(row, decimals)).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config {
        line: 0,
        message: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Markdown table with only the columns that carry values.
pub fn to_markdown(rows: &[TableRow], decimals: usize) -> String {
    let used: Vec<Column> = Column::ALL
        .into_iter()
        .filter(|&c| rows.iter().any(|r| r.get(c).is_some()))
        .collect();
    let mut out = String::new();
    let mut header = vec!["case", "r", "delta", "t", "x"];
    header.extend(used.iter().map(|c| c.name()));
    out.push_str(&format!("| {} |\n", header.join(" | ")));
    out.push_str(&format!("|{}\n", "---|".repeat(header.len())));
    for row in rows {
        let mut c = vec![
            row.case.clone(),
            format_coord(row.r),
            format_coord(row.delta),
            format_coord(row.t),
            format_coord(row.x),
        ];
        c.extend(used.iter().map(|&col| row.get(col).map(|v| format_value(v, decimals)).unwrap_or_default()));
        out.push_str(&format!("| {} |\n", c.join(" | ")));
    }
    out
}

pub fn render(rows: &[TableRow], format: Format, decimals: usize) -> Result<String> {
    match format {
        Format::Csv => to_csv(rows, decimals),
        Format::Markdown => Ok(to_markdown(rows, decimals)),
    }
}

/// One row of a golden CSV: grid coordinates and the printed values.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldenRow {
    pub case: String,
    pub r: f64,
    pub t: f64,
    pub x: f64,
    pub values: BTreeMap<Column, f64>,
}

pub fn parse_csv(text: &str) -> Result<Vec<GoldenRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let bad = |line: usize, message: String| Error::Config { line, message };
    let headers = reader.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let (case, r, t, x) = match (find("case"), find("r"), find("t"), find("x")) {
        (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
        _ => return Err(bad(1, "missing grid columns".to_string())),
    };
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| bad(line, e.to_string()))?;
        let num = |idx: usize| -> Result<f64> {
            record
                .get(idx)
                .unwrap_or("")
                .parse()
                .map_err(|_| bad(line, format!("bad number in column {}", headers.get(idx).unwrap_or("?"))))
        };
        let mut values = BTreeMap::new();
        for (idx, name) in headers.iter().enumerate() {
            if let Some(col) = Column::from_name(name) {
                if !record.get(idx).unwrap_or("").is_empty() {
                    values.insert(col, num(idx)?);
                }
            }
        }
        out.push(GoldenRow {
            case: record.get(case).unwrap_or("").to_string(),
            r: num(r)?,
            t: num(t)?,
            x: num(x)?,
            values,
        });
    }
    Ok(out)
}
