use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// 12 significant digits, shortest form: trailing zeros dropped, exponent
/// only outside `[1e-5, 1e12)`.
pub fn format_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Serialize)]
pub struct Metadata<'a> {
    pub table: &'a str,
    pub subcommand: &'a str,
    pub scenario: &'a str,
    pub config_sha256: &'a str,
    pub seed: u64,
    pub code_version: &'a str,
    pub rows: usize,
}

/// Writes `<dir>/<name>.csv` and its sibling `<name>.meta.json`.
pub fn emit_csv(table: &Table, dir: &Path, meta: &Metadata) -> Result<PathBuf, CliError> {
    let path = dir.join(format!("{}.csv", table.name));
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |e: std::io::Error| CliError::Io { path, source: e }
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&path)
        .map_err(|e| CliError::Io {
            path: path.clone(),
            source: e.into(),
        })?;
    let csv_err = |e: csv::Error| CliError::Io {
        path: path.clone(),
        source: e.into(),
    };
    w.write_record(&table.columns).map_err(csv_err)?;
    for row in &table.rows {
        let fields = row.iter().map(|c| match c {
            Cell::Num(x) => format_num(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        });
        w.write_record(fields).map_err(csv_err)?;
    }
    w.flush().map_err(io(&path))?;
    let meta_path = dir.join(format!("{}.meta.json", table.name));
    let mut json = serde_json::to_string_pretty(meta).expect("metadata serializes");
    let _ = writeln!(json);
    std::fs::write(&meta_path, json).map_err(io(&meta_path))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_num(0.325), "0.325");
        assert_eq!(format_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_num(2.0), "2");
        assert_eq!(format_num(-1234.5), "-1234.5");
        assert_eq!(format_num(1.0e-7 / 3.0), "3.33333333333e-8");
        assert_eq!(format_num(2.5e15), "2.5e15");
        assert_eq!(format_num(123456789012.6), "123456789013");
    }

    #[test]
    fn two_rows_give_three_lines() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec![1usize.into(), 0.5.into()]);
        t.push(vec![2usize.into(), "x".into()]);
        let meta = Metadata {
            table: "t",
            subcommand: "test",
            scenario: "s",
            config_sha256: "0",
            seed: 0,
            code_version: "0",
            rows: 2,
        };
        let path = emit_csv(&t, dir.path(), &meta).unwrap();
        assert_eq!(std::fs::read_to_string(path).unwrap(), "a,b\n1,0.5\n2,x\n");
        assert!(dir.path().join("t.meta.json").exists());
    }

    #[test]
    fn round_trip_is_within_twelve_digits() {
        for &x in &[std::f64::consts::PI, 1.0 / 7.0, 6.02214076e23, -2.718281828459045e-9, 0.1] {
            let y: f64 = format_num(x).parse().unwrap();
            // half a unit in the twelfth digit
            assert!((x - y).abs() <= 5e-12 * x.abs(), "{x} {y}");
        }
    }
}
