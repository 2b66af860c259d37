//! Deterministic CSV output.
//!
//! Every table has a header row, `\n` line endings, `.` as the decimal
//! separator and reals printed with 10 significant digits.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(i64),
    Real(f64),
    Empty,
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Real)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Real(x) => format_real(*x),
            Cell::Empty => String::new(),
        }
    }
}

/// Fixed-point rendering with 10 significant digits.
pub fn format_real(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // Round to 10 significant digits first so the exponent is read off the
    // rounded value (0.99999999999 → 1.000000000).
    let sci = format!("{:.9e}", x);
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..].parse().expect("integer exponent");
    let decimals = (9 - exp).max(0) as usize;
    format!("{:.*}", decimals, x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> std::result::Result<Vec<u8>, String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).map_err(|e| e.to_string())?;
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.header.len() {
                return Err(format!(
                    "row {} has {} cells, header has {}",
                    i + 1,
                    row.len(),
                    self.header.len()
                ));
            }
            w.write_record(row.iter().map(Cell::render)).map_err(|e| e.to_string())?;
        }
        w.into_inner().map_err(|e| e.to_string())
    }
}

/// Writes `table` to `path`, replacing any existing file.
pub fn write_table(table: &Table, path: &Path) -> Result<()> {
    let bytes = table.to_csv().map_err(|m| Error::invalid(path, m))?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_significant_digits() {
        assert_eq!(format_real(0.75), "0.7500000000");
        assert_eq!(format_real(1.0), "1.000000000");
        assert_eq!(format_real(1.0 / 3.0), "0.3333333333");
        assert_eq!(format_real(2.5e-8), "0.00000002500000000");
        assert_eq!(format_real(123.456), "123.4560000");
        assert_eq!(format_real(0.0), "0");
        assert_eq!(format_real(-0.25), "-0.2500000000");
        assert_eq!(format_real(0.99999999999), "1.000000000");
    }

    #[test]
    fn writes_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new(["fraction", "accuracy"]);
        for f in [0.0, 0.5, 1.0] {
            t.push(vec![f.into(), 0.75.into()]);
        }
        write_table(&t, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("fraction,accuracy\n0,0.7500000000\n"));
        assert!(!text.contains('\r'));
        let first = fs::read(&path).unwrap();
        write_table(&t, &path).unwrap();
        assert_eq!(first, fs::read(&path).unwrap());
    }

    #[test]
    fn empty_table_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        write_table(&Table::new(["a", "b"]), &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "a,b\n");
    }

    #[test]
    fn ragged_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new(["a", "b"]);
        t.push(vec![Cell::Int(1)]);
        assert!(write_table(&t, &dir.path().join("r.csv")).is_err());
    }

    #[test]
    fn unwritable_path_errors() {
        let dir = tempfile::tempdir().unwrap();
        let t = Table::new(["a"]);
        let err = write_table(&t, &dir.path().join("missing").join("x.csv")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
