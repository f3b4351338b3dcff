//! Column-named result tables, the common currency of the CSV writer and
//! the SVG renderer.

use std::fmt;

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        if v.is_finite() {
            Cell::Float(v)
        } else {
            Cell::Empty
        }
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Int(i) => Some(i as f64),
            Cell::Float(x) => Some(x),
            _ => None,
        }
    }
}

impl fmt::Display for Cell {
    // Shortest round-trip float formatting keeps the files bit-exact.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(i) => write!(f, "{i}"),
            Cell::Float(x) => write!(f, "{x:?}"),
            Cell::Text(s) => f.write_str(s),
            Cell::Bool(b) => write!(f, "{b}"),
            Cell::Empty => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            bail!("row has {} cells, table has {} columns", row.len(), self.columns.len());
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn has_columns(&self, names: &[&str]) -> bool {
        names.iter().all(|n| self.column_index(n).is_some())
    }

    /// Numeric view of a column; empty and text cells become `None`.
    pub fn numbers(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let k = self.column_index(name).with_context(|| format!("missing column `{name}`"))?;
        Ok(self.rows.iter().map(|r| r[k].as_f64()).collect())
    }

    pub fn texts(&self, name: &str) -> Result<Vec<String>> {
        let k = self.column_index(name).with_context(|| format!("missing column `{name}`"))?;
        Ok(self.rows.iter().map(|r| r[k].to_string()).collect())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.to_string()))?;
        }
        Ok(w.into_inner().context("flushing csv buffer")?)
    }

    pub fn from_csv(bytes: &[u8]) -> Result<Self> {
        let mut r = csv::Reader::from_reader(bytes);
        let columns: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            rows.push(rec.iter().map(parse_cell).collect());
        }
        Ok(Self { columns, rows })
    }
}

fn parse_cell(s: &str) -> Cell {
    if s.is_empty() {
        Cell::Empty
    } else if let Ok(i) = s.parse::<i64>() {
        Cell::Int(i)
    } else if let Ok(x) = s.parse::<f64>() {
        Cell::Float(x)
    } else if let Ok(b) = s.parse::<bool>() {
        Cell::Bool(b)
    } else {
        Cell::Text(s.to_owned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut t = Table::new(&["n", "epsilon_over_j", "label", "xi"]);
        t.push(vec![3usize.into(), 0.1f64.into(), "a,b".into(), Cell::Empty]).unwrap();
        t.push(vec![4usize.into(), (-2.0f64 / 3.0).into(), "plain".into(), 1e-300f64.into()]).unwrap();
        let bytes = t.to_csv().unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("n,epsilon_over_j,label,xi\r\n3,0.1,\"a,b\",\r\n"));
        let back = Table::from_csv(&bytes).unwrap();
        assert_eq!(back.numbers("epsilon_over_j").unwrap(), vec![Some(0.1), Some(-2.0 / 3.0)]);
        assert_eq!(back.numbers("xi").unwrap(), vec![None, Some(1e-300)]);
    }

    #[test]
    fn rejects_ragged_rows() {
        let mut t = Table::new(&["a", "b"]);
        assert!(t.push(vec![1usize.into()]).is_err());
        assert!(t.numbers("c").is_err());
    }

    #[test]
    fn non_finite_is_empty() {
        assert_eq!(Cell::from(f64::NAN), Cell::Empty);
    }
}
