//! Plain CSV tables. Every file starts with the effective configuration as
//! `#` comment lines, followed by a header row.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn cell(&self, row: usize, name: &str) -> Option<&str> {
        let c = self.column(name)?;
        self.rows.get(row).map(|r| r[c].as_str())
    }

    /// `None` for a missing column or an empty cell.
    pub fn number(&self, row: usize, name: &str) -> Option<f64> {
        self.cell(row, name).filter(|s| !s.is_empty())?.parse().ok()
    }

    pub fn numbers(&self, name: &str) -> Vec<Option<f64>> {
        (0..self.len()).map(|r| self.number(r, name)).collect()
    }

    /// Value of a two-column `key,value` table.
    pub fn lookup(&self, key: &str) -> Option<&str> {
        self.rows.iter().find(|r| r[0] == key).map(|r| r[1].as_str())
    }

    pub fn write(&self, path: &Path, preamble: &str) -> Result<()> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut out = BufWriter::new(file);
        for line in preamble.lines() {
            writeln!(out, "# {line}").map_err(|e| CliError::io(path, e))?;
        }
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |source| CliError::Csv {
            path: path.to_path_buf(),
            source,
        };
        w.write_record(&self.columns).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush().map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Table> {
        let csv_err = |source| CliError::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(csv_err)?;
        let columns = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec.map_err(csv_err)?.iter().map(String::from).collect());
        }
        Ok(Table { columns, rows })
    }
}

/// Shortest representation that reads back to the same `f64`.
pub fn num(x: f64) -> String {
    x.to_string()
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
