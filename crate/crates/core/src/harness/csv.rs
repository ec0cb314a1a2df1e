//! Minimal numeric CSV: header row, `.` decimals, 17 significant digits.

use std::path::Path;

use crate::error::{Error, Result};

/// Formats with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Column-major numeric table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), columns: vec![Vec::new(); header.len()] }
    }

    pub fn from_columns(header: &[&str], columns: Vec<Vec<f64>>) -> Result<Self> {
        if header.len() != columns.len() {
            return Err(Error::ShapeMismatch("header and columns differ in length".into()));
        }
        let n = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::ShapeMismatch("ragged columns".into()));
        }
        Ok(Self { header: header.iter().map(|s| s.to_string()).collect(), columns })
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::ShapeMismatch(format!("row of {} for {} columns", row.len(), self.columns.len())));
        }
        for (c, v) in self.columns.iter_mut().zip(row) {
            c.push(*v);
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.len())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.header.iter().position(|h| h == name).map(|i| self.columns[i].as_slice())
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in 0..self.rows() {
            let row: Vec<String> = self.columns.iter().map(|c| fmt_f64(c[r])).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Config("empty CSV".into()))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let mut columns = vec![Vec::new(); header.len()];
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != header.len() {
                return Err(Error::Config(format!("CSV row {} has {} fields, expected {}", i + 2, fields.len(), header.len())));
            }
            for (c, f) in columns.iter_mut().zip(fields) {
                let v: f64 = f
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("CSV row {}: cannot parse `{}`", i + 2, f.trim())))?;
                c.push(v);
            }
        }
        Ok(Self { header, columns })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}
