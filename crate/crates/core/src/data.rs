//! The observation matrix and its delimited-text format.
//!
//! One row per time index, one column per margin, comma or tab separated.
//! A first line that does not parse as numbers is taken as a header. Blank
//! lines and lines starting with `#` are skipped. Non-finite entries are
//! rejected with their line and column.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// `n × d` matrix of finite observations, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Vec<f64>,
    n: usize,
    d: usize,
}

impl DataMatrix {
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidArgument(format!(
                "data matrix must be non-empty (got {n} x {d})"
            )));
        }
        if values.len() != n * d {
            return Err(Error::InvalidArgument(format!(
                "expected {} values for a {n} x {d} matrix, got {}",
                n * d,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "entry at row {}, column {}",
                pos / d + 1,
                pos % d + 1
            )));
        }
        Ok(Self { values, n, d })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidArgument("ragged rows".into()));
        }
        Self::new(rows.len(), d, rows.concat())
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let d = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidArgument("columns of unequal length".into()));
        }
        let mut values = Vec::with_capacity(n * d);
        for i in 0..n {
            values.extend(columns.iter().map(|c| c[i]));
        }
        Self::new(n, d, values)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.d + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Rows `start..end` (0-based, half open) as a new matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n {
            return Err(Error::InvalidWindow {
                k: start + 1,
                l: end,
                n: self.n,
            });
        }
        Self::new(end - start, self.d, self.values[start * self.d..end * self.d].to_vec())
    }

    /// Stacks `other` below `self`.
    pub fn concat(&self, other: &DataMatrix) -> Result<Self> {
        if self.d != other.d {
            return Err(Error::InvalidArgument("dimension mismatch".into()));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Self::new(self.n + other.n, self.d, values)
    }

    pub fn read_delimited<R: BufRead>(reader: R) -> Result<Self> {
        let mut values = Vec::new();
        let mut d = 0usize;
        let mut seen_content = false;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let sep = if trimmed.contains('\t') { '\t' } else { ',' };
            let fields: Vec<&str> = trimmed.split(sep).map(str::trim).collect();
            let parsed: Vec<std::result::Result<f64, _>> = fields.iter().map(|f| f.parse::<f64>()).collect();
            if !seen_content {
                seen_content = true;
                if parsed.iter().any(|p| p.is_err()) {
                    d = fields.len();
                    continue;
                }
            }
            if d == 0 {
                d = fields.len();
            }
            if fields.len() != d {
                return Err(Error::Parse {
                    line: lineno,
                    column: fields.len().min(d) + 1,
                    message: format!("expected {d} fields, found {}", fields.len()),
                });
            }
            for (col, (p, raw)) in parsed.into_iter().zip(&fields).enumerate() {
                match p {
                    Ok(v) if v.is_finite() => values.push(v),
                    Ok(_) => {
                        return Err(Error::Parse {
                            line: lineno,
                            column: col + 1,
                            message: format!("non-finite value '{raw}'"),
                        })
                    }
                    Err(_) => {
                        return Err(Error::Parse {
                            line: lineno,
                            column: col + 1,
                            message: format!("cannot parse '{raw}' as a number"),
                        })
                    }
                }
            }
        }
        if values.is_empty() {
            return Err(Error::Parse {
                line: 0,
                column: 0,
                message: "no data rows".into(),
            });
        }
        let n = values.len() / d;
        Self::new(n, d, values)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path)?;
        Self::read_delimited(BufReader::new(file))
    }

    /// Writes comma-separated rows with full round-trip precision.
    pub fn write_delimited<W: Write>(&self, mut w: W, header: Option<&[String]>) -> Result<()> {
        if let Some(h) = header {
            writeln!(w, "{}", h.join(","))?;
        }
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}
