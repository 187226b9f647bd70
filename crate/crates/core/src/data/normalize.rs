//! Per-input normalization fitted on one set of rows and applied to others.
//! Targets are never changed.

use std::str::FromStr;

use crate::data::table::RawTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormMode {
    /// Zero mean, unit (population) standard deviation.
    #[default]
    ZScore,
    /// Minimum 0, maximum 1.
    MinMax01,
    None,
}

impl NormMode {
    pub fn name(self) -> &'static str {
        match self {
            NormMode::ZScore => "zscore",
            NormMode::MinMax01 => "minmax01",
            NormMode::None => "none",
        }
    }
}

impl FromStr for NormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zscore" => Ok(NormMode::ZScore),
            "minmax01" | "minmax" => Ok(NormMode::MinMax01),
            "none" => Ok(NormMode::None),
            other => Err(Error::invalid(format!("unknown normalization '{other}'"))),
        }
    }
}

/// `x' = (x − shift) / scale` per input column.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationSpec {
    pub mode: NormMode,
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
    /// Inputs with no spread over the fitted rows; they map to 0.
    pub constant: Vec<bool>,
}

impl NormalizationSpec {
    /// Fits on the rows selected by `rows` (all rows when `None`).
    pub fn fit(table: &RawTable, mode: NormMode, rows: Option<&[usize]>) -> Result<Self> {
        let all: Vec<usize>;
        let idx = match rows {
            Some(r) => r,
            None => {
                all = (0..table.n_rows()).collect();
                &all
            }
        };
        if idx.is_empty() {
            return Err(Error::invalid("cannot normalize an empty table"));
        }
        let n = table.n_in;
        let count = idx.len() as f64;
        let mut shift = vec![0.0; n];
        let mut scale = vec![1.0; n];
        let mut constant = vec![false; n];
        for j in 0..n {
            let col = || idx.iter().map(|&r| table.rows[r][j]);
            let (lo, hi) = col().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            constant[j] = lo == hi;
            match mode {
                NormMode::ZScore => {
                    let mean = col().sum::<f64>() / count;
                    let var = col().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
                    shift[j] = mean;
                    if !constant[j] && var > 0.0 {
                        scale[j] = var.sqrt();
                    } else {
                        constant[j] = true;
                    }
                }
                NormMode::MinMax01 => {
                    shift[j] = lo;
                    if !constant[j] {
                        scale[j] = hi - lo;
                    }
                }
                NormMode::None => {}
            }
        }
        Ok(Self {
            mode,
            shift,
            scale,
            constant,
        })
    }

    pub fn apply(&self, table: &RawTable) -> Result<RawTable> {
        self.map(table, |v, s, c| (v - s) / c)
    }

    /// Maps normalized inputs back; constant inputs come back as their
    /// fitted shift.
    pub fn invert(&self, table: &RawTable) -> Result<RawTable> {
        self.map(table, |v, s, c| v * c + s)
    }

    fn map(&self, table: &RawTable, f: impl Fn(f64, f64, f64) -> f64) -> Result<RawTable> {
        if table.n_in != self.shift.len() {
            return Err(Error::shape("normalization inputs", self.shift.len(), table.n_in));
        }
        let mut out = table.clone();
        if self.mode == NormMode::None {
            return Ok(out);
        }
        for row in &mut out.rows {
            for j in 0..table.n_in {
                row[j] = f(row[j], self.shift[j], self.scale[j]);
            }
        }
        Ok(out)
    }
}

/// Fits on the whole table and applies the result to it.
pub fn normalize(table: &RawTable, mode: NormMode) -> Result<(RawTable, NormalizationSpec)> {
    let spec = NormalizationSpec::fit(table, mode, None)?;
    Ok((spec.apply(table)?, spec))
}
