//! Plain numeric tables: one pattern per row, inputs first, then targets.

use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::network::{Dataset, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Delimiter {
    #[default]
    Auto,
    Comma,
    Whitespace,
}

impl FromStr for Delimiter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Delimiter::Auto),
            "comma" | "csv" | "," => Ok(Delimiter::Comma),
            "whitespace" | "space" | "tab" => Ok(Delimiter::Whitespace),
            other => Err(Error::invalid(format!("unknown delimiter '{other}'"))),
        }
    }
}

/// Delimiter and header flag, written e.g. `csv,header` or `whitespace`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TableFormat {
    pub delimiter: Delimiter,
    pub header: bool,
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut fmt = TableFormat::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "header" => fmt.header = true,
                "noheader" => fmt.header = false,
                other => fmt.delimiter = other.parse()?,
            }
        }
        Ok(fmt)
    }
}

/// Input/output split, task type and text format of a table file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableDescriptor {
    pub n_in: usize,
    pub n_out: usize,
    pub task: Task,
    pub format: TableFormat,
}

impl TableDescriptor {
    pub fn new(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            task: Task::Approximation,
            format: TableFormat::default(),
        }
    }
}

/// Parses `key=value` lines (`n_in`, `n_out`, `task`, `delimiter`, `header`).
/// Blank lines and `#` comments are ignored; several pairs may share a line.
pub fn parse_descriptor(text: &str) -> Result<TableDescriptor> {
    let mut n_in = None;
    let mut n_out = None;
    let mut desc = TableDescriptor::new(0, 0);
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        for pair in line.split_whitespace() {
            let err = |message: String| Error::Parse {
                line: lineno + 1,
                message,
            };
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got '{pair}'")))?;
            let count = |v: &str| v.parse::<usize>().map_err(|_| err(format!("bad count '{v}' for {key}")));
            match key {
                "n_in" => n_in = Some(count(value)?),
                "n_out" => n_out = Some(count(value)?),
                "task" => {
                    desc.task = match value {
                        "approx" | "approximation" | "regression" => Task::Approximation,
                        "class" | "classification" => Task::Classification,
                        other => return Err(err(format!("unknown task '{other}'"))),
                    }
                }
                "delimiter" => desc.format.delimiter = value.parse().map_err(|e: Error| err(e.to_string()))?,
                "header" => {
                    desc.format.header = match value {
                        "true" | "yes" | "1" => true,
                        "false" | "no" | "0" => false,
                        other => return Err(err(format!("bad header flag '{other}'"))),
                    }
                }
                other => return Err(err(format!("unknown key '{other}'"))),
            }
        }
    }
    desc.n_in = n_in.ok_or_else(|| Error::invalid("descriptor is missing n_in"))?;
    desc.n_out = n_out.ok_or_else(|| Error::invalid("descriptor is missing n_out"))?;
    if desc.n_out == 0 {
        return Err(Error::invalid("n_out must be positive"));
    }
    Ok(desc)
}

pub fn load_descriptor(path: &Path) -> Result<TableDescriptor> {
    parse_descriptor(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    /// Each row holds `n_in` inputs followed by `n_out` targets.
    pub rows: Vec<Vec<f64>>,
    pub n_in: usize,
    pub n_out: usize,
    pub task: Task,
    pub source: String,
}

impl RawTable {
    pub fn new(rows: Vec<Vec<f64>>, n_in: usize, n_out: usize, task: Task, source: impl Into<String>) -> Result<Self> {
        if n_out == 0 {
            return Err(Error::invalid("n_out must be positive"));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_in + n_out {
                return Err(Error::shape("RawTable row", n_in + n_out, format!("{} (row {i})", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("RawTable"));
            }
        }
        Ok(Self {
            rows,
            n_in,
            n_out,
            task,
            source: source.into(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn features(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_rows(), self.n_in, |r, c| self.rows[r][c])
    }

    pub fn targets(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_rows(), self.n_out, |r, c| self.rows[r][self.n_in + c])
    }

    pub fn to_dataset(&self) -> Result<Dataset> {
        Dataset::new(&self.features(), self.targets(), self.task)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            n_in: self.n_in,
            n_out: self.n_out,
            task: self.task,
            source: self.source.clone(),
        }
    }
}

fn detect_delimiter(line: &str) -> Delimiter {
    if line.contains(',') {
        Delimiter::Comma
    } else {
        Delimiter::Whitespace
    }
}

fn split_cells(line: &str, delim: Delimiter) -> Vec<&str> {
    match delim {
        Delimiter::Comma => line.split(',').map(str::trim).collect(),
        _ => line.split_whitespace().collect(),
    }
}

/// Parses table text. Blank lines and `#` comment lines are skipped. For
/// classification, a row may carry a single 0-based class label instead of
/// `n_out` one-hot targets.
pub fn parse_table(text: &str, desc: &TableDescriptor, source: &str) -> Result<RawTable> {
    let mut delim = desc.format.delimiter;
    let mut header_pending = desc.format.header;
    let mut rows = Vec::new();
    let width = desc.n_in + desc.n_out;
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if header_pending {
            header_pending = false;
            continue;
        }
        if delim == Delimiter::Auto {
            delim = detect_delimiter(trimmed);
        }
        let err = |message: String| Error::Parse {
            line: lineno + 1,
            message,
        };
        let cells = split_cells(trimmed, delim);
        let mut values = Vec::with_capacity(cells.len());
        for cell in &cells {
            let v: f64 = cell.parse().map_err(|_| err(format!("non-numeric cell '{cell}'")))?;
            if !v.is_finite() {
                return Err(err(format!("non-finite cell '{cell}'")));
            }
            values.push(v);
        }
        let row = if values.len() == width {
            values
        } else if desc.task == Task::Classification && values.len() == desc.n_in + 1 {
            let label = values[desc.n_in];
            if label.fract() != 0.0 || label < 0.0 || label as usize >= desc.n_out {
                return Err(err(format!("class label {label} outside 0..{}", desc.n_out)));
            }
            let mut row = values[..desc.n_in].to_vec();
            row.extend((0..desc.n_out).map(|c| if c == label as usize { 1.0 } else { 0.0 }));
            row
        } else {
            return Err(err(format!("expected {width} cells, found {}", values.len())));
        };
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::invalid(format!("{source}: no data rows")));
    }
    RawTable::new(rows, desc.n_in, desc.n_out, desc.task, source)
}

pub fn load_table(path: &Path, desc: &TableDescriptor) -> Result<RawTable> {
    let text = std::fs::read_to_string(path)?;
    parse_table(&text, desc, &path.display().to_string())
}
