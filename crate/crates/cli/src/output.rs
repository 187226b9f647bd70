//! Trace, curve, report and manifest files.
//!
//! Traces and curves are comma-separated with a `#`-prefixed header naming
//! the columns. A run that fails part way leaves its rows in place and ends
//! the file with an `ABORT <reason>` line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use oig_core::data::{Metric, ReportRecord};
use oig_core::trainers::IterationRecord;
use oig_core::TrainConfig;

pub const TRACE_COLUMNS: [&str; 4] = ["iteration", "train_mse", "val_mse", "cum_multiplies"];
pub const CURVE_COLUMNS: [&str; 5] = ["iteration", "train_mse", "val_mse", "cum_multiplies", "log10_multiplies"];
pub const OVERLAY_COLUMNS: [&str; 4] = ["iteration", "original_mse", "augmented_mse", "abs_diff"];

/// Shortest round-trip form, switching to exponent notation for very small
/// or very large magnitudes.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !a.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Streams iteration records to a delimited file.
pub struct TraceWriter {
    out: BufWriter<File>,
    path: PathBuf,
    with_log10: bool,
}

impl TraceWriter {
    pub fn create(path: &Path, with_log10: bool) -> Result<Self> {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut out = BufWriter::new(file);
        let cols: &[&str] = if with_log10 { &CURVE_COLUMNS } else { &TRACE_COLUMNS };
        writeln!(out, "# {}", cols.join(","))?;
        Ok(Self {
            out,
            path: path.to_path_buf(),
            with_log10,
        })
    }

    pub fn record(&mut self, r: &IterationRecord) -> std::io::Result<()> {
        write!(
            self.out,
            "{},{},{},{}",
            r.iteration,
            num(r.train_mse),
            num(r.val_mse),
            r.cumulative_multiplies
        )?;
        if self.with_log10 {
            write!(self.out, ",{}", num((r.cumulative_multiplies as f64).log10()))?;
        }
        writeln!(self.out)
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().with_context(|| format!("writing {}", self.path.display()))
    }

    pub fn abort(mut self, reason: &str) -> Result<()> {
        let reason = reason.replace('\n', " ");
        writeln!(self.out, "ABORT {reason}")?;
        self.finish()
    }
}

/// Runs `f` with an observer that appends each record to `writer`, then
/// closes the file, marking it on failure.
pub fn with_trace<T>(
    mut writer: TraceWriter,
    f: impl FnOnce(&mut dyn FnMut(&IterationRecord) -> oig_core::Result<()>) -> oig_core::Result<T>,
) -> Result<T> {
    let result = f(&mut |r| writer.record(r).map_err(oig_core::Error::from));
    match result {
        Ok(v) => {
            writer.finish()?;
            Ok(v)
        }
        Err(e) => {
            writer.abort(&e.to_string())?;
            Err(e.into())
        }
    }
}

/// Key-value run description, one pair per line.
#[derive(Default)]
pub struct Manifest {
    pairs: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Self::default();
        m.push("command", command);
        m.push("version", env!("CARGO_PKG_VERSION"));
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        m.push("timestamp", now);
        m
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.pairs.push((key.into(), value.to_string().replace('\n', " ")));
    }

    pub fn config(&mut self, c: &TrainConfig) {
        self.push("n_iterations", c.n_iterations);
        self.push("n_hidden", c.n_hidden);
        self.push("seed", c.seed);
        self.push("activation", c.activation.name());
        self.push("lm_lambda_init", num(c.lm_lambda_init));
        self.push("ols_tol", num(c.ols_tol));
        self.push("gain_tol", num(c.gain_tol));
        self.push("early_stop_patience", c.early_stop_patience);
        self.push("scg_sigma", num(c.scg.sigma));
        self.push("scg_lambda_init", num(c.scg.lambda_init));
        self.push("scg_restart_every", c.scg.restart_every);
    }

    pub fn report(&mut self, prefix: &str, r: &ReportRecord) {
        self.push(format!("{prefix}.train_mse"), num(r.train_mse));
        self.push(format!("{prefix}.val_mse"), num(r.val_mse));
        self.push(format!("{prefix}.test_{}", r.metric.name()), num(r.test_error));
        self.push(format!("{prefix}.cum_multiplies"), num(r.cumulative_multiplies));
        self.push(format!("{prefix}.best_iteration"), num(r.best_iteration));
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        for (k, v) in &self.pairs {
            text.push_str(&format!("{k}={v}\n"));
        }
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}

/// Table-2-style aggregate report: one row per algorithm.
pub fn report_table(rows: &[(String, ReportRecord)]) -> String {
    let metric = rows.first().map_or(Metric::Mse, |(_, r)| r.metric);
    let mut s = format!(
        "# algorithm,train_mse,val_mse,test_{},cum_multiplies,best_iteration\n",
        metric.name()
    );
    for (name, r) in rows {
        s.push_str(&format!(
            "{name},{},{},{},{},{}\n",
            num(r.train_mse),
            num(r.val_mse),
            num(r.test_error),
            num(r.cumulative_multiplies),
            num(r.best_iteration)
        ));
    }
    s
}

/// Per-fold report rows.
pub fn fold_table(rows: &[(String, usize, ReportRecord, String)]) -> String {
    let metric = rows.first().map_or(Metric::Mse, |(_, _, r, _)| r.metric);
    let mut s = format!(
        "# algorithm,fold,train_mse,val_mse,test_{},cum_multiplies,best_iteration,trace\n",
        metric.name()
    );
    for (name, fold, r, trace) in rows {
        s.push_str(&format!(
            "{name},{fold},{},{},{},{},{},{trace}\n",
            num(r.train_mse),
            num(r.val_mse),
            num(r.test_error),
            num(r.cumulative_multiplies),
            num(r.best_iteration)
        ));
    }
    s
}

/// Parsed delimited file.
#[derive(Debug)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub abort: Option<String>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

pub fn read_table(text: &str) -> Result<Table> {
    let mut lines = text.lines();
    let header = lines.next().context("empty file")?;
    let columns: Vec<String> = header
        .strip_prefix('#')
        .context("first line is not a '#' header")?
        .split(',')
        .map(|c| c.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    let mut abort = None;
    for (i, line) in lines.enumerate() {
        if abort.is_some() {
            bail!("line {}: content after ABORT", i + 2);
        }
        if let Some(reason) = line.strip_prefix("ABORT") {
            abort = Some(reason.trim().to_string());
            continue;
        }
        let cells: Vec<String> = line.split(',').map(str::to_string).collect();
        if cells.len() != columns.len() {
            bail!("line {}: {} fields, header has {}", i + 2, cells.len(), columns.len());
        }
        rows.push(cells);
    }
    Ok(Table { columns, rows, abort })
}

/// What `check` found in one file.
pub enum Checked {
    Trace { rows: usize, aborted: bool },
    Overlay { rows: usize, max_diff: f64 },
    Report { rows: usize },
    Manifest { references: usize },
}

/// Validates a trace or curve file: fixed leading columns, iterations
/// 1, 2, ..., finite errors, non-decreasing multiplies and a log10 column
/// consistent with them.
pub fn check_trace(t: &Table) -> Result<()> {
    if t.columns.len() < TRACE_COLUMNS.len() || t.columns[..4] != TRACE_COLUMNS {
        bail!("columns {:?} do not start with {:?}", t.columns, TRACE_COLUMNS);
    }
    let log10 = t.column("log10_multiplies");
    let mut prev_mult = 0u64;
    for (i, row) in t.rows.iter().enumerate() {
        let line = i + 2;
        let it: usize = row[0].parse().with_context(|| format!("line {line}: bad iteration"))?;
        if it != i + 1 {
            bail!("line {line}: iteration {it}, expected {}", i + 1);
        }
        for (c, name) in [(1, "train_mse"), (2, "val_mse")] {
            let v: f64 = row[c].parse().with_context(|| format!("line {line}: bad {name}"))?;
            if !v.is_finite() || v < 0.0 {
                bail!("line {line}: {name} = {v}");
            }
        }
        let m: u64 = row[3].parse().with_context(|| format!("line {line}: bad cum_multiplies"))?;
        if m < prev_mult {
            bail!("line {line}: cum_multiplies decreased");
        }
        prev_mult = m;
        if let Some(c) = log10 {
            let l: f64 = row[c].parse().with_context(|| format!("line {line}: bad log10_multiplies"))?;
            if (l - (m as f64).log10()).abs() > 1e-9 * l.abs().max(1.0) {
                bail!("line {line}: log10_multiplies {l} does not match {m}");
            }
        }
    }
    Ok(())
}

/// Validates an overlay file and returns its largest difference.
fn check_overlay(t: &Table) -> Result<f64> {
    let mut worst = 0.0f64;
    for (i, row) in t.rows.iter().enumerate() {
        let line = i + 2;
        let it: usize = row[0].parse().with_context(|| format!("line {line}: bad iteration"))?;
        if it != i + 1 {
            bail!("line {line}: iteration {it}, expected {}", i + 1);
        }
        let v: Vec<f64> = row[1..]
            .iter()
            .map(|c| c.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("line {line}: bad value"))?;
        if v[2] != (v[0] - v[1]).abs() {
            bail!("line {line}: abs_diff does not match the two errors");
        }
        worst = worst.max(v[2]);
    }
    Ok(worst)
}

fn check_manifest(path: &Path, text: &str) -> Result<usize> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut refs = 0;
    for (i, line) in text.lines().enumerate() {
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("line {}: expected key=value", i + 1))?;
        if key.ends_with(".file") {
            refs += 1;
            let target = dir.join(value);
            let t = read_table(&std::fs::read_to_string(&target).with_context(|| format!("reading {}", target.display()))?)
                .with_context(|| format!("in {}", target.display()))?;
            check_trace(&t).with_context(|| format!("in {}", target.display()))?;
        }
    }
    Ok(refs)
}

pub fn check_file(path: &Path) -> Result<Checked> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if !text.starts_with('#') {
        return Ok(Checked::Manifest {
            references: check_manifest(path, &text)?,
        });
    }
    let t = read_table(&text)?;
    if t.columns == OVERLAY_COLUMNS {
        Ok(Checked::Overlay {
            rows: t.rows.len(),
            max_diff: check_overlay(&t)?,
        })
    } else if t.columns.first().map(String::as_str) == Some("iteration") {
        check_trace(&t)?;
        Ok(Checked::Trace {
            rows: t.rows.len(),
            aborted: t.abort.is_some(),
        })
    } else if t.columns.first().map(String::as_str) == Some("algorithm") {
        for (i, row) in t.rows.iter().enumerate() {
            for cell in &row[1..] {
                if cell.parse::<f64>().is_err() && !cell.ends_with(".txt") {
                    bail!("line {}: bad value '{cell}'", i + 2);
                }
            }
        }
        Ok(Checked::Report { rows: t.rows.len() })
    } else {
        bail!("unrecognized columns {:?}", t.columns)
    }
}
