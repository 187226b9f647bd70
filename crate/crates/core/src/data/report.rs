//! Per-run and aggregate error reports.

use crate::error::{Error, Result};
use crate::network::{classification_error, forward, mse, Dataset, Task};
use crate::trainers::TrainTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Mse,
    /// Probability of classification error.
    Pe,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Mse => "mse",
            Metric::Pe => "pe",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRecord {
    /// Training MSE of the saved (best-validation) network.
    pub train_mse: f64,
    pub val_mse: f64,
    /// Test MSE, or Pe for classification.
    pub test_error: f64,
    pub metric: Metric,
    /// Multiplies spent over the whole run.
    pub cumulative_multiplies: f64,
    pub best_iteration: f64,
}

/// Evaluates the saved network of `trace` on the test split.
pub fn report_metrics(trace: &TrainTrace, test: &Dataset) -> Result<ReportRecord> {
    let best = &trace.best;
    let record = trace
        .records
        .iter()
        .find(|r| r.iteration == best.iteration)
        .ok_or_else(|| Error::invalid("trace has no record for its best snapshot"))?;
    let cache = forward(&best.params, test)?;
    let (test_error, metric) = match test.task() {
        Task::Approximation => (mse(&cache, test), Metric::Mse),
        Task::Classification => (classification_error(&cache, test)?, Metric::Pe),
    };
    let last = trace.records.last().expect("trace has records");
    Ok(ReportRecord {
        train_mse: record.train_mse,
        val_mse: best.val_mse,
        test_error,
        metric,
        cumulative_multiplies: last.cumulative_multiplies as f64,
        best_iteration: best.iteration as f64,
    })
}

/// Field-wise mean over runs.
pub fn aggregate(records: &[ReportRecord]) -> Result<ReportRecord> {
    let first = records.first().ok_or_else(|| Error::invalid("nothing to aggregate"))?;
    if records.iter().any(|r| r.metric != first.metric) {
        return Err(Error::invalid("cannot aggregate different metrics"));
    }
    let n = records.len() as f64;
    let mean = |f: fn(&ReportRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
    Ok(ReportRecord {
        train_mse: mean(|r| r.train_mse),
        val_mse: mean(|r| r.val_mse),
        test_error: mean(|r| r.test_error),
        metric: first.metric,
        cumulative_multiplies: mean(|r| r.cumulative_multiplies),
        best_iteration: mean(|r| r.best_iteration),
    })
}
