//! k-fold training with validation and testing.
//!
//! For rotation `j`, fold `j` is the test set, fold `j+1 mod k` the validation
//! set and the rest the training set. Inputs are normalized with statistics
//! of the training rows only.

use rayon::prelude::*;

use crate::data::{aggregate, make_folds, report_metrics, NormMode, NormalizationSpec, RawTable, ReportRecord, Rotation};
use crate::error::Result;
use crate::network::Dataset;
use crate::trainers::{initialize, train_from, IterationRecord, TrainConfig, TrainTrace};

#[derive(Debug, Clone, PartialEq)]
pub struct KfoldConfig {
    pub train: TrainConfig,
    pub k: usize,
    pub fold_seed: u64,
    pub norm: NormMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitData {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub norm: NormalizationSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub trace: TrainTrace,
    pub report: ReportRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KfoldResult {
    pub folds: Vec<FoldResult>,
    pub aggregate: ReportRecord,
}

pub fn prepare_rotation(table: &RawTable, rotation: &Rotation, norm: NormMode) -> Result<SplitData> {
    let spec = NormalizationSpec::fit(table, norm, Some(&rotation.train))?;
    let part = |idx: &[usize]| -> Result<Dataset> { spec.apply(&table.subset(idx))?.to_dataset() };
    Ok(SplitData {
        train: part(&rotation.train)?,
        val: part(&rotation.val)?,
        test: part(&rotation.test)?,
        norm: spec,
    })
}

pub fn run_fold(table: &RawTable, rotation: &Rotation, config: &KfoldConfig) -> Result<FoldResult> {
    run_fold_observed(table, rotation, config, &mut |_| Ok(()))
}

pub fn run_fold_observed(
    table: &RawTable,
    rotation: &Rotation,
    config: &KfoldConfig,
    observer: &mut dyn FnMut(&IterationRecord) -> Result<()>,
) -> Result<FoldResult> {
    let split = prepare_rotation(table, rotation, config.norm)?;
    let init = initialize(&config.train, &split.train)?;
    let trace = train_from(&config.train, init, &split.train, &split.val, observer)?;
    let report = report_metrics(&trace, &split.test)?;
    Ok(FoldResult {
        fold: rotation.index,
        trace,
        report,
    })
}

/// Runs all `k` rotations in parallel; results are ordered by fold.
pub fn run_kfold(table: &RawTable, config: &KfoldConfig) -> Result<KfoldResult> {
    let plan = make_folds(table.n_rows(), config.k, config.fold_seed)?;
    let rotations: Vec<Rotation> = plan.rotations().collect();
    let folds = rotations
        .par_iter()
        .map(|r| run_fold(table, r, config))
        .collect::<Result<Vec<_>>>()?;
    let reports: Vec<ReportRecord> = folds.iter().map(|f| f.report).collect();
    Ok(KfoldResult {
        aggregate: aggregate(&reports)?,
        folds,
    })
}
