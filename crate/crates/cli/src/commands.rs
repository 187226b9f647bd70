//! Subcommand implementations. Each returns the process exit code on
//! completion and an error on runtime failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use oig_core::data::{aggregate, augment_dependent, make_folds, normalize, DependentInput, RawTable, ReportRecord, Rotation};
use oig_core::kfold::{run_fold_observed, FoldResult, KfoldConfig};
use oig_core::trainers::{initialize, train_from, TrainTrace};
use oig_core::{Algorithm, MlpParams, TrainConfig};
use rayon::prelude::*;

use crate::input;
use crate::output::{self, fold_table, num, report_table, with_trace, Checked, Manifest, TraceWriter};
use crate::{DataArgs, ModelArgs};

/// Largest first-record MSE disagreement tolerated by `compare`, relative.
const SHARED_START_TOL: f64 = 1e-12;

fn config(model: &ModelArgs, algorithm: Algorithm) -> Result<TrainConfig> {
    let mut c = TrainConfig::new(algorithm, model.hidden);
    c.n_iterations = model.iters;
    c.seed = model.seed;
    c.activation = model.activation;
    c.lm_lambda_init = model.lm_lambda;
    c.early_stop_patience = model.patience;
    c.validate()?;
    Ok(c)
}

fn out_dir(model: &ModelArgs) -> Result<&Path> {
    fs::create_dir_all(&model.out).with_context(|| format!("creating {}", model.out.display()))?;
    Ok(&model.out)
}

fn manifest_base(command: &str, data: &DataArgs, model: &ModelArgs, algos: &[Algorithm]) -> Result<Manifest> {
    let mut m = Manifest::new(command);
    let names: Vec<&str> = algos.iter().map(|a| a.name()).collect();
    m.push("algorithms", names.join(","));
    m.config(&config(model, algos[0])?);
    for (k, v) in input::describe(data) {
        m.push(k, v);
    }
    m.push("norm", data.norm.name());
    Ok(m)
}

fn summary(trace: &TrainTrace) -> String {
    let last = trace.records.last().expect("trace has records");
    format!(
        "{}: iterations={} train_mse={} val_mse={} best_iteration={} best_val_mse={} cum_multiplies={}",
        trace.algorithm,
        last.iteration,
        last.train_mse,
        last.val_mse,
        trace.best.iteration,
        trace.best.val_mse,
        last.cumulative_multiplies
    )
}

fn train_to_file(
    config: &TrainConfig,
    init: MlpParams,
    train: &oig_core::Dataset,
    val: &oig_core::Dataset,
    path: &Path,
    with_log10: bool,
) -> Result<TrainTrace> {
    let writer = TraceWriter::create(path, with_log10)?;
    with_trace(writer, |obs| train_from(config, init, train, val, obs))
        .with_context(|| format!("{} run, trace in {}", config.algorithm, path.display()))
}

pub fn train(data: &DataArgs, model: &ModelArgs, algo: Algorithm, val: f64) -> Result<ExitCode> {
    let table = input::load(data)?;
    let cfg = config(model, algo)?;
    let split = input::split(&table, data, val, model.seed)?;
    let dir = out_dir(model)?;
    let file = format!("trace_{}.txt", algo.name());
    let init = initialize(&cfg, &split.train)?;
    let trace = train_to_file(&cfg, init, &split.train, &split.val, &dir.join(&file), false)?;
    for d in &trace.diagnostics {
        eprintln!("note: {d}");
    }

    let mut m = manifest_base("train", data, model, &[algo])?;
    m.push("val_fraction", num(val));
    m.push("n_train", split.train.n_patterns());
    m.push("n_val", split.n_val);
    m.push("trace.file", &file);
    m.write(&dir.join("train_manifest.txt"))?;
    println!("{}", summary(&trace));
    Ok(ExitCode::SUCCESS)
}

fn run_folds(table: &RawTable, rotations: &[Rotation], kc: &KfoldConfig, dir: &Path) -> Result<Vec<(FoldResult, String)>> {
    let name = kc.train.algorithm.name();
    rotations
        .par_iter()
        .map(|rot| {
            let file = format!("kfold_{name}_fold{}.txt", rot.index + 1);
            let writer = TraceWriter::create(&dir.join(&file), false)?;
            let fold = with_trace(writer, |obs| run_fold_observed(table, rot, kc, obs))
                .with_context(|| format!("{name} fold {}", rot.index + 1))?;
            Ok((fold, file))
        })
        .collect()
}

pub fn kfold(data: &DataArgs, model: &ModelArgs, algos: &[Algorithm], k: usize, fold_seed: u64) -> Result<ExitCode> {
    let table = input::load(data)?;
    let plan = make_folds(table.n_rows(), k, fold_seed)?;
    let rotations: Vec<Rotation> = plan.rotations().collect();
    let dir = out_dir(model)?;

    let mut m = manifest_base("kfold", data, model, algos)?;
    m.push("k", k);
    m.push("fold_seed", fold_seed);
    let mut agg_rows = Vec::new();
    let mut fold_rows = Vec::new();
    for &algo in algos {
        let kc = KfoldConfig {
            train: config(model, algo)?,
            k,
            fold_seed,
            norm: data.norm,
        };
        let folds = run_folds(&table, &rotations, &kc, dir)?;
        let reports: Vec<ReportRecord> = folds.iter().map(|(f, _)| f.report).collect();
        let agg = aggregate(&reports)?;
        for (f, file) in &folds {
            let prefix = format!("{}.fold{}", algo.name(), f.fold + 1);
            m.report(&prefix, &f.report);
            m.push(format!("{prefix}.file"), file);
            for d in &f.trace.diagnostics {
                eprintln!("note: {} fold {}: {d}", algo, f.fold + 1);
            }
            fold_rows.push((algo.name().to_string(), f.fold + 1, f.report, file.clone()));
        }
        m.report(&format!("{}.mean", algo.name()), &agg);
        println!(
            "{}: mean train_mse={} val_mse={} test_{}={} cum_multiplies={}",
            algo, agg.train_mse, agg.val_mse, agg.metric.name(), agg.test_error, agg.cumulative_multiplies
        );
        agg_rows.push((algo.name().to_string(), agg));
    }
    fs::write(dir.join("kfold_report.txt"), report_table(&agg_rows))?;
    fs::write(dir.join("kfold_folds.txt"), fold_table(&fold_rows))?;
    m.write(&dir.join("kfold_manifest.txt"))?;
    Ok(ExitCode::SUCCESS)
}

pub fn compare(data: &DataArgs, model: &ModelArgs, algos: &[Algorithm], val: f64) -> Result<ExitCode> {
    if algos.is_empty() {
        bail!("no algorithms to compare");
    }
    let table = input::load(data)?;
    let split = input::split(&table, data, val, model.seed)?;
    let dir = out_dir(model)?;
    let init = initialize(&config(model, algos[0])?, &split.train)?;

    let runs: Vec<(Algorithm, String, TrainTrace)> = algos
        .par_iter()
        .map(|&algo| {
            let file = format!("curve_{}.txt", algo.name());
            let trace = train_to_file(&config(model, algo)?, init.clone(), &split.train, &split.val, &dir.join(&file), true)?;
            Ok((algo, file, trace))
        })
        .collect::<Result<_>>()?;

    let mut m = manifest_base("compare", data, model, algos)?;
    m.push("val_fraction", num(val));
    let start = runs[0].2.records[0].train_mse;
    let mut worst = 0.0f64;
    for (algo, file, trace) in &runs {
        m.push(format!("{}.file", algo.name()), file);
        println!("{}", summary(trace));
        let first = trace.records[0].train_mse;
        worst = worst.max((first - start).abs() / start.abs().max(f64::MIN_POSITIVE));
    }
    m.push("start_mse", num(start));
    m.push("start_max_rel_diff", num(worst));
    m.write(&dir.join("compare_manifest.txt"))?;
    if worst <= SHARED_START_TOL {
        println!("shared start: PASS (max relative difference {worst:e})");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("shared start: FAIL (max relative difference {worst:e})");
        Ok(ExitCode::from(1))
    }
}

pub fn dependent_demo(
    data: &DataArgs,
    model: &ModelArgs,
    augment: &[String],
    algos: &[Algorithm],
    tolerance: f64,
) -> Result<ExitCode> {
    let specs = augment
        .iter()
        .map(|s| s.parse::<DependentInput>())
        .collect::<oig_core::Result<Vec<_>>>()?;
    let raw = input::load(data)?;
    let raw_aug = augment_dependent(&raw, &specs)?;
    let base = normalize(&raw, data.norm)?.0.to_dataset()?;
    let aug = normalize(&raw_aug, data.norm)?.0.to_dataset()?;
    let dir = out_dir(model)?;

    let mut m = manifest_base("dependent-demo", data, model, algos)?;
    m.push("augment", augment.join(" "));
    m.push("tolerance", num(tolerance));
    let mut code = ExitCode::SUCCESS;
    for &algo in algos {
        let cfg = config(model, algo)?;
        let init = initialize(&cfg, &base)?;
        let name = algo.name();
        let files = [format!("demo_{name}_original.txt"), format!("demo_{name}_augmented.txt")];
        let a = train_to_file(&cfg, init.clone(), &base, &base, &dir.join(&files[0]), true)?;
        let b = train_to_file(&cfg, init.with_appended_inputs(specs.len()), &aug, &aug, &dir.join(&files[1]), true)?;

        let overlay = format!("demo_{name}_overlay.txt");
        let mut text = String::from("# iteration,original_mse,augmented_mse,abs_diff\n");
        let mut worst = 0.0f64;
        for (ra, rb) in a.records.iter().zip(&b.records) {
            let d = (ra.train_mse - rb.train_mse).abs();
            worst = worst.max(d);
            text.push_str(&format!(
                "{},{},{},{}\n",
                ra.iteration,
                num(ra.train_mse),
                num(rb.train_mse),
                num(d)
            ));
        }
        if a.records.len() != b.records.len() {
            worst = f64::INFINITY;
        }
        fs::write(dir.join(&overlay), text)?;
        m.push(format!("{name}.original.file"), &files[0]);
        m.push(format!("{name}.augmented.file"), &files[1]);
        m.push(format!("{name}.overlay"), &overlay);
        m.push(format!("{name}.max_abs_diff"), num(worst));

        let verdict = if worst <= tolerance { "PASS" } else { "FAIL" };
        if algo == Algorithm::OigHwo {
            println!("{name}: overlay {verdict} (max |dE| = {worst:e}, tolerance {tolerance:e})");
            if worst > tolerance {
                code = ExitCode::from(1);
            }
        } else {
            println!("{name}: max |dE| = {worst:e} (overlay {verdict}, not required)");
        }
    }
    m.write(&dir.join("demo_manifest.txt"))?;
    Ok(code)
}

pub fn check(files: &[PathBuf]) -> Result<ExitCode> {
    let mut code = ExitCode::SUCCESS;
    for path in files {
        match output::check_file(path) {
            Ok(Checked::Trace { rows, aborted }) => {
                let note = if aborted { ", aborted" } else { "" };
                println!("{}: ok, trace with {rows} rows{note}", path.display());
            }
            Ok(Checked::Overlay { rows, max_diff }) => {
                println!("{}: ok, overlay with {rows} rows, max difference {max_diff:e}", path.display())
            }
            Ok(Checked::Report { rows }) => println!("{}: ok, report with {rows} rows", path.display()),
            Ok(Checked::Manifest { references }) => {
                println!("{}: ok, manifest referencing {references} files", path.display())
            }
            Err(e) => {
                println!("{}: invalid: {e:#}", path.display());
                code = ExitCode::from(1);
            }
        }
    }
    Ok(code)
}
