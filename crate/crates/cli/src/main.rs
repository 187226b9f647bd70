//! `oig`: train, benchmark and compare MLP training algorithms.

mod commands;
mod input;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use oig_core::data::{NormMode, SynthKind};
use oig_core::{Activation, Algorithm};

#[derive(Debug, Parser)]
#[command(name = "oig", version, about = "MLP training with optimal input gains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one network and write its trace.
    Train(TrainArgs),
    /// k-fold training, validation and testing for one or more algorithms.
    Kfold(KfoldArgs),
    /// Train several algorithms from the same initial network and write
    /// aligned learning curves.
    Compare(CompareArgs),
    /// Train on a dataset and on a copy with appended linearly dependent
    /// inputs, from the same initial network.
    DependentDemo(DemoArgs),
    /// Validate trace and curve files.
    Check(CheckArgs),
}

/// Where the patterns come from.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Numeric table file (inputs first, then targets).
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    pub data: Option<PathBuf>,
    /// Descriptor with n_in, n_out, task, delimiter, header
    /// (default: the data path with extension .desc).
    #[arg(long, requires = "data")]
    pub desc: Option<PathBuf>,
    /// Generate a synthetic table instead.
    #[arg(long, value_parser = parse_synth)]
    pub synthetic: Option<SynthKind>,
    /// Number of synthetic patterns.
    #[arg(long, default_value_t = 500)]
    pub patterns: usize,
    /// Seed of the synthetic generator.
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    /// Input normalization fitted on the training rows.
    #[arg(long, default_value = "zscore", value_parser = parse_norm)]
    pub norm: NormMode,
}

/// Network and optimizer settings shared by all commands.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Hidden units.
    #[arg(long, default_value_t = 13)]
    pub hidden: usize,
    /// Training iterations.
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    /// Seed of the initial network.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "sigmoid", value_parser = parse_activation)]
    pub activation: Activation,
    /// Initial Levenberg-Marquardt damping.
    #[arg(long, default_value_t = 0.01)]
    pub lm_lambda: f64,
    /// Stop after this many iterations without a better validation error
    /// (0 = never).
    #[arg(long, default_value_t = 0)]
    pub patience: usize,
    /// Output directory.
    #[arg(long, env = "OIG_OUT_DIR", default_value = "oig-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_parser = parse_algo)]
    algo: Algorithm,
    /// Fraction of patterns held out for validation (0 validates on the
    /// training set).
    #[arg(long, default_value_t = 0.2)]
    val: f64,
}

#[derive(Debug, Args)]
struct KfoldArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Algorithms, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_algo, default_value = "owo-bp,oig-bp,oig-hwo,scg,lm")]
    algo: Vec<Algorithm>,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Seed of the fold shuffle.
    #[arg(long, default_value_t = 1)]
    fold_seed: u64,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_delimiter = ',', value_parser = parse_algo, default_value = "owo-bp,oig-bp,oig-hwo,scg,lm")]
    algo: Vec<Algorithm>,
    #[arg(long, default_value_t = 0.2)]
    val: f64,
}

#[derive(Debug, Args)]
struct DemoArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Appended input as a combination of existing ones, e.g. `2*x1,-1*x2,3`
    /// (1-based input indices; a bare number is a constant). Repeatable.
    #[arg(long, required = true)]
    augment: Vec<String>,
    #[arg(long, value_delimiter = ',', value_parser = parse_algo, default_value = "oig-hwo")]
    algo: Vec<Algorithm>,
    /// Largest per-iteration training MSE difference accepted as an overlay.
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

fn parse_algo(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: oig_core::Error| e.to_string())
}

fn parse_synth(s: &str) -> Result<SynthKind, String> {
    s.parse().map_err(|e: oig_core::Error| e.to_string())
}

fn parse_norm(s: &str) -> Result<NormMode, String> {
    s.parse().map_err(|e: oig_core::Error| e.to_string())
}

fn parse_activation(s: &str) -> Result<Activation, String> {
    s.parse().map_err(|e: oig_core::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = match cli.command {
        Command::Train(a) => commands::train(&a.data, &a.model, a.algo, a.val),
        Command::Kfold(a) => commands::kfold(&a.data, &a.model, &a.algo, a.k, a.fold_seed),
        Command::Compare(a) => commands::compare(&a.data, &a.model, &a.algo, a.val),
        Command::DependentDemo(a) => commands::dependent_demo(&a.data, &a.model, &a.augment, &a.algo, a.tolerance),
        Command::Check(a) => commands::check(&a.files),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
