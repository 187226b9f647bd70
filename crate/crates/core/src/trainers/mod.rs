//! Training drivers for the five algorithms.
//!
//! Every run starts from the same net-control initialization for a given
//! seed. Record `k` (counting from 1) holds the errors of the network entering
//! iteration `k`, so the first record is shared by all algorithms, and its
//! cumulative multiply count is `k` times the per-iteration cost.

pub mod lm;
pub mod multiplies;
pub mod objective;
pub mod scg;
pub mod two_stage;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::DEFAULT_OLS_TOL;
use crate::network::{forward, mse, net_control_init_with, Activation, Dataset, MlpParams, NetControl};

use lm::{Lm, LmOutcome};
use multiplies::{multiply_counts, Dims};
use objective::{flatten, unflatten, MlpObjective};
use scg::{ScgParams, ScgState};
use two_stage::TwoStage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    OwoBp,
    OigBp,
    OigHwo,
    Scg,
    Lm,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::OwoBp,
        Algorithm::OigBp,
        Algorithm::OigHwo,
        Algorithm::Scg,
        Algorithm::Lm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::OwoBp => "owo-bp",
            Algorithm::OigBp => "oig-bp",
            Algorithm::OigHwo => "oig-hwo",
            Algorithm::Scg => "scg",
            Algorithm::Lm => "lm",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub n_iterations: usize,
    pub n_hidden: usize,
    pub seed: u64,
    pub activation: Activation,
    pub lm_lambda_init: f64,
    /// Dependence tolerance for output weight and HWO solves.
    pub ols_tol: f64,
    /// Dependence tolerance for the gain system.
    pub gain_tol: f64,
    /// Stop after this many records without a new best validation error;
    /// 0 disables early stopping.
    pub early_stop_patience: usize,
    pub scg: ScgParams,
}

impl TrainConfig {
    pub fn new(algorithm: Algorithm, n_hidden: usize) -> Self {
        Self {
            algorithm,
            n_iterations: 1000,
            n_hidden,
            seed: 0,
            activation: Activation::Sigmoid,
            lm_lambda_init: 0.01,
            ols_tol: DEFAULT_OLS_TOL,
            gain_tol: DEFAULT_OLS_TOL,
            early_stop_patience: 0,
            scg: ScgParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iterations == 0 {
            return Err(Error::invalid("n_iterations must be positive"));
        }
        if self.n_hidden == 0 {
            return Err(Error::invalid("n_hidden must be positive"));
        }
        if !(self.lm_lambda_init > 0.0) || !self.lm_lambda_init.is_finite() {
            return Err(Error::invalid("lm_lambda_init must be positive"));
        }
        for (name, t) in [("ols_tol", self.ols_tol), ("gain_tol", self.gain_tol)] {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub cumulative_multiplies: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestSnapshot {
    pub val_mse: f64,
    pub iteration: usize,
    pub params: MlpParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub algorithm: Algorithm,
    pub records: Vec<IterationRecord>,
    pub best: BestSnapshot,
    pub per_iteration_multiplies: u64,
    /// Reasons for stopping before `n_iterations`, if any.
    pub diagnostics: Vec<String>,
    /// Network at the last record.
    pub final_params: MlpParams,
}

/// Net-control initialization shared by all algorithms.
pub fn initialize(config: &TrainConfig, train: &Dataset) -> Result<MlpParams> {
    config.validate()?;
    net_control_init_with(
        train,
        config.n_hidden,
        config.activation,
        config.seed,
        NetControl::default(),
        config.ols_tol,
    )
}

pub fn train(config: &TrainConfig, train: &Dataset, val: &Dataset) -> Result<TrainTrace> {
    let init = initialize(config, train)?;
    train_from(config, init, train, val, &mut |_| Ok(()))
}

fn train_checked(expected: Algorithm, config: &TrainConfig, data_train: &Dataset, val: &Dataset) -> Result<TrainTrace> {
    if config.algorithm != expected {
        return Err(Error::invalid(format!(
            "config selects {} but {} was requested",
            config.algorithm, expected
        )));
    }
    train(config, data_train, val)
}

pub fn train_owo_bp(config: &TrainConfig, train: &Dataset, val: &Dataset) -> Result<TrainTrace> {
    train_checked(Algorithm::OwoBp, config, train, val)
}

pub fn train_oig_bp(config: &TrainConfig, train: &Dataset, val: &Dataset) -> Result<TrainTrace> {
    train_checked(Algorithm::OigBp, config, train, val)
}

pub fn train_oig_hwo(config: &TrainConfig, train: &Dataset, val: &Dataset) -> Result<TrainTrace> {
    train_checked(Algorithm::OigHwo, config, train, val)
}

pub fn train_scg(config: &TrainConfig, train: &Dataset, val: &Dataset) -> Result<TrainTrace> {
    train_checked(Algorithm::Scg, config, train, val)
}

pub fn train_lm(config: &TrainConfig, train: &Dataset, val: &Dataset) -> Result<TrainTrace> {
    train_checked(Algorithm::Lm, config, train, val)
}

enum Engine<'a> {
    TwoStage(TwoStage<'a>),
    Scg {
        objective: MlpObjective<'a>,
        state: ScgState,
    },
    Lm(Lm<'a>),
}

impl Engine<'_> {
    fn params(&self) -> Result<MlpParams> {
        match self {
            Engine::TwoStage(t) => Ok(t.params().clone()),
            Engine::Scg { objective, state } => unflatten(&objective.template, state.w()),
            Engine::Lm(l) => Ok(l.params().clone()),
        }
    }

    fn value(&self) -> f64 {
        match self {
            Engine::TwoStage(t) => t.value(),
            Engine::Scg { state, .. } => state.value(),
            Engine::Lm(l) => l.value(),
        }
    }

    /// Advances one iteration; `Some(reason)` ends training.
    fn step(&mut self, iteration: usize) -> Result<Option<String>> {
        match self {
            Engine::TwoStage(t) => t.step(iteration).map(|_| None),
            Engine::Scg { objective, state } => state.step(objective).map(|_| None),
            Engine::Lm(l) => match l.step()? {
                LmOutcome::Overflow => Ok(Some(format!(
                    "LM damping exceeded {:e} at iteration {iteration}",
                    lm::LAMBDA_MAX
                ))),
                LmOutcome::Accepted | LmOutcome::Rejected => Ok(None),
            },
        }
    }
}

/// Trains from a given initial network, reporting each record to `observer`
/// as soon as it is made.
pub fn train_from(
    config: &TrainConfig,
    init: MlpParams,
    train: &Dataset,
    val: &Dataset,
    observer: &mut dyn FnMut(&IterationRecord) -> Result<()>,
) -> Result<TrainTrace> {
    config.validate()?;
    init.check_compatible(train)?;
    init.check_compatible(val)?;
    if init.n_hidden() != config.n_hidden {
        return Err(Error::shape("initial network hidden units", config.n_hidden, init.n_hidden()));
    }
    let per_iteration = multiply_counts(Dims {
        n_inputs: train.n_inputs(),
        n_outputs: train.n_outputs(),
        n_hidden: config.n_hidden,
        n_patterns: train.n_patterns(),
    })?
    .per_iteration(config.algorithm);

    let mut engine = match config.algorithm {
        Algorithm::OwoBp | Algorithm::OigBp | Algorithm::OigHwo => Engine::TwoStage(TwoStage::new(config, train, init)?),
        Algorithm::Scg => {
            let w0 = flatten(&init);
            let objective = MlpObjective { template: init, data: train };
            let state = ScgState::new(&objective, w0, config.scg)?;
            Engine::Scg { objective, state }
        }
        Algorithm::Lm => Engine::Lm(Lm::new(train, init, config.lm_lambda_init)?),
    };

    let mut records = Vec::with_capacity(config.n_iterations);
    let mut best: Option<BestSnapshot> = None;
    let mut diagnostics = Vec::new();
    let mut since_best = 0;
    let mut current = engine.params()?;

    for k in 1..=config.n_iterations {
        let train_mse = engine.value();
        let val_mse = mse(&forward(&current, val)?, val);
        if !train_mse.is_finite() || !val_mse.is_finite() {
            return Err(Error::TrainingAborted {
                iteration: k,
                reason: format!("non-finite error (train {train_mse}, validation {val_mse})"),
            });
        }
        let record = IterationRecord {
            iteration: k,
            train_mse,
            val_mse,
            cumulative_multiplies: per_iteration * k as u64,
        };
        records.push(record);
        observer(&record)?;

        if best.as_ref().is_none_or(|b| val_mse < b.val_mse) {
            best = Some(BestSnapshot {
                val_mse,
                iteration: k,
                params: current.clone(),
            });
            since_best = 0;
        } else {
            since_best += 1;
        }
        if config.early_stop_patience > 0 && since_best >= config.early_stop_patience {
            diagnostics.push(format!("early stop at iteration {k}: no validation improvement in {since_best} iterations"));
            break;
        }
        if k == config.n_iterations {
            break;
        }
        if let Some(reason) = engine.step(k)? {
            diagnostics.push(reason);
            break;
        }
        current = engine.params()?;
    }

    Ok(TrainTrace {
        algorithm: config.algorithm,
        records,
        best: best.expect("at least one record"),
        per_iteration_multiplies: per_iteration,
        diagnostics,
        final_params: current,
    })
}
