//! Seeded synthetic regression tables and dependent-input augmentation.

use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::table::RawTable;
use crate::error::{Error, Result};
use crate::network::{Activation, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// 4 inputs, 2 targets exactly affine in the inputs.
    Linear,
    /// 4 inputs, 2 targets affine in the inputs plus Gaussian noise (std 0.1).
    NoisyLinear,
    /// 5 inputs, 2 targets from a random 6-hidden-unit sigmoid network.
    Teacher,
    /// 5 inputs with strongly correlated pairs, targets from a teacher network.
    CorrelatedInputs,
}

impl SynthKind {
    pub fn name(self) -> &'static str {
        match self {
            SynthKind::Linear => "linear",
            SynthKind::NoisyLinear => "noisy-linear",
            SynthKind::Teacher => "teacher",
            SynthKind::CorrelatedInputs => "correlated",
        }
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            SynthKind::Linear,
            SynthKind::NoisyLinear,
            SynthKind::Teacher,
            SynthKind::CorrelatedInputs,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| Error::invalid(format!("unknown synthetic kind '{s}'")))
    }
}

/// Noise standard deviation of [`SynthKind::NoisyLinear`].
pub const NOISE_STD: f64 = 0.1;

pub fn synthesize_regression(kind: SynthKind, n_patterns: usize, seed: u64) -> Result<RawTable> {
    if n_patterns == 0 {
        return Err(Error::invalid("n_patterns must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = move || -> f64 { StandardNormal.sample(&mut rng) };
    let (n_in, n_out) = match kind {
        SynthKind::Linear | SynthKind::NoisyLinear => (4, 2),
        SynthKind::Teacher | SynthKind::CorrelatedInputs => (5, 2),
    };

    let rows = match kind {
        SynthKind::Linear | SynthKind::NoisyLinear => {
            let a: Vec<f64> = (0..n_out * (n_in + 1)).map(|_| draw()).collect();
            (0..n_patterns)
                .map(|_| {
                    let x: Vec<f64> = (0..n_in).map(|_| draw()).collect();
                    let mut row = x.clone();
                    for i in 0..n_out {
                        let coef = &a[i * (n_in + 1)..(i + 1) * (n_in + 1)];
                        let mut y = coef[n_in] + x.iter().zip(coef).map(|(xv, c)| xv * c).sum::<f64>();
                        if kind == SynthKind::NoisyLinear {
                            y += NOISE_STD * draw();
                        }
                        row.push(y);
                    }
                    row
                })
                .collect()
        }
        SynthKind::Teacher | SynthKind::CorrelatedInputs => {
            let nh = 6;
            let w: Vec<f64> = (0..nh * (n_in + 1)).map(|_| draw()).collect();
            let w_oh: Vec<f64> = (0..n_out * nh).map(|_| 2.0 * draw()).collect();
            let w_oi: Vec<f64> = (0..n_out * (n_in + 1)).map(|_| 0.5 * draw()).collect();
            let f = Activation::Sigmoid;
            (0..n_patterns)
                .map(|_| {
                    let mut x: Vec<f64> = (0..n_in).map(|_| draw()).collect();
                    if kind == SynthKind::CorrelatedInputs {
                        x[3] = 0.9 * x[0] + 0.1 * x[3];
                        x[4] = 0.8 * x[1] - 0.5 * x[2] + 0.1 * x[4];
                    }
                    let hidden: Vec<f64> = (0..nh)
                        .map(|k| {
                            let wk = &w[k * (n_in + 1)..(k + 1) * (n_in + 1)];
                            f.apply(wk[n_in] + x.iter().zip(wk).map(|(a, b)| a * b).sum::<f64>())
                        })
                        .collect();
                    let mut row = x.clone();
                    for i in 0..n_out {
                        let oi = &w_oi[i * (n_in + 1)..(i + 1) * (n_in + 1)];
                        let oh = &w_oh[i * nh..(i + 1) * nh];
                        let y = oi[n_in]
                            + x.iter().zip(oi).map(|(a, b)| a * b).sum::<f64>()
                            + hidden.iter().zip(oh).map(|(a, b)| a * b).sum::<f64>();
                        row.push(y);
                    }
                    row
                })
                .collect()
        }
    };
    RawTable::new(rows, n_in, n_out, Task::Approximation, format!("synthetic:{}:{seed}", kind.name()))
}

/// A new input `Σ coef·x_col + constant` over existing inputs (0-based columns).
#[derive(Debug, Clone, PartialEq)]
pub struct DependentInput {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl DependentInput {
    pub fn copy_of(col: usize) -> Self {
        Self {
            terms: vec![(col, 1.0)],
            constant: 0.0,
        }
    }
}

/// Parses `2*x1,-1*x2,3`: terms `coef*xJ` with 1-based `J`, a bare `xJ`, or a
/// constant.
impl FromStr for DependentInput {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut terms = Vec::new();
        let mut constant = 0.0;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let bad = || Error::invalid(format!("bad dependent-input term '{part}'"));
            let (coef, var) = match part.split_once('*') {
                Some((c, v)) => (c.trim().parse::<f64>().map_err(|_| bad())?, Some(v.trim())),
                None if part.starts_with('x') || part.starts_with("-x") => {
                    let (sign, v) = part.strip_prefix('-').map_or((1.0, part), |v| (-1.0, v));
                    (sign, Some(v))
                }
                None => (part.parse::<f64>().map_err(|_| bad())?, None),
            };
            match var {
                Some(v) => {
                    let j: usize = v.strip_prefix('x').and_then(|j| j.parse().ok()).ok_or_else(bad)?;
                    if j == 0 {
                        return Err(bad());
                    }
                    terms.push((j - 1, coef));
                }
                None => constant += coef,
            }
        }
        if terms.is_empty() {
            return Err(Error::invalid(format!("dependent input '{s}' references no input")));
        }
        Ok(Self { terms, constant })
    }
}

/// Appends the given combinations after the existing inputs.
pub fn augment_dependent(table: &RawTable, specs: &[DependentInput]) -> Result<RawTable> {
    for spec in specs {
        for &(col, coef) in &spec.terms {
            if col >= table.n_in {
                return Err(Error::invalid(format!(
                    "dependent input references x{} but the table has {} inputs",
                    col + 1,
                    table.n_in
                )));
            }
            if !coef.is_finite() {
                return Err(Error::NonFinite("dependent input coefficient"));
            }
        }
    }
    let rows = table
        .rows
        .iter()
        .map(|row| {
            let mut out = row[..table.n_in].to_vec();
            for spec in specs {
                let v = spec.constant + spec.terms.iter().map(|&(c, a)| a * row[c]).sum::<f64>();
                out.push(v);
            }
            out.extend_from_slice(&row[table.n_in..]);
            out
        })
        .collect();
    RawTable::new(rows, table.n_in + specs.len(), table.n_out, table.task, table.source.clone())
}
