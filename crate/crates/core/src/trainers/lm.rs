//! Levenberg-Marquardt over all weights with a Gauss-Newton Hessian.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::network::{forward, mse, Dataset, MlpParams};
use crate::trainers::objective::{flatten, jacobian, unflatten};

/// Damping above which training stops.
pub const LAMBDA_MAX: f64 = 1e12;
const LAMBDA_MIN: f64 = 1e-15;
/// Damping increases tried within one iteration.
pub const MAX_RETRIES: usize = 10;

/// Solves `(H + λI) d = g`.
pub fn lm_direction(h: &DMatrix<f64>, g: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    if h.nrows() != h.ncols() || h.nrows() != g.len() {
        return Err(Error::shape("lm_direction", h.nrows(), g.len()));
    }
    let mut damped = h.clone();
    for i in 0..damped.nrows() {
        damped[(i, i)] += lambda;
    }
    let chol = damped
        .cholesky()
        .ok_or_else(|| Error::Degenerate(format!("damped Hessian not positive definite at lambda = {lambda:e}")))?;
    Ok(chol.solve(g))
}

/// Gauss-Newton Hessian `(2/N_v) JᵀJ` and negative gradient `(2/N_v) Jᵀ(t − y)`.
pub fn gauss_newton_system(params: &MlpParams, data: &Dataset) -> Result<(DMatrix<f64>, DVector<f64>, f64)> {
    let cache = forward(params, data)?;
    let j = jacobian(params, &cache, data);
    let scale = 2.0 / data.n_patterns() as f64;
    let residual = data.targets() - &cache.outputs;
    // rows of j are (p, i) with i fastest
    let e = DVector::from_iterator(residual.len(), residual.transpose().iter().copied());
    let h = j.tr_mul(&j) * scale;
    let g = j.tr_mul(&e) * scale;
    Ok((h, g, mse(&cache, data)))
}

pub(crate) enum LmOutcome {
    Accepted,
    Rejected,
    Overflow,
}

pub(crate) struct Lm<'a> {
    data: &'a Dataset,
    params: MlpParams,
    value: f64,
    lambda: f64,
}

impl<'a> Lm<'a> {
    pub(crate) fn new(data: &'a Dataset, params: MlpParams, lambda: f64) -> Result<Self> {
        let value = mse(&forward(&params, data)?, data);
        Ok(Self {
            data,
            params,
            value,
            lambda,
        })
    }

    pub(crate) fn params(&self) -> &MlpParams {
        &self.params
    }

    pub(crate) fn value(&self) -> f64 {
        self.value
    }

    pub(crate) fn step(&mut self) -> Result<LmOutcome> {
        let (h, g, _) = gauss_newton_system(&self.params, self.data)?;
        let w = flatten(&self.params);
        for _ in 0..MAX_RETRIES {
            if let Ok(d) = lm_direction(&h, &g, self.lambda) {
                let trial = unflatten(&self.params, &(&w + d))?;
                let e = mse(&forward(&trial, self.data)?, self.data);
                if e <= self.value {
                    self.params = trial;
                    self.value = e;
                    self.lambda = (self.lambda * 0.1).max(LAMBDA_MIN);
                    return Ok(LmOutcome::Accepted);
                }
            }
            self.lambda *= 10.0;
            if self.lambda > LAMBDA_MAX {
                return Ok(LmOutcome::Overflow);
            }
        }
        Ok(LmOutcome::Rejected)
    }
}
