//! Two-stage trainers: an input-weight step followed by an output weight solve.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::gains::{apply_gain_update, gain_system, solve_gains};
use crate::gradients::{bp_gradient, hwo_factor, hwo_from_factor, input_autocorrelation, olf_from_cache, GradientMatrix};
use crate::linalg::OrderedOls;
use crate::network::{forward, mse, owo_from_cache, Dataset, ForwardCache, MlpParams};
use crate::trainers::{Algorithm, TrainConfig};

/// Halvings tried before an input-weight step is skipped.
pub const MAX_HALVINGS: usize = 20;

pub(crate) struct TwoStage<'a> {
    algorithm: Algorithm,
    data: &'a Dataset,
    params: MlpParams,
    cache: ForwardCache,
    value: f64,
    hwo: Option<OrderedOls>,
    ols_tol: f64,
    gain_tol: f64,
}

impl<'a> TwoStage<'a> {
    pub(crate) fn new(config: &TrainConfig, data: &'a Dataset, params: MlpParams) -> Result<Self> {
        let cache = forward(&params, data)?;
        let value = mse(&cache, data);
        let hwo = if config.algorithm == Algorithm::OigHwo {
            Some(hwo_factor(&input_autocorrelation(data)?, config.ols_tol)?)
        } else {
            None
        };
        Ok(Self {
            algorithm: config.algorithm,
            data,
            params,
            cache,
            value,
            hwo,
            ols_tol: config.ols_tol,
            gain_tol: config.gain_tol,
        })
    }

    pub(crate) fn params(&self) -> &MlpParams {
        &self.params
    }

    pub(crate) fn value(&self) -> f64 {
        self.value
    }

    /// One iteration; `iteration` counts from 1.
    pub(crate) fn step(&mut self, iteration: usize) -> Result<()> {
        let g = bp_gradient(&self.params, &self.cache, self.data)?;
        match self.algorithm {
            Algorithm::OwoBp => {
                if g.0.iter().any(|&v| v != 0.0) {
                    let z = olf_from_cache(&self.params, &self.cache, self.data, &g.0, iteration - 1)?;
                    let base = self.params.clone();
                    self.guarded(|s| {
                        let mut p = base.clone();
                        p.w += &g.0 * (z * s);
                        Ok(p)
                    })?;
                }
            }
            Algorithm::OigBp | Algorithm::OigHwo => {
                let g_used = match &self.hwo {
                    Some(ols) => GradientMatrix(hwo_from_factor(&g, ols)?.g_hwo),
                    None => g,
                };
                if g_used.0.iter().any(|&v| v != 0.0) {
                    let sys = gain_system(&self.params, &self.cache, self.data, &g_used)?;
                    let r = solve_gains(&sys.h_ig, &(-&sys.d_r), self.gain_tol)?;
                    if r.iter().any(|&v| v != 0.0) {
                        let base = self.params.clone();
                        self.guarded(|s| apply_gain_update(&base, &g_used.0, &(&r * s)))?;
                    }
                }
            }
            Algorithm::Scg | Algorithm::Lm => unreachable!("not a two-stage algorithm"),
        }
        let owo = owo_from_cache(&self.params, &self.cache, self.data, self.ols_tol)?;
        self.set(owo)
    }

    fn set(&mut self, params: MlpParams) -> Result<()> {
        self.cache = forward(&params, self.data)?;
        self.value = mse(&self.cache, self.data);
        self.params = params;
        Ok(())
    }

    /// Applies `update(scale)` with `scale = 1, 1/2, 1/4, …` until the
    /// training error does not increase; leaves the network unchanged if no
    /// scale works.
    fn guarded(&mut self, update: impl Fn(f64) -> Result<MlpParams>) -> Result<()> {
        let mut scale = 1.0;
        for _ in 0..=MAX_HALVINGS {
            let trial = update(scale)?;
            let cache = forward(&trial, self.data)?;
            let e = mse(&cache, self.data);
            if e <= self.value {
                self.params = trial;
                self.cache = cache;
                self.value = e;
                return Ok(());
            }
            scale *= 0.5;
        }
        Ok(())
    }
}

/// The OIG gain vector for the current network and a given gradient matrix,
/// without backtracking.
pub fn oig_gains(params: &MlpParams, data: &Dataset, g_used: &DMatrix<f64>, tol: f64) -> Result<DVector<f64>> {
    let cache = forward(params, data)?;
    let sys = gain_system(params, &cache, data, &GradientMatrix(g_used.clone()))?;
    solve_gains(&sys.h_ig, &(-&sys.d_r), tol)
}
