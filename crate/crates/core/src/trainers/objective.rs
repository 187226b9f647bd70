//! Flat-vector view of the network weights for whole-network optimizers.
//!
//! The flat vector is `vec(W, W_oh, W_oi)`, each block column-major.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::network::{forward, mse, Dataset, ForwardCache, MlpParams};

/// A differentiable scalar function of a flat parameter vector.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, w: &DVector<f64>) -> Result<f64>;
    /// Value and gradient `∇f(w)`.
    fn value_and_gradient(&self, w: &DVector<f64>) -> Result<(f64, DVector<f64>)>;
}

pub fn flatten(params: &MlpParams) -> DVector<f64> {
    let it = params.w.iter().chain(params.w_oh.iter()).chain(params.w_oi.iter()).copied();
    DVector::from_iterator(params.n_weights(), it)
}

/// Inverse of [`flatten`], using `template` for shapes and activation.
pub fn unflatten(template: &MlpParams, w: &DVector<f64>) -> Result<MlpParams> {
    if w.len() != template.n_weights() {
        return Err(Error::shape("unflatten", template.n_weights(), w.len()));
    }
    let (nh, n1, m) = (template.n_hidden(), template.n_inputs() + 1, template.n_outputs());
    let s = w.as_slice();
    let a = nh * n1;
    let b = a + m * nh;
    Ok(MlpParams {
        w: DMatrix::from_column_slice(nh, n1, &s[..a]),
        w_oh: DMatrix::from_column_slice(m, nh, &s[a..b]),
        w_oi: DMatrix::from_column_slice(m, n1, &s[b..]),
        activation: template.activation,
    })
}

/// `∇E` with respect to all weights, in flat order.
pub fn full_gradient(params: &MlpParams, cache: &ForwardCache, data: &Dataset) -> DVector<f64> {
    let nv = data.n_patterns() as f64;
    let residual = data.targets() - &cache.outputs;
    let mut delta = &residual * &params.w_oh;
    delta.component_mul_assign(&cache.act_deriv);
    let gw = delta.tr_mul(data.inputs()) * (-2.0 / nv);
    let goh = residual.tr_mul(&cache.act) * (-2.0 / nv);
    let goi = residual.tr_mul(data.inputs()) * (-2.0 / nv);
    let it = gw.iter().chain(goh.iter()).chain(goi.iter()).copied();
    DVector::from_iterator(params.n_weights(), it)
}

/// Jacobian of the outputs, rows ordered `(p, i)` as `p·M + i`, columns in
/// flat weight order.
pub fn jacobian(params: &MlpParams, cache: &ForwardCache, data: &Dataset) -> DMatrix<f64> {
    let (nh, n1, m) = (params.n_hidden(), params.n_inputs() + 1, params.n_outputs());
    let nv = data.n_patterns();
    let x = data.inputs();
    let off_oh = nh * n1;
    let off_oi = off_oh + m * nh;
    let mut j = DMatrix::<f64>::zeros(nv * m, params.n_weights());
    for p in 0..nv {
        for i in 0..m {
            let row = p * m + i;
            for k in 0..nh {
                let s = params.w_oh[(i, k)] * cache.act_deriv[(p, k)];
                if s != 0.0 {
                    for n in 0..n1 {
                        j[(row, n * nh + k)] = s * x[(p, n)];
                    }
                }
                j[(row, off_oh + k * m + i)] = cache.act[(p, k)];
            }
            for n in 0..n1 {
                j[(row, off_oi + n * m + i)] = x[(p, n)];
            }
        }
    }
    j
}

/// Training MSE of the network as a function of its flat weights.
pub struct MlpObjective<'a> {
    pub template: MlpParams,
    pub data: &'a Dataset,
}

impl Objective for MlpObjective<'_> {
    fn dim(&self) -> usize {
        self.template.n_weights()
    }

    fn value(&self, w: &DVector<f64>) -> Result<f64> {
        let p = unflatten(&self.template, w)?;
        Ok(mse(&forward(&p, self.data)?, self.data))
    }

    fn value_and_gradient(&self, w: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let p = unflatten(&self.template, w)?;
        let cache = forward(&p, self.data)?;
        Ok((mse(&cache, self.data), full_gradient(&p, &cache, self.data)))
    }
}
