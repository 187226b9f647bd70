//! Input-weight gradients: backpropagation, HWO, the optimal learning factor,
//! and the linear-transformation identities relating them.
//!
//! Convention: `G` is the *negative* gradient `−∂E/∂W`, including the `2/N_v`
//! factor of the MSE, so `W ← W + z·G` descends.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{bias_first_order, OrderedOls, SymmetricMatrix};
use crate::network::{forward, Dataset, ForwardCache, MlpParams};

/// Negative input-weight gradient `[N_h × (N+1)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMatrix(pub DMatrix<f64>);

impl GradientMatrix {
    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// HWO direction `G_hwo = G · Cᵀ · C`, with `C` the OLS coefficients of `R_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct HwoGradient {
    pub g_hwo: DMatrix<f64>,
    /// Inputs found linearly dependent on the others; their columns of
    /// `g_hwo` are exactly zero.
    pub dependent_mask: Vec<bool>,
}

/// `R_i = (1/N_v) Σ_p x_p x_pᵀ` over augmented inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct InputAutocorrelation(pub SymmetricMatrix);

impl InputAutocorrelation {
    pub fn matrix(&self) -> &SymmetricMatrix {
        &self.0
    }
}

/// Backpropagation negative gradient `G = (1/N_v) Σ_p δ_p x_pᵀ` with
/// `δ_p(k) = o'_p(k) Σ_i 2[t_p(i) − y_p(i)] w_oh(i,k)`.
pub fn bp_gradient(params: &MlpParams, cache: &ForwardCache, data: &Dataset) -> Result<GradientMatrix> {
    params.check_compatible(data)?;
    if cache.outputs.shape() != data.targets().shape() || cache.act_deriv.ncols() != params.n_hidden() {
        return Err(Error::shape(
            "bp_gradient cache",
            format!("outputs {:?}", data.targets().shape()),
            format!("outputs {:?}", cache.outputs.shape()),
        ));
    }
    let nv = data.n_patterns() as f64;
    let residual = data.targets() - &cache.outputs;
    let mut delta = residual * &params.w_oh;
    delta.component_mul_assign(&cache.act_deriv);
    let g = delta.tr_mul(data.inputs()) * (2.0 / nv);
    Ok(GradientMatrix(g))
}

pub fn input_autocorrelation(data: &Dataset) -> Result<InputAutocorrelation> {
    let x = data.inputs();
    let r = x.tr_mul(x) / data.n_patterns() as f64;
    Ok(InputAutocorrelation(SymmetricMatrix::from_lower(r)?))
}

/// OLS factorization of `R_i`, constant input first. Computed once per
/// dataset and reused by [`hwo_from_factor`].
pub fn hwo_factor(r_i: &InputAutocorrelation, tol: f64) -> Result<OrderedOls> {
    let n1 = r_i.0.order();
    OrderedOls::new(&r_i.0, tol, bias_first_order(n1, n1 - 1))
}

pub fn hwo_gradient(g: &GradientMatrix, r_i: &InputAutocorrelation, tol: f64) -> Result<HwoGradient> {
    let ols = hwo_factor(r_i, tol)?;
    hwo_from_factor(g, &ols)
}

pub fn hwo_from_factor(g: &GradientMatrix, ols: &OrderedOls) -> Result<HwoGradient> {
    let c = ols.coefficient_matrix();
    if g.0.ncols() != c.ncols() {
        return Err(Error::shape("hwo_gradient", c.ncols(), g.0.ncols()));
    }
    let g_prime = &g.0 * c.transpose();
    let g_hwo = g_prime * c;
    Ok(HwoGradient {
        g_hwo,
        dependent_mask: ols.dependent_mask(),
    })
}

/// Step along `direction` from the Newton ratio of the first to the
/// Gauss-Newton second directional derivative of `E` at `z = 0`.
///
/// When the curvature is below `1e-12·|slope|` the step falls back to
/// `0.1 / (1 + iteration)`.
pub fn optimal_learning_factor(
    params: &MlpParams,
    data: &Dataset,
    direction: &DMatrix<f64>,
    iteration: usize,
) -> Result<f64> {
    let cache = forward(params, data)?;
    olf_from_cache(params, &cache, data, direction, iteration)
}

pub(crate) fn olf_from_cache(
    params: &MlpParams,
    cache: &ForwardCache,
    data: &Dataset,
    direction: &DMatrix<f64>,
    iteration: usize,
) -> Result<f64> {
    if direction.shape() != params.w.shape() {
        return Err(Error::shape(
            "optimal_learning_factor direction",
            format!("{:?}", params.w.shape()),
            format!("{:?}", direction.shape()),
        ));
    }
    if !direction.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("optimal_learning_factor direction"));
    }
    if direction.iter().all(|&v| v == 0.0) {
        return Err(Error::invalid("optimal learning factor needs a nonzero direction"));
    }
    let nv = data.n_patterns() as f64;
    // dn_p/dz = P x_p, dy_p/dz = W_oh (o'_p ∘ P x_p)
    let mut dnet = data.inputs() * direction.transpose();
    dnet.component_mul_assign(&cache.act_deriv);
    let dy = dnet * params.w_oh.transpose();
    let residual = data.targets() - &cache.outputs;
    let slope = 2.0 / nv * residual.dot(&dy);
    let curvature = 2.0 / nv * dy.norm_squared();
    if curvature <= 1e-12 * slope.abs() || curvature == 0.0 {
        return Ok(0.1 / (1.0 + iteration as f64));
    }
    Ok(slope / curvature)
}

/// Mapped gradient `G'' = G · R` for a transformation with `R = AᵀA`.
pub fn transform_gradient(g: &GradientMatrix, rmat: &SymmetricMatrix) -> Result<GradientMatrix> {
    if g.0.ncols() != rmat.order() {
        return Err(Error::shape("transform_gradient", g.0.ncols(), rmat.order()));
    }
    Ok(GradientMatrix(&g.0 * rmat.as_matrix()))
}

/// Affine transform `A` with `A · x_p` zero-mean in the first `N` components
/// and 1 in the last.
pub fn mean_removal_transform(data: &Dataset) -> DMatrix<f64> {
    let n = data.n_inputs();
    let nv = data.n_patterns() as f64;
    let x = data.inputs();
    let mut a = DMatrix::identity(n + 1, n + 1);
    for j in 0..n {
        a[(j, n)] = -x.column(j).iter().sum::<f64>() / nv;
    }
    a
}
