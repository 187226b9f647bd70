//! Optimal input gains: a Gauss-Newton system for one gain per input column
//! of the input-weight update.
//!
//! With gains `r`, the update is `w(k,n) ← w(k,n) + r(n)·g(k,n)`, so
//! `∂y_p(i)/∂r(m) = x_p(m)·v_p(i,m)` where
//! `v_p(i,m) = Σ_k w_oh(i,k) o'_p(k) g(k,m)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gradients::GradientMatrix;
use crate::linalg::{ols_factor, ols_solve, SymmetricMatrix};
use crate::network::{Dataset, ForwardCache, MlpParams};

/// Patterns per accumulation block when building `H_ig`.
const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct GainSystem {
    /// `d_r(m) = ∂E/∂r(m)` at `r = 0`.
    pub d_r: DVector<f64>,
    pub h_ig: SymmetricMatrix,
    /// Solved gains; empty until [`GainSystem::solve`] is called.
    pub r: DVector<f64>,
}

impl GainSystem {
    /// Newton gains `r = −H_ig⁻¹ d_r`, dependent directions frozen at zero.
    pub fn solve(&mut self, tol: f64) -> Result<&DVector<f64>> {
        self.r = solve_gains(&self.h_ig, &(-&self.d_r), tol)?;
        Ok(&self.r)
    }
}

/// The diagonal transform `R = diag(r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalGainMatrix {
    pub diag: DVector<f64>,
}

impl DiagonalGainMatrix {
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.diag)
    }
}

fn check_system(params: &MlpParams, cache: &ForwardCache, data: &Dataset, g: &GradientMatrix) -> Result<()> {
    params.check_compatible(data)?;
    if g.0.shape() != params.w.shape() {
        return Err(Error::shape(
            "gain system gradient",
            format!("{:?}", params.w.shape()),
            format!("{:?}", g.0.shape()),
        ));
    }
    if cache.act_deriv.shape() != (data.n_patterns(), params.n_hidden()) {
        return Err(Error::shape(
            "gain system cache",
            format!("{:?}", (data.n_patterns(), params.n_hidden())),
            format!("{:?}", cache.act_deriv.shape()),
        ));
    }
    Ok(())
}

pub fn gain_intermediate_v(
    params: &MlpParams,
    cache: &ForwardCache,
    g: &GradientMatrix,
    p: usize,
    i: usize,
    m: usize,
) -> f64 {
    (0..params.n_hidden())
        .map(|k| params.w_oh[(i, k)] * cache.act_deriv[(p, k)] * g.0[(k, m)])
        .sum()
}

/// `d_r(m) = (−2/N_v) Σ_p x_p(m) Σ_i [t_p(i) − y_p(i)] v_p(i,m)`.
pub fn gain_gradient(
    params: &MlpParams,
    cache: &ForwardCache,
    data: &Dataset,
    g: &GradientMatrix,
) -> Result<DVector<f64>> {
    check_system(params, cache, data, g)?;
    let nv = data.n_patterns() as f64;
    // Σ_i e_p(i) v_p(i,m) = Σ_k [(W_ohᵀ e_p) ∘ o'_p](k) g(k,m)
    let mut delta = (data.targets() - &cache.outputs) * &params.w_oh;
    delta.component_mul_assign(&cache.act_deriv);
    let mut q = delta * &g.0;
    q.component_mul_assign(data.inputs());
    let d_r = q.row_sum().transpose() * (-2.0 / nv);
    Ok(d_r)
}

/// `h_ig(m,u) = (2/N_v) Σ_p x_p(m) x_p(u) Σ_i v_p(i,m) v_p(i,u)`.
///
/// Accumulated over blocks of patterns; `v` is never stored for the whole
/// dataset.
pub fn gain_hessian(
    params: &MlpParams,
    cache: &ForwardCache,
    data: &Dataset,
    g: &GradientMatrix,
) -> Result<SymmetricMatrix> {
    check_system(params, cache, data, g)?;
    let n1 = data.n_inputs() + 1;
    let nv = data.n_patterns();
    let m_out = params.n_outputs();
    let x = data.inputs();
    let mut h = DMatrix::<f64>::zeros(n1, n1);

    let mut start = 0;
    while start < nv {
        let len = CHUNK.min(nv - start);
        let od = cache.act_deriv.rows(start, len);
        let xc = x.rows(start, len);
        // z rows: (pattern, output) pairs; z(·, m) = x_p(m) v_p(i,m)
        let mut z = DMatrix::<f64>::zeros(len * m_out, n1);
        for i in 0..m_out {
            let mut scaled = od.into_owned();
            for k in 0..params.n_hidden() {
                let w = params.w_oh[(i, k)];
                scaled.column_mut(k).scale_mut(w);
            }
            let mut v = scaled * &g.0;
            v.component_mul_assign(&xc);
            z.rows_mut(i * len, len).copy_from(&v);
        }
        h += z.tr_mul(&z);
        start += len;
    }
    h *= 2.0 / nv as f64;
    SymmetricMatrix::from_lower(h)
}

pub fn gain_system(
    params: &MlpParams,
    cache: &ForwardCache,
    data: &Dataset,
    g: &GradientMatrix,
) -> Result<GainSystem> {
    Ok(GainSystem {
        d_r: gain_gradient(params, cache, data, g)?,
        h_ig: gain_hessian(params, cache, data, g)?,
        r: DVector::zeros(0),
    })
}

/// Solves `H_ig · r = rhs` by OLS; singular directions get `r = 0`.
pub fn solve_gains(h_ig: &SymmetricMatrix, rhs: &DVector<f64>, tol: f64) -> Result<DVector<f64>> {
    if rhs.len() != h_ig.order() {
        return Err(Error::shape("solve_gains", h_ig.order(), rhs.len()));
    }
    let factor = ols_factor(h_ig, tol)?;
    let c = DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice());
    let rep = ols_solve(h_ig, &c, &factor)?;
    Ok(rep.solution.row(0).transpose())
}

/// `w(k,n) ← w(k,n) + r(n)·g(k,n)`.
pub fn apply_gain_update(params: &MlpParams, g_used: &DMatrix<f64>, r: &DVector<f64>) -> Result<MlpParams> {
    if g_used.shape() != params.w.shape() || r.len() != params.w.ncols() {
        return Err(Error::shape(
            "apply_gain_update",
            format!("{:?} and {}", params.w.shape(), params.w.ncols()),
            format!("{:?} and {}", g_used.shape(), r.len()),
        ));
    }
    let mut out = params.clone();
    for n in 0..r.len() {
        let rn = r[n];
        if rn == 0.0 {
            continue;
        }
        for k in 0..out.w.nrows() {
            out.w[(k, n)] += rn * g_used[(k, n)];
        }
    }
    Ok(out)
}
