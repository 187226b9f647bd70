//! Orthogonal least squares (OLS) and the small dense linear algebra the
//! trainers need.
//!
//! Every linear system in the training algorithms (output weights, HWO
//! gradients, input gains) is solved through the same Gram-Schmidt style
//! orthonormalization of a symmetric autocorrelation matrix. A basis function
//! whose residual energy after projection onto the earlier ones falls below a
//! relative tolerance is marked dependent: its coefficient row is zeroed, so
//! the corresponding solution entries come out exactly zero.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Default relative tolerance for dependence detection.
pub const DEFAULT_OLS_TOL: f64 = 1e-8;

/// Square matrix with `a(i,j) == a(j,i)` exactly and all entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    entries: DMatrix<f64>,
}

impl SymmetricMatrix {
    /// Validates a dense matrix. Symmetry is checked exactly.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(Error::shape(
                "SymmetricMatrix::new",
                "non-empty square matrix",
                format!("{}x{}", entries.nrows(), entries.ncols()),
            ));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("SymmetricMatrix::new"));
        }
        let n = entries.nrows();
        for i in 0..n {
            for j in 0..i {
                if entries[(i, j)] != entries[(j, i)] {
                    return Err(Error::invalid(format!(
                        "matrix is not symmetric at ({i}, {j}): {} vs {}",
                        entries[(i, j)],
                        entries[(j, i)]
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    /// Builds a symmetric matrix from the lower triangle of `lower`, mirroring
    /// it onto the upper triangle.
    pub fn from_lower(mut lower: DMatrix<f64>) -> Result<Self> {
        if lower.nrows() != lower.ncols() || lower.nrows() == 0 {
            return Err(Error::shape(
                "SymmetricMatrix::from_lower",
                "non-empty square matrix",
                format!("{}x{}", lower.nrows(), lower.ncols()),
            ));
        }
        let n = lower.nrows();
        for i in 0..n {
            for j in 0..i {
                lower[(j, i)] = lower[(i, j)];
            }
        }
        Self::new(lower)
    }

    pub fn identity(order: usize) -> Self {
        Self {
            entries: DMatrix::identity(order, order),
        }
    }

    pub fn order(&self) -> usize {
        self.entries.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Returns `P R Pᵀ` where row/column `i` of the result is `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        check_permutation(order, self.order())?;
        let n = self.order();
        let entries = DMatrix::from_fn(n, n, |i, j| self.entries[(order[i], order[j])]);
        Ok(Self { entries })
    }
}

/// Lower-triangular orthonormalization coefficients.
///
/// Row `m` holds the coefficients `a(m, k)`, `k <= m`, of the `m`-th
/// orthonormal basis function in terms of the original ones. Rows flagged in
/// `dependent_mask` are entirely zero.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFactor {
    pub coeffs: DMatrix<f64>,
    pub dependent_mask: Vec<bool>,
    pub tolerance_used: f64,
}

impl OlsFactor {
    pub fn order(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn dependent_count(&self) -> usize {
        self.dependent_mask.iter().filter(|&&d| d).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolveReport {
    /// Solution `W` of `R · Wᵀ = C`, shape `[M × order]`.
    pub solution: DMatrix<f64>,
    /// Weights in the orthonormal system, shape `[M × order]`.
    pub orthonormal_weights: DMatrix<f64>,
    /// Frobenius norm of `R · Wᵀ − C`.
    pub residual_norm: f64,
    pub dependent_count: usize,
}

/// Orthonormalizes the basis functions whose autocorrelation matrix is `r`.
///
/// For `m = 0`, `a(0,0) = 1/√r(0,0)`. For later `m` the projections
/// `c_i = Σ_{q≤i} a(i,q) r(q,m)` onto the earlier orthonormal functions are
/// removed, leaving residual energy `r(m,m) − Σ c_i²`; the row is
/// `b_k / √energy` with `b_m = 1`, `b_k = −Σ_{i=k}^{m−1} c_i a(i,k)`.
///
/// Basis function `m` is dependent when `r(m,m) ≤ tol · max_j r(j,j)` or when
/// its residual energy is at most `tol · r(m,m)`.
pub fn ols_factor(r: &SymmetricMatrix, tol: f64) -> Result<OlsFactor> {
    if !(tol >= 0.0) || !tol.is_finite() {
        return Err(Error::invalid(format!("OLS tolerance must be finite and >= 0, got {tol}")));
    }
    let n = r.order();
    let rm = r.as_matrix();
    let max_diag = (0..n).map(|i| rm[(i, i)]).fold(0.0_f64, f64::max);

    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut dependent = vec![false; n];
    let mut proj = vec![0.0; n];

    for m in 0..n {
        let rmm = rm[(m, m)];
        if rmm <= 0.0 || rmm <= tol * max_diag {
            dependent[m] = true;
            continue;
        }
        let mut energy = rmm;
        for i in 0..m {
            let mut s = 0.0;
            for q in 0..=i {
                s += a[(i, q)] * rm[(q, m)];
            }
            proj[i] = s;
            energy -= s * s;
        }
        if energy <= tol * rmm {
            dependent[m] = true;
            continue;
        }
        let denom = energy.sqrt();
        for k in 0..m {
            let mut b = 0.0;
            for i in k..m {
                b -= proj[i] * a[(i, k)];
            }
            a[(m, k)] = b / denom;
        }
        a[(m, m)] = 1.0 / denom;
    }

    Ok(OlsFactor {
        coeffs: a,
        dependent_mask: dependent,
        tolerance_used: tol,
    })
}

/// Solves `R · Wᵀ = C` using a factor previously computed from `r`.
///
/// Orthonormal weights are `w'(i,m) = Σ_{k≤m} a(m,k) c(k,i)` and map back as
/// `w(i,k) = Σ_{m≥k} a(m,k) w'(i,m)`. Columns of the solution at dependent
/// positions are exactly zero.
pub fn ols_solve(
    r: &SymmetricMatrix,
    c: &DMatrix<f64>,
    factor: &OlsFactor,
) -> Result<LinearSolveReport> {
    let n = r.order();
    if factor.order() != n {
        return Err(Error::shape("ols_solve factor", n, factor.order()));
    }
    if c.nrows() != n {
        return Err(Error::shape(
            "ols_solve right-hand side rows",
            n,
            c.nrows(),
        ));
    }
    let m_out = c.ncols();
    let a = &factor.coeffs;

    let mut wprime = DMatrix::<f64>::zeros(m_out, n);
    for i in 0..m_out {
        for m in 0..n {
            if factor.dependent_mask[m] {
                continue;
            }
            let mut s = 0.0;
            for k in 0..=m {
                s += a[(m, k)] * c[(k, i)];
            }
            wprime[(i, m)] = s;
        }
    }

    let mut w = DMatrix::<f64>::zeros(m_out, n);
    for i in 0..m_out {
        for k in 0..n {
            if factor.dependent_mask[k] {
                continue;
            }
            let mut s = 0.0;
            for m in k..n {
                s += a[(m, k)] * wprime[(i, m)];
            }
            w[(i, k)] = s;
        }
    }

    let residual = r.as_matrix() * w.transpose() - c;
    Ok(LinearSolveReport {
        solution: w,
        orthonormal_weights: wprime,
        residual_norm: residual.norm(),
        dependent_count: factor.dependent_count(),
    })
}

/// Training error of the least-squares fit, read off the orthonormal weights.
///
/// `targets_energy[i]` is the mean square `(1/N_v) Σ_p t_p(i)²` and
/// `orthonormal_weights` is `[M × order]` from [`ols_solve`]; the returned
/// value is `Σ_i [targets_energy[i] − Σ_k w'(i,k)²]`, i.e. the MSE of the
/// fitted model.
pub fn ols_error_decomposition(
    targets_energy: &[f64],
    orthonormal_weights: &DMatrix<f64>,
) -> Result<f64> {
    if targets_energy.len() != orthonormal_weights.nrows() {
        return Err(Error::shape(
            "ols_error_decomposition",
            orthonormal_weights.nrows(),
            targets_energy.len(),
        ));
    }
    let mut e = 0.0;
    for (i, energy) in targets_energy.iter().enumerate() {
        let captured: f64 = orthonormal_weights.row(i).iter().map(|w| w * w).sum();
        e += energy - captured;
    }
    Ok(e)
}

/// Whitening-type factor `A = Σ^{1/2} Uᵀ` with `AᵀA = R` for PSD `r`.
///
/// Directions whose eigenvalue is at most `tol · λ_max` become zero rows.
pub fn whitening_from_autocorrelation(r: &SymmetricMatrix, tol: f64) -> Result<DMatrix<f64>> {
    spectral_factor(r, tol, f64::sqrt)
}

/// Companion of [`whitening_from_autocorrelation`] with reciprocal singular
/// values: `A_wᵀ A_w` is the pseudo-inverse of `r` on the retained subspace.
pub fn inverse_whitening_from_autocorrelation(
    r: &SymmetricMatrix,
    tol: f64,
) -> Result<DMatrix<f64>> {
    spectral_factor(r, tol, |s| 1.0 / s.sqrt())
}

fn spectral_factor(
    r: &SymmetricMatrix,
    tol: f64,
    scale: impl Fn(f64) -> f64,
) -> Result<DMatrix<f64>> {
    if !(tol >= 0.0) || !tol.is_finite() {
        return Err(Error::invalid(format!("whitening tolerance must be finite and >= 0, got {tol}")));
    }
    let n = r.order();
    let eig = SymmetricEigen::new(r.as_matrix().clone());
    let max_ev = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (row, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev <= 0.0 || ev <= tol * max_ev {
            continue;
        }
        let s = scale(ev);
        for col in 0..n {
            a[(row, col)] = s * eig.eigenvectors[(col, row)];
        }
    }
    Ok(a)
}

/// OLS carried out in a caller-chosen basis order.
///
/// Results are reported in the original indexing. The order decides which
/// member of a dependent set is frozen: the later one in processing order.
#[derive(Debug, Clone)]
pub struct OrderedOls {
    order: Vec<usize>,
    factor: OlsFactor,
}

impl OrderedOls {
    pub fn new(r: &SymmetricMatrix, tol: f64, order: Vec<usize>) -> Result<Self> {
        let permuted = r.permuted(&order)?;
        let factor = ols_factor(&permuted, tol)?;
        Ok(Self { order, factor })
    }

    /// Factor of the permuted system.
    pub fn factor(&self) -> &OlsFactor {
        &self.factor
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Dependent flags indexed by original basis function.
    pub fn dependent_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.order.len()];
        for (pos, &orig) in self.order.iter().enumerate() {
            mask[orig] = self.factor.dependent_mask[pos];
        }
        mask
    }

    /// Coefficient matrix with rows = orthonormal functions (processing
    /// order) and columns = original basis functions.
    pub fn coefficient_matrix(&self) -> DMatrix<f64> {
        let n = self.order.len();
        let mut c = DMatrix::<f64>::zeros(n, n);
        for m in 0..n {
            for (pos, &orig) in self.order.iter().enumerate() {
                c[(m, orig)] = self.factor.coeffs[(m, pos)];
            }
        }
        c
    }

    /// Solves `R · Wᵀ = C` for the unpermuted `r` and `c`.
    pub fn solve(&self, r: &SymmetricMatrix, c: &DMatrix<f64>) -> Result<LinearSolveReport> {
        let n = self.order.len();
        if c.nrows() != n {
            return Err(Error::shape("OrderedOls::solve rows", n, c.nrows()));
        }
        let rp = r.permuted(&self.order)?;
        let cp = DMatrix::from_fn(n, c.ncols(), |i, j| c[(self.order[i], j)]);
        let rep = ols_solve(&rp, &cp, &self.factor)?;
        let mut solution = DMatrix::<f64>::zeros(c.ncols(), n);
        for (pos, &orig) in self.order.iter().enumerate() {
            solution.set_column(orig, &rep.solution.column(pos));
        }
        Ok(LinearSolveReport {
            solution,
            orthonormal_weights: rep.orthonormal_weights,
            residual_norm: rep.residual_norm,
            dependent_count: rep.dependent_count,
        })
    }
}

/// Processing order that puts the constant (bias) basis function first and
/// keeps the others in their natural order.
pub fn bias_first_order(n: usize, bias: usize) -> Vec<usize> {
    std::iter::once(bias)
        .chain((0..n).filter(|&i| i != bias))
        .collect()
}

fn check_permutation(order: &[usize], n: usize) -> Result<()> {
    if order.len() != n {
        return Err(Error::shape("permutation length", n, order.len()));
    }
    let mut seen = vec![false; n];
    for &i in order {
        if i >= n || seen[i] {
            return Err(Error::invalid(format!("invalid permutation {order:?}")));
        }
        seen[i] = true;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram(vectors: &[Vec<f64>]) -> SymmetricMatrix {
        // columns are basis functions, rows are patterns
        let n = vectors.len();
        let np = vectors[0].len();
        let m = DMatrix::from_fn(n, n, |i, j| {
            (0..np).map(|p| vectors[i][p] * vectors[j][p]).sum::<f64>() / np as f64
        });
        SymmetricMatrix::from_lower(m).unwrap()
    }

    #[test]
    fn identity_factor_is_identity() {
        let f = ols_factor(&SymmetricMatrix::identity(3), 1e-12).unwrap();
        assert_eq!(f.coeffs, DMatrix::identity(3, 3));
        assert_eq!(f.dependent_mask, vec![false; 3]);
    }

    #[test]
    fn zero_energy_function_is_dependent() {
        let r = SymmetricMatrix::new(DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 0.0])).unwrap();
        let f = ols_factor(&r, 1e-12).unwrap();
        assert_eq!(f.coeffs.row(0).iter().cloned().collect::<Vec<_>>(), vec![0.5, 0.0]);
        assert!(f.coeffs.row(1).iter().all(|&v| v == 0.0));
        assert_eq!(f.dependent_mask, vec![false, true]);
    }

    #[test]
    fn sum_of_two_basis_vectors_is_dependent() {
        // v1 = (1,0), v2 = (1,1), v3 = v1 + v2 over two patterns
        let v1 = vec![1.0, 0.0];
        let v2 = vec![1.0, 1.0];
        let v3 = vec![2.0, 1.0];
        let r = gram(&[v1.clone(), v2.clone(), v3]);
        let f = ols_factor(&r, 1e-12).unwrap();
        assert_eq!(f.dependent_mask, vec![false, false, true]);

        // brute-force Gram-Schmidt on the explicit vectors, inner product (1/Np) Σ
        let dot = |a: &[f64], b: &[f64]| (a[0] * b[0] + a[1] * b[1]) / 2.0;
        let n1 = dot(&v1, &v1).sqrt();
        let e1: Vec<f64> = v1.iter().map(|x| x / n1).collect();
        let p = dot(&v2, &e1);
        let u2: Vec<f64> = v2.iter().zip(&e1).map(|(a, b)| a - p * b).collect();
        let n2 = dot(&u2, &u2).sqrt();
        let e2: Vec<f64> = u2.iter().map(|x| x / n2).collect();

        let basis = [&v1, &v2];
        for (m, oracle) in [e1, e2].iter().enumerate() {
            let mut o = [0.0; 2];
            for k in 0..=m {
                for p in 0..2 {
                    o[p] += f.coeffs[(m, k)] * basis[k][p];
                }
            }
            for p in 0..2 {
                assert!((o[p] - oracle[p]).abs() < 1e-10, "row {m} pattern {p}");
            }
        }
    }

    #[test]
    fn coeffs_are_lower_triangular_and_dependent_rows_zero() {
        let r = gram(&[
            vec![1.0, 2.0, 0.5, -1.0],
            vec![0.0, 1.0, 1.0, 3.0],
            vec![1.0, 3.0, 1.5, 2.0],
            vec![2.0, -1.0, 0.0, 1.0],
        ]);
        let f = ols_factor(&r, DEFAULT_OLS_TOL).unwrap();
        assert_eq!(f.dependent_mask, vec![false, false, true, false]);
        for m in 0..4 {
            for k in m + 1..4 {
                assert_eq!(f.coeffs[(m, k)], 0.0);
            }
        }
        assert!(f.coeffs.row(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_system_solves_directly() {
        let r = SymmetricMatrix::identity(2);
        let c = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        let f = ols_factor(&r, 1e-12).unwrap();
        let rep = ols_solve(&r, &c, &f).unwrap();
        assert_eq!(rep.solution, DMatrix::from_row_slice(1, 2, &[1.0, 2.0]));
        assert_eq!(rep.dependent_count, 0);
    }

    #[test]
    fn dependent_column_solution_is_zero() {
        let r = gram(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![2.0, 1.0]]);
        let f = ols_factor(&r, 1e-12).unwrap();
        let c = DMatrix::from_row_slice(3, 2, &[0.3, -1.0, 2.0, 0.5, 1.7, 4.0]);
        let rep = ols_solve(&r, &c, &f).unwrap();
        assert!(rep.solution.column(2).iter().all(|&v| v == 0.0));
        assert_eq!(rep.dependent_count, 1);
    }

    #[test]
    fn solve_rejects_shape_mismatch() {
        let r = SymmetricMatrix::identity(2);
        let f = ols_factor(&r, 1e-12).unwrap();
        let c = DMatrix::zeros(3, 1);
        assert!(matches!(ols_solve(&r, &c, &f), Err(Error::Shape { .. })));
    }

    #[test]
    fn factor_rejects_bad_inputs() {
        assert!(ols_factor(&SymmetricMatrix::identity(2), -1.0).is_err());
        assert!(SymmetricMatrix::new(DMatrix::zeros(2, 3)).is_err());
        assert!(SymmetricMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, f64::NAN, 1.0])).is_err());
        assert!(SymmetricMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 1.0])).is_err());
    }

    #[test]
    fn error_decomposition_zero_targets() {
        let w = DMatrix::zeros(2, 3);
        assert_eq!(ols_error_decomposition(&[0.0, 0.0], &w).unwrap(), 0.0);
    }

    #[test]
    fn error_decomposition_matches_explicit_fit() {
        // 3 patterns, basis (x, 1), one target
        let x = [1.0, 2.0, 4.0];
        let t = [1.0, 0.0, 3.0];
        let np = 3.0;
        let basis = [x.to_vec(), vec![1.0; 3]];
        let r = gram(&basis);
        let c = DMatrix::from_fn(2, 1, |k, _| (0..3).map(|p| basis[k][p] * t[p]).sum::<f64>() / np);
        let f = ols_factor(&r, 1e-12).unwrap();
        let rep = ols_solve(&r, &c, &f).unwrap();
        let energy = [t.iter().map(|v| v * v).sum::<f64>() / np];
        let e = ols_error_decomposition(&energy, &rep.orthonormal_weights).unwrap();

        let w = &rep.solution;
        let direct: f64 = (0..3)
            .map(|p| {
                let y = w[(0, 0)] * x[p] + w[(0, 1)];
                (t[p] - y).powi(2)
            })
            .sum::<f64>()
            / np;
        assert!((e - direct).abs() < 1e-10, "{e} vs {direct}");
    }

    #[test]
    fn error_decomposition_perfect_fit_is_zero() {
        let basis = [vec![1.0, -2.0, 0.5, 3.0], vec![1.0; 4]];
        let t: Vec<f64> = basis[0].iter().map(|x| 3.0 * x - 1.0).collect();
        let r = gram(&basis);
        let c = DMatrix::from_fn(2, 1, |k, _| (0..4).map(|p| basis[k][p] * t[p]).sum::<f64>() / 4.0);
        let rep = ols_solve(&r, &c, &ols_factor(&r, 1e-12).unwrap()).unwrap();
        let energy = [t.iter().map(|v| v * v).sum::<f64>() / 4.0];
        let e = ols_error_decomposition(&energy, &rep.orthonormal_weights).unwrap();
        assert!(e.abs() < 1e-9);
    }

    #[test]
    fn whitening_identity_and_diagonal() {
        let a = whitening_from_autocorrelation(&SymmetricMatrix::identity(3), 1e-12).unwrap();
        assert!((a.transpose() * &a - DMatrix::identity(3, 3)).norm() < 1e-12);

        let d = SymmetricMatrix::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 9.0]))).unwrap();
        let a = whitening_from_autocorrelation(&d, 1e-12).unwrap();
        assert!((a.transpose() * &a - d.as_matrix()).norm() < 1e-10);
    }

    #[test]
    fn whitening_rank_deficient_has_one_zero_row() {
        let u = [1.0, 2.0, -1.0];
        let v = [0.0, 1.0, 3.0];
        let r = SymmetricMatrix::from_lower(DMatrix::from_fn(3, 3, |i, j| u[i] * u[j] + v[i] * v[j])).unwrap();
        let a = whitening_from_autocorrelation(&r, 1e-10).unwrap();
        let zero_rows = (0..3).filter(|&i| a.row(i).iter().all(|&x| x == 0.0)).count();
        assert_eq!(zero_rows, 1);
        let rel = (a.transpose() * &a - r.as_matrix()).norm() / r.as_matrix().norm();
        assert!(rel < 1e-8);
    }

    #[test]
    fn inverse_whitening_inverts() {
        let r = SymmetricMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap();
        let aw = inverse_whitening_from_autocorrelation(&r, 1e-12).unwrap();
        let prod = aw.transpose() * &aw * r.as_matrix();
        assert!((prod - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn ordered_ols_reports_original_indices() {
        // basis: x, 1, x + 3 ; natural order would freeze the constant under
        // bias-last orderings, bias-first freezes the shifted copy
        let x = vec![1.0, -2.0, 0.5, 3.0];
        let shifted: Vec<f64> = x.iter().map(|v| v + 3.0).collect();
        let r = gram(&[x, vec![1.0; 4], shifted]);
        let ols = OrderedOls::new(&r, DEFAULT_OLS_TOL, bias_first_order(3, 1)).unwrap();
        assert_eq!(ols.dependent_mask(), vec![false, false, true]);
        let natural = ols_factor(&r, DEFAULT_OLS_TOL).unwrap();
        assert_eq!(natural.dependent_mask, vec![false, false, true]);
        let c = DMatrix::from_column_slice(3, 1, &[1.0, 0.5, 2.0]);
        let rep = ols.solve(&r, &c).unwrap();
        assert_eq!(rep.solution[(0, 2)], 0.0);
    }

    #[test]
    fn bias_first_order_moves_bias() {
        assert_eq!(bias_first_order(4, 2), vec![2, 0, 1, 3]);
        assert_eq!(bias_first_order(3, 2), vec![2, 0, 1]);
    }
}
