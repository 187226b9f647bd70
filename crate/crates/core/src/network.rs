//! Single-hidden-layer MLP with bypass (input-to-output) connections.
//!
//! Inputs are augmented with a trailing constant 1, so the last column of the
//! input weights `W` and of the bypass weights `W_oi` holds the thresholds.
//! Output units are linear: `y_p = W_oi · x_p + W_oh · f(W · x_p)`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{bias_first_order, OrderedOls, SymmetricMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Activation {
    #[default]
    Sigmoid,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, net: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-net).exp()),
            Activation::Relu => net.max(0.0),
        }
    }

    /// Derivative with respect to the net function. ReLU uses 0 at `net == 0`.
    #[inline]
    pub fn derivative(self, net: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                let o = self.apply(net);
                o * (1.0 - o)
            }
            Activation::Relu => {
                if net > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Relu => "relu",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::invalid(format!("unknown activation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Task {
    #[default]
    Approximation,
    Classification,
}

/// Training patterns with bias-augmented inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: DMatrix<f64>,
    targets: DMatrix<f64>,
    task: Task,
}

impl Dataset {
    /// Builds a dataset from raw features `[N_v × N]`, appending the constant
    /// input.
    pub fn new(features: &DMatrix<f64>, targets: DMatrix<f64>, task: Task) -> Result<Self> {
        let (nv, n) = features.shape();
        let inputs = DMatrix::from_fn(nv, n + 1, |p, j| if j < n { features[(p, j)] } else { 1.0 });
        Self::from_augmented(inputs, targets, task)
    }

    /// Wraps already augmented inputs; the last column must be exactly 1.
    pub fn from_augmented(inputs: DMatrix<f64>, targets: DMatrix<f64>, task: Task) -> Result<Self> {
        let (nv, cols) = inputs.shape();
        if nv == 0 || cols == 0 {
            return Err(Error::invalid("dataset must contain at least one pattern"));
        }
        if targets.nrows() != nv || targets.ncols() == 0 {
            return Err(Error::shape(
                "Dataset targets",
                format!("{nv}xM with M >= 1"),
                format!("{}x{}", targets.nrows(), targets.ncols()),
            ));
        }
        if inputs.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Dataset"));
        }
        if inputs.column(cols - 1).iter().any(|&v| v != 1.0) {
            return Err(Error::invalid("last input column must be the constant 1"));
        }
        Ok(Self { inputs, targets, task })
    }

    /// Number of inputs `N`, excluding the constant.
    pub fn n_inputs(&self) -> usize {
        self.inputs.ncols() - 1
    }

    pub fn n_outputs(&self) -> usize {
        self.targets.ncols()
    }

    pub fn n_patterns(&self) -> usize {
        self.inputs.nrows()
    }

    /// Augmented inputs `[N_v × (N+1)]`.
    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn targets(&self) -> &DMatrix<f64> {
        &self.targets
    }

    pub fn task(&self) -> Task {
        self.task
    }

    /// Patterns selected by index, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            inputs: self.inputs.select_rows(indices),
            targets: self.targets.select_rows(indices),
            task: self.task,
        }
    }

    /// Mean square of each target component, `(1/N_v) Σ_p t_p(i)²`.
    pub fn target_energy(&self) -> Vec<f64> {
        let nv = self.n_patterns() as f64;
        (0..self.n_outputs())
            .map(|i| self.targets.column(i).iter().map(|t| t * t).sum::<f64>() / nv)
            .collect()
    }
}

/// Network weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    /// Input weights `[N_h × (N+1)]`.
    pub w: DMatrix<f64>,
    /// Bypass weights `[M × (N+1)]`.
    pub w_oi: DMatrix<f64>,
    /// Hidden-to-output weights `[M × N_h]`.
    pub w_oh: DMatrix<f64>,
    pub activation: Activation,
}

impl MlpParams {
    pub fn zeros(n_inputs: usize, n_hidden: usize, n_outputs: usize, activation: Activation) -> Self {
        Self {
            w: DMatrix::zeros(n_hidden, n_inputs + 1),
            w_oi: DMatrix::zeros(n_outputs, n_inputs + 1),
            w_oh: DMatrix::zeros(n_outputs, n_hidden),
            activation,
        }
    }

    pub fn n_hidden(&self) -> usize {
        self.w.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.w.ncols() - 1
    }

    pub fn n_outputs(&self) -> usize {
        self.w_oh.nrows()
    }

    /// Weights per output unit, `N_u = N + N_h + 1`.
    pub fn n_basis(&self) -> usize {
        self.n_inputs() + self.n_hidden() + 1
    }

    /// Total weight count `N_w = M(N + N_h + 1) + N_h(N + 1)`.
    pub fn n_weights(&self) -> usize {
        self.n_outputs() * self.n_basis() + self.n_hidden() * (self.n_inputs() + 1)
    }

    pub fn check_compatible(&self, data: &Dataset) -> Result<()> {
        let n1 = data.n_inputs() + 1;
        let (nh, m) = (self.n_hidden(), data.n_outputs());
        if self.w.shape() != (nh, n1) || self.w_oi.shape() != (m, n1) || self.w_oh.shape() != (m, nh) {
            return Err(Error::shape(
                "MlpParams vs Dataset",
                format!("W {nh}x{n1}, W_oi {m}x{n1}, W_oh {m}x{nh}"),
                format!(
                    "W {:?}, W_oi {:?}, W_oh {:?}",
                    self.w.shape(),
                    self.w_oi.shape(),
                    self.w_oh.shape()
                ),
            ));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().chain(self.w_oi.iter()).chain(self.w_oh.iter()).all(|v| v.is_finite())
    }

    /// Same network with `extra` zero-weight inputs inserted just before the
    /// constant input. The network function is unchanged on data whose extra
    /// inputs are appended the same way.
    pub fn with_appended_inputs(&self, extra: usize) -> Self {
        let n = self.n_inputs();
        let widen = |m: &DMatrix<f64>| {
            DMatrix::from_fn(m.nrows(), n + extra + 1, |r, c| {
                if c < n {
                    m[(r, c)]
                } else if c < n + extra {
                    0.0
                } else {
                    m[(r, n)]
                }
            })
        };
        Self {
            w: widen(&self.w),
            w_oi: widen(&self.w_oi),
            w_oh: self.w_oh.clone(),
            activation: self.activation,
        }
    }
}

/// Per-pattern intermediate quantities of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    /// Net functions `n_p`, `[N_v × N_h]`.
    pub net: DMatrix<f64>,
    /// Activations `o_p`, `[N_v × N_h]`.
    pub act: DMatrix<f64>,
    /// Activation derivatives `o'_p`, `[N_v × N_h]`.
    pub act_deriv: DMatrix<f64>,
    /// Outputs `y_p`, `[N_v × M]`.
    pub outputs: DMatrix<f64>,
}

pub fn forward(params: &MlpParams, data: &Dataset) -> Result<ForwardCache> {
    params.check_compatible(data)?;
    let x = data.inputs();
    let net = x * params.w.transpose();
    let f = params.activation;
    let act = net.map(|n| f.apply(n));
    let act_deriv = net.map(|n| f.derivative(n));
    let outputs = x * params.w_oi.transpose() + &act * params.w_oh.transpose();
    Ok(ForwardCache {
        net,
        act,
        act_deriv,
        outputs,
    })
}

/// `E = (1/N_v) Σ_p Σ_i [t_p(i) − y_p(i)]²`.
pub fn mse(cache: &ForwardCache, data: &Dataset) -> f64 {
    outputs_mse(&cache.outputs, data.targets())
}

pub(crate) fn outputs_mse(outputs: &DMatrix<f64>, targets: &DMatrix<f64>) -> f64 {
    let nv = targets.nrows() as f64;
    let mut e = 0.0;
    for p in 0..targets.nrows() {
        for i in 0..targets.ncols() {
            let d = targets[(p, i)] - outputs[(p, i)];
            e += d * d;
        }
    }
    e / nv
}

/// Fraction of patterns whose output argmax differs from the target argmax.
/// Ties go to the lowest index.
pub fn classification_error(cache: &ForwardCache, data: &Dataset) -> Result<f64> {
    let m = data.n_outputs();
    if m < 2 {
        return Err(Error::invalid("classification error needs at least two one-hot outputs"));
    }
    if cache.outputs.shape() != data.targets().shape() {
        return Err(Error::shape(
            "classification_error",
            format!("{:?}", data.targets().shape()),
            format!("{:?}", cache.outputs.shape()),
        ));
    }
    let argmax = |row: nalgebra::DMatrixView<'_, f64>| {
        let mut best = 0;
        for i in 1..row.ncols() {
            if row[(0, i)] > row[(0, best)] {
                best = i;
            }
        }
        best
    };
    let wrong = (0..data.n_patterns())
        .filter(|&p| argmax(cache.outputs.rows(p, 1)) != argmax(data.targets().rows(p, 1)))
        .count();
    Ok(wrong as f64 / data.n_patterns() as f64)
}

/// Target statistics of every hidden unit's net function after net control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetControl {
    pub mean: f64,
    pub std: f64,
}

impl Default for NetControl {
    fn default() -> Self {
        Self { mean: 0.5, std: 1.0 }
    }
}

const NET_CONTROL_RETRIES: usize = 32;

/// Seeded initialization with controlled net-function statistics, followed by
/// an output weight solve.
pub fn net_control_init(
    data: &Dataset,
    n_hidden: usize,
    activation: Activation,
    seed: u64,
) -> Result<MlpParams> {
    net_control_init_with(data, n_hidden, activation, seed, NetControl::default(), crate::linalg::DEFAULT_OLS_TOL)
}

pub fn net_control_init_with(
    data: &Dataset,
    n_hidden: usize,
    activation: Activation,
    seed: u64,
    control: NetControl,
    ols_tol: f64,
) -> Result<MlpParams> {
    if n_hidden == 0 {
        return Err(Error::invalid("n_hidden must be positive"));
    }
    if !(control.std > 0.0) || !control.mean.is_finite() {
        return Err(Error::invalid("net control target std must be positive"));
    }
    let n = data.n_inputs();
    let nv = data.n_patterns() as f64;
    let x = data.inputs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = MlpParams::zeros(n, n_hidden, data.n_outputs(), activation);

    for k in 0..n_hidden {
        let mut attempt = 0;
        loop {
            let row: Vec<f64> = (0..=n).map(|_| StandardNormal.sample(&mut rng)).collect();
            // net function without the threshold
            let nets: Vec<f64> = (0..data.n_patterns())
                .map(|p| (0..n).map(|j| row[j] * x[(p, j)]).sum())
                .collect();
            let mean = nets.iter().sum::<f64>() / nv;
            let var = nets.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nv;
            let std = var.sqrt();
            if std > 1e-10 * (1.0 + mean.abs()) {
                let scale = control.std / std;
                for j in 0..n {
                    params.w[(k, j)] = row[j] * scale;
                }
                params.w[(k, n)] = control.mean - scale * mean;
                break;
            }
            attempt += 1;
            if attempt >= NET_CONTROL_RETRIES {
                return Err(Error::Degenerate(format!(
                    "hidden unit {k}: net function has zero variance after {attempt} draws"
                )));
            }
        }
    }
    owo_solve(&params, data, ols_tol)
}

/// Autocorrelation and cross-correlation of the augmented basis
/// `x_ap = [x_pᵀ : o_pᵀ]ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationPair {
    /// `R = (1/N_v) Σ x_ap x_apᵀ`, order `N_u`.
    pub r: SymmetricMatrix,
    /// `C = (1/N_v) Σ x_ap t_pᵀ`, `[N_u × M]`.
    pub c: DMatrix<f64>,
}

pub(crate) fn augmented_basis(cache: &ForwardCache, data: &Dataset) -> DMatrix<f64> {
    let n1 = data.n_inputs() + 1;
    let nh = cache.act.ncols();
    let x = data.inputs();
    DMatrix::from_fn(data.n_patterns(), n1 + nh, |p, j| {
        if j < n1 {
            x[(p, j)]
        } else {
            cache.act[(p, j - n1)]
        }
    })
}

pub fn correlations(cache: &ForwardCache, data: &Dataset) -> Result<CorrelationPair> {
    if cache.act.nrows() != data.n_patterns() {
        return Err(Error::shape("correlations", data.n_patterns(), cache.act.nrows()));
    }
    let xa = augmented_basis(cache, data);
    let nv = data.n_patterns() as f64;
    let r = xa.tr_mul(&xa) / nv;
    let c = xa.tr_mul(data.targets()) / nv;
    Ok(CorrelationPair {
        r: SymmetricMatrix::from_lower(r)?,
        c,
    })
}

/// Output weight optimization: solves `C = R · W_oᵀ` for `W_o = [W_oi : W_oh]`
/// with OLS (constant input orthonormalized first). The previous output
/// weights are kept if the solve would not lower the training error.
pub fn owo_solve(params: &MlpParams, data: &Dataset, tol: f64) -> Result<MlpParams> {
    let cache = forward(params, data)?;
    owo_from_cache(params, &cache, data, tol)
}

pub(crate) fn owo_from_cache(
    params: &MlpParams,
    cache: &ForwardCache,
    data: &Dataset,
    tol: f64,
) -> Result<MlpParams> {
    let corr = correlations(cache, data)?;
    let n1 = data.n_inputs() + 1;
    let nu = corr.r.order();
    let ols = OrderedOls::new(&corr.r, tol, bias_first_order(nu, n1 - 1))?;
    let rep = ols.solve(&corr.r, &corr.c)?;
    let w_o = rep.solution;
    if w_o.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("owo_solve solution"));
    }

    let xa = augmented_basis(cache, data);
    let new_outputs = &xa * w_o.transpose();
    let new_e = outputs_mse(&new_outputs, data.targets());
    let old_e = outputs_mse(&cache.outputs, data.targets());

    let mut out = params.clone();
    if new_e <= old_e || !old_e.is_finite() {
        out.w_oi = w_o.columns(0, n1).into_owned();
        out.w_oh = w_o.columns(n1, nu - n1).into_owned();
    }
    Ok(out)
}
