//! Independent reference computations used by the tests.
//!
//! Finite differences here avoid subtracting two nearly equal error values:
//! the change of a sigmoid under a symmetric perturbation `±d` of its net
//! function is evaluated in closed form as
//! `σ(n+d) − σ(n−d) = sinh(d) / (2 cosh((n+d)/2) cosh((n−d)/2))`, and the
//! error difference as `E₊ − E₋ = (1/N_v) Σ −Δy (2t − y₊ − y₋)`.

#![allow(dead_code)]

use nalgebra::DMatrix;
use oig_core::network::{Activation, Dataset, MlpParams, Task};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const FD_STEP: f64 = 1e-6;

pub fn sigmoid(n: f64) -> f64 {
    1.0 / (1.0 + (-n).exp())
}

fn sigmoid_delta(n: f64, d: f64) -> f64 {
    d.sinh() / (2.0 * ((n + d) / 2.0).cosh() * ((n - d) / 2.0).cosh())
}

/// Random sigmoid network and dataset with `N, N_h, M ≤ 6`, `N_v ≤ 20`.
pub fn random_instance(seed: u64) -> (MlpParams, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=6);
    let nh = rng.random_range(1..=6);
    let m = rng.random_range(1..=6);
    let nv = rng.random_range(n + 2..=20);
    sized_instance(&mut rng, nv, n, nh, m)
}

pub fn sized_instance(rng: &mut ChaCha8Rng, nv: usize, n: usize, nh: usize, m: usize) -> (MlpParams, Dataset) {
    let mut draw = || -> f64 { StandardNormal.sample(rng) };
    let f = DMatrix::from_fn(nv, n, |_, _| draw());
    let t = DMatrix::from_fn(nv, m, |_, _| draw());
    let data = Dataset::new(&f, t, Task::Approximation).unwrap();
    let mut p = MlpParams::zeros(n, nh, m, Activation::Sigmoid);
    p.w = DMatrix::from_fn(nh, n + 1, |_, _| draw());
    p.w_oi = DMatrix::from_fn(m, n + 1, |_, _| draw());
    p.w_oh = DMatrix::from_fn(m, nh, |_, _| draw());
    (p, data)
}

/// Outputs by explicit loops.
pub fn naive_outputs(p: &MlpParams, data: &Dataset) -> DMatrix<f64> {
    let x = data.inputs();
    let (nv, n1) = x.shape();
    DMatrix::from_fn(nv, p.n_outputs(), |q, i| {
        let mut y = 0.0;
        for n in 0..n1 {
            y += p.w_oi[(i, n)] * x[(q, n)];
        }
        for k in 0..p.n_hidden() {
            let net: f64 = (0..n1).map(|n| p.w[(k, n)] * x[(q, n)]).sum();
            y += p.w_oh[(i, k)] * sigmoid(net);
        }
        y
    })
}

pub fn naive_mse(p: &MlpParams, data: &Dataset) -> f64 {
    let y = naive_outputs(p, data);
    let t = data.targets();
    let mut e = 0.0;
    for q in 0..t.nrows() {
        for i in 0..t.ncols() {
            e += (t[(q, i)] - y[(q, i)]).powi(2);
        }
    }
    e / t.nrows() as f64
}

/// `(E(w + h·u) − E(w − h·u)) / 2h` where the perturbation shifts hidden
/// unit nets by `±h·dnet[(p, k)]`.
fn central_difference(p: &MlpParams, data: &Dataset, dnet: &DMatrix<f64>, h: f64) -> f64 {
    let x = data.inputs();
    let t = data.targets();
    let y = naive_outputs(p, data);
    let (nv, m) = t.shape();
    let mut diff = 0.0;
    for q in 0..nv {
        for i in 0..m {
            let mut up = 0.0;
            let mut down = 0.0;
            let mut delta = 0.0;
            for k in 0..p.n_hidden() {
                let d = h * dnet[(q, k)];
                if d == 0.0 {
                    continue;
                }
                let net: f64 = (0..x.ncols()).map(|n| p.w[(k, n)] * x[(q, n)]).sum();
                let o = sigmoid(net);
                let w = p.w_oh[(i, k)];
                up += w * (sigmoid(net + d) - o);
                down += w * (sigmoid(net - d) - o);
                delta += w * sigmoid_delta(net, d);
            }
            let yp = y[(q, i)] + up;
            let ym = y[(q, i)] + down;
            diff += -delta * (2.0 * t[(q, i)] - yp - ym);
        }
    }
    diff / nv as f64 / (2.0 * h)
}

/// Finite-difference `∂E/∂w(k, n)`.
pub fn fd_input_weight(p: &MlpParams, data: &Dataset, k: usize, n: usize) -> f64 {
    let x = data.inputs();
    let dnet = DMatrix::from_fn(x.nrows(), p.n_hidden(), |q, kk| if kk == k { x[(q, n)] } else { 0.0 });
    central_difference(p, data, &dnet, FD_STEP)
}

/// Finite-difference `∂E/∂r(m)` at `r = 0` for the update `w(k,m) += r(m) g(k,m)`.
pub fn fd_gain(p: &MlpParams, data: &Dataset, g: &DMatrix<f64>, m: usize) -> f64 {
    let x = data.inputs();
    let dnet = DMatrix::from_fn(x.nrows(), p.n_hidden(), |q, k| g[(k, m)] * x[(q, m)]);
    central_difference(p, data, &dnet, FD_STEP)
}

/// Negative gradient of the network in transformed coordinates
/// `x' = A x`, `W' = W A⁻¹`, accumulated pattern by pattern.
pub fn transformed_gradient(p: &MlpParams, data: &Dataset, a: &DMatrix<f64>) -> DMatrix<f64> {
    let a_inv = a.clone().try_inverse().expect("nonsingular transform");
    let w_t = &p.w * a_inv;
    let x = data.inputs();
    let t = data.targets();
    let y = naive_outputs(p, data);
    let (nv, n1) = x.shape();
    let mut g = DMatrix::<f64>::zeros(p.n_hidden(), n1);
    for q in 0..nv {
        let xq: Vec<f64> = (0..n1).map(|r| (0..n1).map(|c| a[(r, c)] * x[(q, c)]).sum()).collect();
        for k in 0..p.n_hidden() {
            let net: f64 = (0..n1).map(|n| w_t[(k, n)] * xq[n]).sum();
            let o = sigmoid(net);
            let back: f64 = (0..p.n_outputs()).map(|i| 2.0 * (t[(q, i)] - y[(q, i)]) * p.w_oh[(i, k)]).sum();
            let delta = o * (1.0 - o) * back;
            for n in 0..n1 {
                g[(k, n)] += delta * xq[n];
            }
        }
    }
    g / nv as f64
}

/// Relative error `|a − b| / max(|b|, 1e-12)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}
