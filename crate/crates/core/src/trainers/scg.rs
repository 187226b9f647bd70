//! Scaled conjugate gradient over a flat parameter vector.
//!
//! Curvature along the search direction comes from a one-sided difference of
//! gradients; a Levenberg-style scale `λ` keeps the local model positive
//! definite and is adapted from the ratio of actual to predicted decrease.
//! Directions follow `p ← r + B_1·p` with `B_1 = ‖g_k‖² / ‖g_{k−1}‖²`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::trainers::objective::Objective;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScgParams {
    /// Difference step for the curvature estimate, divided by `‖p‖`.
    pub sigma: f64,
    /// Initial scale `λ`.
    pub lambda_init: f64,
    /// Restart with steepest descent every this many accepted steps
    /// (0 means the parameter count).
    pub restart_every: usize,
}

impl Default for ScgParams {
    fn default() -> Self {
        Self {
            sigma: 5e-5,
            lambda_init: 5e-7,
            restart_every: 0,
        }
    }
}

/// Outcome of one [`ScgState::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScgStep {
    pub accepted: bool,
    /// Direction coefficient used after an accepted step, `None` on restart
    /// or rejection.
    pub beta: Option<f64>,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct ScgState {
    params: ScgParams,
    w: DVector<f64>,
    value: f64,
    /// Negative gradient at `w`.
    r: DVector<f64>,
    p: DVector<f64>,
    lambda: f64,
    lambda_bar: f64,
    success: bool,
    delta: f64,
    since_restart: usize,
}

impl ScgState {
    pub fn new(obj: &dyn Objective, w0: DVector<f64>, params: ScgParams) -> Result<Self> {
        if w0.len() != obj.dim() {
            return Err(Error::shape("ScgState::new", obj.dim(), w0.len()));
        }
        if !(params.sigma > 0.0) || !(params.lambda_init > 0.0) {
            return Err(Error::invalid("SCG sigma and lambda must be positive"));
        }
        let (value, g) = obj.value_and_gradient(&w0)?;
        let r = -g;
        Ok(Self {
            params,
            p: r.clone(),
            r,
            w: w0,
            value,
            lambda: params.lambda_init,
            lambda_bar: 0.0,
            success: true,
            delta: 0.0,
            since_restart: 0,
        })
    }

    pub fn w(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Current gradient `∇f(w)`.
    pub fn gradient(&self) -> DVector<f64> {
        -&self.r
    }

    pub fn step(&mut self, obj: &dyn Objective) -> Result<ScgStep> {
        let p_norm2 = self.p.norm_squared();
        if p_norm2 == 0.0 {
            return Ok(ScgStep {
                accepted: false,
                beta: None,
                value: self.value,
            });
        }
        if self.success {
            let sigma_k = self.params.sigma / p_norm2.sqrt();
            let (_, g_shift) = obj.value_and_gradient(&(&self.w + &self.p * sigma_k))?;
            let s = (g_shift + &self.r) / sigma_k;
            self.delta = self.p.dot(&s);
        }
        let mut delta = self.delta + (self.lambda - self.lambda_bar) * p_norm2;
        if delta <= 0.0 {
            self.lambda_bar = 2.0 * (self.lambda - delta / p_norm2);
            delta = -delta + self.lambda * p_norm2;
            self.lambda = self.lambda_bar;
        }
        self.delta = delta;
        let mu = self.p.dot(&self.r);
        let alpha = mu / delta;
        let w_new = &self.w + &self.p * alpha;
        let value_new = obj.value(&w_new)?;
        let comparison = 2.0 * delta * (self.value - value_new) / (mu * mu);

        let mut beta = None;
        let accepted = comparison >= 0.0 && value_new.is_finite();
        if accepted {
            let (v, g) = obj.value_and_gradient(&w_new)?;
            let r_new = -g;
            self.w = w_new;
            self.value = v;
            self.lambda_bar = 0.0;
            self.success = true;
            self.since_restart += 1;
            let period = if self.params.restart_every == 0 {
                self.w.len()
            } else {
                self.params.restart_every
            };
            let r_old_norm2 = self.r.norm_squared();
            let mut restart = self.since_restart >= period || r_old_norm2 == 0.0;
            if !restart {
                let b1 = r_new.norm_squared() / r_old_norm2;
                let p_new = &r_new + &self.p * b1;
                if p_new.dot(&r_new) > 0.0 {
                    self.p = p_new;
                    beta = Some(b1);
                } else {
                    restart = true;
                }
            }
            if restart {
                self.p = r_new.clone();
                self.since_restart = 0;
            }
            self.r = r_new;
            if comparison >= 0.75 {
                self.lambda *= 0.25;
            }
        } else {
            self.lambda_bar = self.lambda;
            self.success = false;
        }
        let comparison = if comparison.is_finite() { comparison } else { 0.0 };
        if comparison < 0.25 {
            self.lambda += delta * (1.0 - comparison) / p_norm2;
        }
        if !self.lambda.is_finite() {
            return Err(Error::NonFinite("SCG scale"));
        }
        Ok(ScgStep {
            accepted,
            beta,
            value: self.value,
        })
    }
}
