//! Closed-form multiply counts per training iteration.

use crate::error::{Error, Result};
use crate::trainers::Algorithm;

/// Problem dimensions: inputs `N`, outputs `M`, hidden units `N_h`, patterns `N_v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub n_hidden: usize,
    pub n_patterns: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultiplyModel {
    pub n_u: u64,
    pub n_w: u64,
    pub ols: u64,
    pub bp: u64,
    pub owo_bp: u64,
    pub oig: u64,
    /// `M_oig` plus the per-iteration `G · Cᵀ · C` product.
    pub oig_hwo: u64,
    pub lm: u64,
    pub scg: u64,
}

impl MultiplyModel {
    pub fn per_iteration(&self, algorithm: Algorithm) -> u64 {
        match algorithm {
            Algorithm::OwoBp => self.owo_bp,
            Algorithm::OigBp => self.oig,
            Algorithm::OigHwo => self.oig_hwo,
            Algorithm::Scg => self.scg,
            Algorithm::Lm => self.lm,
        }
    }
}

fn to_u64(v: i128, name: &str) -> Result<u64> {
    u64::try_from(v).map_err(|_| Error::invalid(format!("{name} = {v} does not fit a positive 64-bit count")))
}

pub fn multiply_counts(dims: Dims) -> Result<MultiplyModel> {
    let Dims {
        n_inputs,
        n_outputs,
        n_hidden,
        n_patterns,
    } = dims;
    if n_inputs == 0 || n_outputs == 0 || n_hidden == 0 || n_patterns == 0 {
        return Err(Error::invalid(format!("multiply counts need positive dims, got {dims:?}")));
    }
    let (n, m, nh, nv) = (n_inputs as i128, n_outputs as i128, n_hidden as i128, n_patterns as i128);
    let nu = n + nh + 1;
    let nw = m * nu + nh * (n + 1);

    // N_u(N_u+1)[M + N_u(2N_u+1)/6 + 3/2], rounded to nearest
    let ols_num = nu * (nu + 1) * (6 * m + nu * (2 * nu + 1) + 9);
    let ols = (ols_num + 3) / 6;

    let bp = nv * (m * nu + 2 * nh * (n + 1) + m * (n + 6 * nh + 4)) + nw;
    let owo_bp = nv * (2 * nh * (n + 2) + m * (nu + 1) + m * (n + 6 * nh + 4) + nu * (nu + 1) / 2) + ols + nh * (n + 1);
    let oig = owo_bp
        + nv * ((n + 1) * (3 * m * nh + m * n + 2 * (m + n) + 3) - m * (n + 6 * nh + 4) - nh * (n + 1))
        + (n + 1).pow(3);
    let oig_hwo = oig + nh * (n + 1) * (n + 2);
    let lm = bp + nv * (m * nu * (nu + 3 * nh * (n + 1)) + 4 * nh * nh * (n + 1) * (n + 1)) + nw.pow(3) + nw * nw;
    let scg = 4 * nv * (nh * (n + 1) + m * nu) + 10 * (nh * (n + 1) + m * nu);

    Ok(MultiplyModel {
        n_u: to_u64(nu, "N_u")?,
        n_w: to_u64(nw, "N_w")?,
        ols: to_u64(ols, "M_ols")?,
        bp: to_u64(bp, "M_bp")?,
        owo_bp: to_u64(owo_bp, "M_owo_bp")?,
        oig: to_u64(oig, "M_oig")?,
        oig_hwo: to_u64(oig_hwo, "M_oig_hwo")?,
        lm: to_u64(lm, "M_lm")?,
        scg: to_u64(scg, "M_scg")?,
    })
}
