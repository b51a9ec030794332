//! Self-supervised objective coupling the functional-map and similarity
//! routes, with analytic gradients for the matrix terms.
//!
//! ```text
//! E_total = λ_bij E_bij + λ_orth E_orth + λ_align E_align + λ_nce E_nce
//! E_bij   = ‖C_xy C_yx - I‖²
//! E_orth  = ‖C_xy C_xyᵀ - I‖²
//! E_align = ‖Φ_x C_yx - Π̂_xy Φ_y‖²
//! E_nce   = -Σ_i log softmax_j(⟨F_i, F̂_j⟩ / τ)_i
//! ```
//!
//! For partial matching (`X` complete, `Y` partial) the identities become
//! `I_r`, with ones only on the first `r` diagonal entries.

mod fd;
pub mod refine;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::correspondence::log_sum_exp;

pub use fd::fd_gradient;
pub use refine::{refine_features, RefineOptions, RefineOutcome, RefineProblem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossWeights {
    pub lambda_bij: f64,
    pub lambda_orth: f64,
    pub lambda_align: f64,
    pub lambda_nce: f64,
    pub tau: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_bij: 1.0,
            lambda_orth: 1.0,
            lambda_align: 1e-3,
            lambda_nce: 10.0,
            tau: 0.07,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda_bij, self.lambda_orth, self.lambda_align, self.lambda_nce];
        if all.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("loss weights must be finite and >= 0".into()));
        }
        if !(self.tau > 0.0) {
            return Err(Error::InvalidArgument(format!("tau must be > 0, got {}", self.tau)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MatchMode {
    Complete,
    /// `X` complete, `Y` partial; `r` ones on the slanted diagonal.
    Partial { r: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossReport {
    pub e_bij: f64,
    pub e_orth: f64,
    pub e_align: f64,
    pub e_nce: f64,
    pub e_total: f64,
    pub weights: LossWeights,
    pub partial: bool,
    pub r: Option<usize>,
}

impl LossReport {
    pub fn compose(e_bij: f64, e_orth: f64, e_align: f64, e_nce: f64, weights: LossWeights, mode: MatchMode) -> Self {
        let e_total = e_bij * weights.lambda_bij
            + e_orth * weights.lambda_orth
            + weights.lambda_align * e_align
            + weights.lambda_nce * e_nce;
        let r = match mode {
            MatchMode::Complete => None,
            MatchMode::Partial { r } => Some(r),
        };
        Self {
            e_bij,
            e_orth,
            e_align,
            e_nce,
            e_total,
            weights,
            partial: r.is_some(),
            r,
        }
    }

    /// `step e_bij e_orth e_align e_nce e_total`
    pub fn trace_line(&self, step: usize) -> String {
        format!(
            "{step} {} {} {} {} {}",
            self.e_bij, self.e_orth, self.e_align, self.e_nce, self.e_total
        )
    }
}

/// `k x k` diagonal with ones in the first `min(r, k)` entries.
pub fn identity_r(k: usize, r: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k, k, |i, j| if i == j && i < r { 1.0 } else { 0.0 })
}

fn check_product(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.ncols() != b.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "{what}: cannot multiply {:?} by {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

pub fn e_bij(c_xy: &DMatrix<f64>, c_yx: &DMatrix<f64>) -> Result<f64> {
    e_bij_partial(c_xy, c_yx, c_xy.nrows())
}

pub fn e_bij_partial(c_xy: &DMatrix<f64>, c_yx: &DMatrix<f64>, r: usize) -> Result<f64> {
    check_product(c_xy, c_yx, "bijectivity")?;
    Ok((c_xy * c_yx - identity_r(c_xy.nrows(), r)).norm_squared())
}

/// Gradients of `E_bij` with respect to `C_xy` and `C_yx`.
pub fn e_bij_gradient(c_xy: &DMatrix<f64>, c_yx: &DMatrix<f64>, r: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let resid = c_xy * c_yx - identity_r(c_xy.nrows(), r);
    (&resid * c_yx.transpose() * 2.0, c_xy.transpose() * &resid * 2.0)
}

pub fn e_orth(c: &DMatrix<f64>) -> f64 {
    e_orth_partial(c, c.nrows())
}

pub fn e_orth_partial(c: &DMatrix<f64>, r: usize) -> f64 {
    (c * c.transpose() - identity_r(c.nrows(), r)).norm_squared()
}

/// `4 (C Cᵀ - I_r) C`
pub fn e_orth_gradient(c: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    (c * c.transpose() - identity_r(c.nrows(), r)) * c * 4.0
}

fn align_residual(
    pi_xy: &DMatrix<f64>,
    c_yx: &DMatrix<f64>,
    phi_x: &DMatrix<f64>,
    phi_y: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_product(phi_x, c_yx, "alignment Φ_x C_yx")?;
    check_product(pi_xy, phi_y, "alignment Π̂ Φ_y")?;
    if phi_x.nrows() != pi_xy.nrows() || c_yx.ncols() != phi_y.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "alignment terms disagree: Φ_x C_yx is {}x{}, Π̂ Φ_y is {}x{}",
            phi_x.nrows(),
            c_yx.ncols(),
            pi_xy.nrows(),
            phi_y.ncols()
        )));
    }
    Ok(phi_x * c_yx - pi_xy * phi_y)
}

pub fn e_align(
    pi_xy: &DMatrix<f64>,
    c_yx: &DMatrix<f64>,
    phi_x: &DMatrix<f64>,
    phi_y: &DMatrix<f64>,
) -> Result<f64> {
    Ok(align_residual(pi_xy, c_yx, phi_x, phi_y)?.norm_squared())
}

/// Gradients of `E_align` with respect to `C_yx` and `Π̂_xy`.
pub fn e_align_gradient(
    pi_xy: &DMatrix<f64>,
    c_yx: &DMatrix<f64>,
    phi_x: &DMatrix<f64>,
    phi_y: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let resid = align_residual(pi_xy, c_yx, phi_x, phi_y)?;
    Ok((
        phi_x.transpose() * &resid * 2.0,
        &resid * phi_y.transpose() * -2.0,
    ))
}

fn nce_logits(f: &DMatrix<f64>, f_hat: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    if f.shape() != f_hat.shape() {
        return Err(Error::ShapeMismatch(format!(
            "contrastive pair shapes differ: {:?} vs {:?}",
            f.shape(),
            f_hat.shape()
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be > 0, got {tau}")));
    }
    let logits = f * f_hat.transpose() / tau;
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("contrastive logits".into()));
    }
    Ok(logits)
}

/// Point contrastive loss between row-aligned features `f` and `f_hat`.
pub fn e_nce(f: &DMatrix<f64>, f_hat: &DMatrix<f64>, tau: f64) -> Result<f64> {
    let logits = nce_logits(f, f_hat, tau)?;
    Ok(logits
        .row_iter()
        .enumerate()
        .map(|(i, row)| log_sum_exp(&row) - row[i])
        .sum())
}

/// Gradients of `E_nce` with respect to `f` and `f_hat`.
pub fn e_nce_gradient(f: &DMatrix<f64>, f_hat: &DMatrix<f64>, tau: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let logits = nce_logits(f, f_hat, tau)?;
    let mut p = logits;
    for (i, mut row) in p.row_iter_mut().enumerate() {
        let lse = log_sum_exp(&row);
        row.apply(|v| *v = (*v - lse).exp());
        row[i] -= 1.0;
    }
    // p now holds softmax - identity
    Ok((&p * f_hat / tau, p.transpose() * f / tau))
}

/// Everything the total objective reads.
#[derive(Debug, Clone, Copy)]
pub struct LossInputs<'a> {
    pub c_xy: &'a DMatrix<f64>,
    pub c_yx: &'a DMatrix<f64>,
    pub pi_xy: &'a DMatrix<f64>,
    pub phi_x: &'a DMatrix<f64>,
    pub phi_y: &'a DMatrix<f64>,
    /// Mesh features of `X` and of its point cloud, row-aligned.
    pub mesh_x: &'a DMatrix<f64>,
    pub cloud_x: &'a DMatrix<f64>,
    /// Mesh features of `Y` and of its point cloud, row-aligned.
    pub mesh_y: &'a DMatrix<f64>,
    pub cloud_y: &'a DMatrix<f64>,
}

/// Weighted total. In partial mode the identities become `I_r` and the
/// contrastive term covers only the complete shape `X`.
pub fn e_total(inputs: &LossInputs<'_>, weights: &LossWeights, mode: MatchMode) -> Result<LossReport> {
    weights.validate()?;
    let k = inputs.c_xy.nrows();
    let r = match mode {
        MatchMode::Complete => k,
        MatchMode::Partial { r } => r,
    };
    let bij = e_bij_partial(inputs.c_xy, inputs.c_yx, r)?;
    let orth = e_orth_partial(inputs.c_xy, r);
    let align = e_align(inputs.pi_xy, inputs.c_yx, inputs.phi_x, inputs.phi_y)?;
    let mut nce = e_nce(inputs.mesh_x, inputs.cloud_x, weights.tau)?;
    if mode == MatchMode::Complete {
        nce += e_nce(inputs.mesh_y, inputs.cloud_y, weights.tau)?;
    }
    Ok(LossReport::compose(bij, orth, align, nce, *weights, mode))
}

/// `clamp(round(k · area_partial / area_complete), 1, k)`
pub fn estimate_r(area_partial: f64, area_complete: f64, k: usize) -> Result<usize> {
    if !(area_partial > 0.0) || !(area_complete > 0.0) || k == 0 {
        return Err(Error::InvalidArgument(format!(
            "estimate_r needs positive areas and k >= 1, got {area_partial}, {area_complete}, {k}"
        )));
    }
    let r = (k as f64 * area_partial / area_complete).round();
    Ok((r as usize).clamp(1, k))
}
