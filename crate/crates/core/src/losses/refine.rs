//! Desk-scale descriptor refinement: gradient descent on `E_total` over a
//! shared linear transform `W` (c x c') applied to all four feature sets.
//! Gradients are finite differences through the full pipeline
//! (functional-map solve, soft correspondence, losses).

use nalgebra::DMatrix;

use super::{e_total, fd_gradient, LossInputs, LossReport, LossWeights, MatchMode};
use crate::correspondence::{column_softmax, sinkhorn};
use crate::descriptors::{FeatureKind, FeatureMatrix};
use crate::error::{Error, Result};
use crate::fmap::{resolvent_mask, FmapProblem};
use crate::spectral::SpectralBasis;

/// Largest number of transform entries handled by finite differences.
pub const MAX_TRANSFORM_ENTRIES: usize = 512;

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 30;

/// Shapes, bases, initial features and solver settings of one training pair.
#[derive(Debug, Clone, Copy)]
pub struct RefineProblem<'a> {
    pub basis_x: &'a SpectralBasis,
    pub basis_y: &'a SpectralBasis,
    pub mesh_x: &'a FeatureMatrix,
    pub mesh_y: &'a FeatureMatrix,
    pub cloud_x: &'a FeatureMatrix,
    pub cloud_y: &'a FeatureMatrix,
    pub lambda_reg: f64,
    pub gamma: f64,
    pub sinkhorn_iterations: usize,
    pub temperature: f64,
    pub weights: LossWeights,
    pub mode: MatchMode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOptions {
    pub steps: usize,
    /// Length of the first trial step in parameter space.
    pub step_size: f64,
    /// Output feature dimension c'.
    pub out_dim: usize,
    pub fd_eps: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            steps: 30,
            step_size: 0.1,
            out_dim: 8,
            fd_eps: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub transform: DMatrix<f64>,
    /// Entry 0 is the initial loss, then one entry per accepted step.
    pub trace: Vec<LossReport>,
    /// Set when no descent step was found before `steps` ran out.
    pub stalled_at: Option<usize>,
    /// Set when a non-finite loss stopped the search.
    pub aborted: Option<String>,
}

impl RefineOutcome {
    pub fn apply(&self, features: &FeatureMatrix) -> FeatureMatrix {
        FeatureMatrix {
            values: &features.values * &self.transform,
            kind: FeatureKind::External,
        }
    }

    pub fn final_loss(&self) -> &LossReport {
        self.trace.last().expect("trace always holds the initial loss")
    }
}

impl RefineProblem<'_> {
    fn validate(&self) -> Result<()> {
        let c = self.mesh_x.dim();
        if [self.mesh_y, self.cloud_x, self.cloud_y].iter().any(|f| f.dim() != c) {
            return Err(Error::ShapeMismatch("all four feature sets need the same dimension".into()));
        }
        if self.mesh_x.n() != self.basis_x.n() || self.cloud_x.n() != self.basis_x.n() {
            return Err(Error::ShapeMismatch("features of X do not match its basis".into()));
        }
        if self.mesh_y.n() != self.basis_y.n() || self.cloud_y.n() != self.basis_y.n() {
            return Err(Error::ShapeMismatch("features of Y do not match its basis".into()));
        }
        self.weights.validate()
    }

    /// Total loss of the pipeline with every feature set multiplied by `w`
    /// and its rows normalized, so only feature directions matter.
    pub fn evaluate(&self, w: &DMatrix<f64>) -> Result<LossReport> {
        let fx = unit_rows(&(&self.mesh_x.values * w));
        let fy = unit_rows(&(&self.mesh_y.values * w));
        let gx = unit_rows(&(&self.cloud_x.values * w));
        let gy = unit_rows(&(&self.cloud_y.values * w));

        let a = self.basis_x.project(&fx);
        let b = self.basis_y.project(&fy);
        let (ex, ey) = (&self.basis_x.evals, &self.basis_y.evals);
        let fwd = FmapProblem::new(a.clone(), b.clone(), ex.clone(), ey.clone(), self.lambda_reg)?;
        let bwd = FmapProblem::new(b, a, ey.clone(), ex.clone(), self.lambda_reg)?;
        let c_xy = crate::fmap::solve_fmap(&fwd, &resolvent_mask(ex, ey, self.gamma)?)?.c;
        let c_yx = crate::fmap::solve_fmap(&bwd, &resolvent_mask(ey, ex, self.gamma)?)?.c;

        let sim = &gx * gy.transpose();
        let soft = match self.mode {
            MatchMode::Complete => sinkhorn(&sim, self.sinkhorn_iterations, self.temperature)?,
            MatchMode::Partial { .. } => column_softmax(&sim, self.temperature)?,
        };
        e_total(
            &LossInputs {
                c_xy: &c_xy,
                c_yx: &c_yx,
                pi_xy: &soft.pi,
                phi_x: &self.basis_x.phi,
                phi_y: &self.basis_y.phi,
                mesh_x: &fx,
                cloud_x: &gx,
                mesh_y: &fy,
                cloud_y: &gy,
            },
            &self.weights,
            self.mode,
        )
    }
}

/// Rows scaled to unit length; zero rows are left as they are.
pub fn unit_rows(features: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = features.clone();
    for mut row in out.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    out
}

fn initial_transform(c: usize, out_dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(c, out_dim, |i, j| if i == j { 1.0 } else { 0.0 })
}

/// Backtracking (Armijo) gradient descent on the transform, starting from
/// the identity (or its first `out_dim` columns). Accepted steps never
/// increase `E_total`.
pub fn refine_features(problem: &RefineProblem<'_>, options: &RefineOptions) -> Result<RefineOutcome> {
    problem.validate()?;
    let c = problem.mesh_x.dim();
    if options.out_dim == 0 || c * options.out_dim > MAX_TRANSFORM_ENTRIES {
        return Err(Error::InvalidArgument(format!(
            "transform {c}x{} must have between 1 and {MAX_TRANSFORM_ENTRIES} entries",
            options.out_dim
        )));
    }
    if !(options.step_size > 0.0) || !(options.fd_eps > 0.0) {
        return Err(Error::InvalidArgument("step size and fd eps must be > 0".into()));
    }

    let mut w = initial_transform(c, options.out_dim);
    let first = problem.evaluate(&w)?;
    if !first.e_total.is_finite() {
        return Err(Error::NonFinite("initial loss".into()));
    }
    let mut outcome = RefineOutcome {
        transform: w.clone(),
        trace: vec![first],
        stalled_at: None,
        aborted: None,
    };

    let loss_of = |params: &[f64]| -> f64 {
        let m = DMatrix::from_column_slice(c, options.out_dim, params);
        problem.evaluate(&m).map_or(f64::NAN, |r| r.e_total)
    };

    for step in 1..=options.steps {
        let current = outcome.final_loss().e_total;
        let grad = fd_gradient(loss_of, w.as_slice(), options.fd_eps);
        if grad.iter().any(|g| !g.is_finite()) {
            outcome.aborted = Some(format!("non-finite gradient at step {step}"));
            break;
        }
        let grad = DMatrix::from_column_slice(c, options.out_dim, &grad);
        let gnorm2 = grad.norm_squared();
        if gnorm2 == 0.0 {
            outcome.stalled_at = Some(step);
            break;
        }
        let mut alpha = options.step_size / gnorm2.sqrt();
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial = &w - &grad * alpha;
            let loss = match problem.evaluate(&trial) {
                Ok(rep) => Ok(rep),
                Err(Error::NonFinite(what)) => Err(what),
                Err(Error::Singular(_)) => {
                    alpha *= 0.5;
                    continue;
                }
                Err(e) => return Err(e),
            };
            match loss {
                Ok(rep) if !rep.e_total.is_finite() => {
                    outcome.aborted = Some(format!("non-finite loss at step {step}"));
                    break;
                }
                Err(what) => {
                    outcome.aborted = Some(format!("non-finite {what} at step {step}"));
                    break;
                }
                Ok(rep) if rep.e_total <= current - ARMIJO_C * alpha * gnorm2 => {
                    accepted = Some((trial, rep));
                    break;
                }
                Ok(_) => alpha *= 0.5,
            }
        }
        if outcome.aborted.is_some() {
            break;
        }
        match accepted {
            Some((trial, rep)) => {
                w = trial;
                outcome.trace.push(rep);
            }
            None => {
                outcome.stalled_at = Some(step);
                break;
            }
        }
    }
    outcome.transform = w;
    Ok(outcome)
}
