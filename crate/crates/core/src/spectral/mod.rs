//! Discrete Laplace operators for meshes and point clouds and their
//! truncated generalized eigenbases `S Φ = M Φ Λ`.

pub mod cache;
mod eigen;
mod laplacian;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;

pub use eigen::{eigenbasis, eigenbasis_with, EigenSolver, DENSE_LIMIT};
pub use laplacian::{cotan_laplacian, pointcloud_laplacian, shape_laplacian, DEFAULT_KNN};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    Mesh,
    PointCloud,
}

impl Modality {
    pub(crate) fn code(self) -> u8 {
        match self {
            Modality::Mesh => 0,
            Modality::PointCloud => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Modality::Mesh),
            1 => Some(Modality::PointCloud),
            _ => None,
        }
    }
}

/// Stiffness and lumped mass of a discrete Laplace operator.
#[derive(Debug, Clone)]
pub struct LaplaceOperator {
    /// Symmetric positive semidefinite, zero row sums.
    pub stiffness: CsrMatrix<f64>,
    /// Diagonal of the mass matrix; all entries positive.
    pub mass: DVector<f64>,
    pub modality: Modality,
}

impl LaplaceOperator {
    pub fn n(&self) -> usize {
        self.mass.len()
    }

    pub fn dense_stiffness(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut d = DMatrix::zeros(n, n);
        for (i, j, v) in self.stiffness.triplet_iter() {
            d[(i, j)] += *v;
        }
        d
    }

    pub fn apply_stiffness(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.stiffness * x
    }
}

/// Truncated eigenbasis: `k` mass-orthonormal eigenfunctions with ascending
/// eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    /// n x k, columns are eigenfunctions.
    pub phi: DMatrix<f64>,
    pub evals: Vec<f64>,
    pub mass: DVector<f64>,
}

impl SpectralBasis {
    pub fn k(&self) -> usize {
        self.evals.len()
    }

    pub fn n(&self) -> usize {
        self.phi.nrows()
    }

    /// Spectral coefficients `Φᵀ M F` of per-vertex functions (n x c).
    pub fn project(&self, f: &DMatrix<f64>) -> DMatrix<f64> {
        let mut weighted = f.clone();
        for (mut row, m) in weighted.row_iter_mut().zip(self.mass.iter()) {
            row *= *m;
        }
        self.phi.transpose() * weighted
    }

    /// First `k` eigenpairs.
    pub fn truncated(&self, k: usize) -> SpectralBasis {
        let k = k.min(self.k());
        SpectralBasis {
            phi: self.phi.columns(0, k).into_owned(),
            evals: self.evals[..k].to_vec(),
            mass: self.mass.clone(),
        }
    }

    /// Largest absolute entry of `ΦᵀMΦ - I`.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.project(&self.phi);
        let k = self.k();
        (gram - DMatrix::<f64>::identity(k, k)).amax()
    }

    /// Largest per-column residual `‖Sφ - λMφ‖ / (‖S‖_∞ ‖φ‖)`.
    pub fn eigen_residual(&self, op: &LaplaceOperator) -> f64 {
        let s_norm = row_abs_sum_max(&op.stiffness).max(f64::MIN_POSITIVE);
        (0..self.k())
            .map(|j| {
                let phi = self.phi.column(j).into_owned();
                let s_phi = &op.stiffness * &phi;
                let m_phi = phi.component_mul(&op.mass);
                (s_phi - m_phi * self.evals[j]).norm() / (s_norm * phi.norm())
            })
            .fold(0.0, f64::max)
    }
}

pub(crate) fn row_abs_sum_max(m: &CsrMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.values().iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
