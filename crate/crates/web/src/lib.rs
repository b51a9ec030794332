//! Browser bindings for three interactive views: Laplacian eigenfunctions on
//! a synthetic shape, Sinkhorn normalization of a planted-permutation
//! similarity matrix, and matching a mesh to a noisy point cloud.
//!
//! The plain Rust functions do the work and are tested natively; the
//! `#[wasm_bindgen]` wrappers only convert errors.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

use shapematch::correspondence::{quantize, sinkhorn};
use shapematch::eval::{default_thresholds, geodesic_error, MatchReport};
use shapematch::geometry::{mesh_to_point_cloud, Shape, TriangleMesh};
use shapematch::pipeline::synth::{bumpy_plane, bumpy_sphere, random_permutation};
use shapematch::pipeline::{cmd_match, compute_basis, BasisCache, FeatureOverride, PipelineConfig};
use shapematch::pipeline::{SynthKind, SynthPair, SynthParams};
use shapematch::spectral::{Modality, SpectralBasis, DEFAULT_KNN};
use shapematch::{Error, Result};

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

fn flat_vertices(mesh: &TriangleMesh) -> Vec<f64> {
    mesh.vertices().iter().flat_map(|v| [v.x, v.y, v.z]).collect()
}

fn flat_faces(mesh: &TriangleMesh) -> Vec<u32> {
    mesh.faces().iter().flat_map(|f| f.map(|i| i as u32)).collect()
}

/// Mesh plus its first `k` cotangent-Laplacian eigenfunctions.
#[wasm_bindgen]
pub struct EigenView {
    mesh: TriangleMesh,
    basis: SpectralBasis,
}

impl EigenView {
    /// `shape` is `"sphere"` (resolution = subdivision level) or `"plane"`
    /// (resolution = grid width).
    pub fn build(shape: &str, resolution: u32, k: usize, seed: u32) -> Result<Self> {
        let mesh = match shape {
            "sphere" => bumpy_sphere(resolution.min(4), seed as u64)?,
            "plane" => {
                let nx = resolution.clamp(4, 48) as usize;
                bumpy_plane(nx, nx * 4 / 5, seed as u64)?
            }
            other => return Err(Error::InvalidArgument(format!("unknown shape '{other}'"))),
        };
        let basis = compute_basis(&Shape::Mesh(mesh.clone()), Modality::Mesh, k, DEFAULT_KNN, &BasisCache::default())?;
        Ok(Self { mesh, basis })
    }

    pub fn values(&self, index: usize) -> Result<Vec<f64>> {
        if index >= self.basis.k() {
            return Err(Error::InvalidArgument(format!(
                "eigenfunction {index} out of range (k = {})",
                self.basis.k()
            )));
        }
        Ok(self.basis.phi.column(index).iter().copied().collect())
    }
}

#[wasm_bindgen]
impl EigenView {
    #[wasm_bindgen(constructor)]
    pub fn new(shape: &str, resolution: u32, k: usize, seed: u32) -> Result<EigenView, JsError> {
        Self::build(shape, resolution, k, seed).map_err(js)
    }

    /// Flat `x y z` triples.
    pub fn vertices(&self) -> Vec<f64> {
        flat_vertices(&self.mesh)
    }

    /// Flat vertex-index triples.
    pub fn faces(&self) -> Vec<u32> {
        flat_faces(&self.mesh)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.basis.evals.clone()
    }

    /// Per-vertex values of eigenfunction `index`.
    pub fn eigenfunction(&self, index: usize) -> Result<Vec<f64>, JsError> {
        self.values(index).map_err(js)
    }
}

/// Sinkhorn output for `S_ij = margin · [j = σ(i)] + U(-1, 1)`.
#[wasm_bindgen]
pub struct SinkhornView {
    n: usize,
    pi: DMatrix<f64>,
    planted: Vec<usize>,
    assignment: Vec<usize>,
}

impl SinkhornView {
    pub fn build(n: usize, margin: f64, temperature: f64, iterations: usize, seed: u32) -> Result<Self> {
        if n == 0 || n > 64 {
            return Err(Error::InvalidArgument("size must be between 1 and 64".into()));
        }
        let planted = random_permutation(n, seed as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed as u64 + 1);
        let mut sim = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        for (i, &j) in planted.iter().enumerate() {
            sim[(i, j)] += margin;
        }
        let soft = sinkhorn(&sim, iterations, temperature)?;
        let assignment = quantize(&soft).assignment;
        Ok(Self {
            n,
            pi: soft.pi,
            planted,
            assignment,
        })
    }

    /// Largest deviation of any row or column sum from 1.
    pub fn residual(&self) -> f64 {
        let rows = self.pi.row_iter().map(|r| (r.sum() - 1.0).abs());
        let cols = self.pi.column_iter().map(|c| (c.sum() - 1.0).abs());
        rows.chain(cols).fold(0.0, f64::max)
    }

    pub fn recovered(&self) -> f64 {
        let hits = self.assignment.iter().zip(&self.planted).filter(|(a, p)| a == p).count();
        hits as f64 / self.n as f64
    }
}

#[wasm_bindgen]
impl SinkhornView {
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, margin: f64, temperature: f64, iterations: usize, seed: u32) -> Result<SinkhornView, JsError> {
        Self::build(n, margin, temperature, iterations, seed).map_err(js)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// `Π̂` in row-major order.
    pub fn matrix(&self) -> Vec<f64> {
        self.pi.transpose().as_slice().to_vec()
    }

    #[wasm_bindgen(js_name = maxResidual)]
    pub fn max_residual(&self) -> f64 {
        self.residual()
    }

    /// Fraction of rows whose argmax is the planted partner.
    #[wasm_bindgen(js_name = recoveredFraction)]
    pub fn recovered_fraction(&self) -> f64 {
        self.recovered()
    }
}

/// Mesh X of a bent-plane pair matched to a noisy point cloud of Y.
#[wasm_bindgen]
pub struct MatchView {
    target: TriangleMesh,
    errors: Vec<f64>,
    mean_error: f64,
    pck: Vec<(f64, f64)>,
}

impl MatchView {
    /// `noise` is the noise standard deviation as a fraction of the bounding
    /// box diagonal of Y.
    pub fn build(nx: usize, noise: f64, seed: u32) -> Result<Self> {
        let nx = nx.clamp(6, 40);
        let params = SynthParams {
            nx,
            ny: nx * 4 / 5,
            seed: seed as u64,
            ..SynthParams::default()
        };
        let pair = SynthPair::generate(SynthKind::BentPlanePair, &params)?;
        let sigma = noise * pair.target.bounding_box_diagonal();
        let cloud = mesh_to_point_cloud(&pair.target, sigma, seed as u64)?;
        let config = PipelineConfig::default();
        let out = cmd_match(
            &Shape::Mesh(pair.source.clone()),
            &Shape::Cloud(cloud),
            &config,
            FeatureOverride::default(),
            &BasisCache::default(),
        )?;
        let errors = geodesic_error(&out.pointmap, &pair.ground_truth, &pair.source)?;
        let report = MatchReport::new("demo", &errors, &default_thresholds())?;
        Ok(Self {
            target: pair.target,
            errors: errors.per_vertex.iter().map(|e| e.unwrap_or(f64::NAN)).collect(),
            mean_error: report.mean_error,
            pck: report.pck,
        })
    }

    pub fn per_vertex(&self) -> &[f64] {
        &self.errors
    }
}

#[wasm_bindgen]
impl MatchView {
    #[wasm_bindgen(constructor)]
    pub fn new(nx: usize, noise: f64, seed: u32) -> Result<MatchView, JsError> {
        Self::build(nx, noise, seed).map_err(js)
    }

    pub fn vertices(&self) -> Vec<f64> {
        flat_vertices(&self.target)
    }

    pub fn faces(&self) -> Vec<u32> {
        flat_faces(&self.target)
    }

    /// Normalized geodesic error of every target vertex; NaN where the
    /// prediction lies on another connected component.
    pub fn errors(&self) -> Vec<f64> {
        self.errors.clone()
    }

    #[wasm_bindgen(js_name = meanError)]
    pub fn mean_error(&self) -> f64 {
        self.mean_error
    }

    #[wasm_bindgen(js_name = pckThresholds)]
    pub fn pck_thresholds(&self) -> Vec<f64> {
        self.pck.iter().map(|p| p.0).collect()
    }

    #[wasm_bindgen(js_name = pckFractions)]
    pub fn pck_fractions(&self) -> Vec<f64> {
        self.pck.iter().map(|p| p.1).collect()
    }
}
