//! End-to-end commands: matching, evaluation, loss reports, refinement,
//! synthetic pairs and descriptor dumps. The CLI is a thin layer over these.

pub mod config;
pub mod synth;

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::correspondence::{column_softmax, quantize, similarity, sinkhorn, SoftCorrespondence};
use crate::descriptors::{hks, wks, xyz_features, FeatureKind, FeatureMatrix};
use crate::error::{Error, Result, ResultExt};
use crate::eval::{default_thresholds, geodesic_error, MatchReport};
use crate::fmap::{fmap_to_pointmap, pointmap_to_fmap, resolvent_mask, solve_fmap, FmapProblem, FunctionalMap, PointMap};
use crate::geometry::{mesh_to_point_cloud, surface_area, Shape, TriangleMesh};
use crate::losses::refine::unit_rows;
use crate::losses::{estimate_r, refine_features, LossReport, MatchMode, RefineOutcome, RefineProblem};
use crate::spectral::{cache, cotan_laplacian, eigenbasis, pointcloud_laplacian, Modality, SpectralBasis};

pub use config::PipelineConfig;
pub use synth::{SynthKind, SynthPair, SynthParams};

/// Where computed bases are cached between runs; `None` disables caching.
#[derive(Debug, Clone, Default)]
pub struct BasisCache(pub Option<PathBuf>);

impl BasisCache {
    fn path(&self, hash: u64, modality: Modality, k: usize) -> Option<PathBuf> {
        let tag = match modality {
            Modality::Mesh => "mesh",
            Modality::PointCloud => "cloud",
        };
        self.0.as_ref().map(|dir| dir.join(format!("{hash:016x}_{tag}_k{k}.basis")))
    }
}

/// Laplacian eigenbasis of `shape` under `modality`. A mesh can be treated
/// as a point cloud (connectivity dropped); a cloud can only be a cloud.
/// `k` is clamped to `n - 1`.
pub fn compute_basis(
    shape: &Shape,
    modality: Modality,
    k: usize,
    knn: usize,
    cache: &BasisCache,
) -> Result<SpectralBasis> {
    let k = k.min(shape.len().saturating_sub(1)).max(1);
    let hash = cache::shape_hash(shape);
    let cached = cache.path(hash, modality, k);
    if let Some(path) = &cached {
        if path.exists() {
            if let Some(basis) = cache::load_matching(path, modality, hash, k)? {
                return Ok(basis);
            }
        }
    }
    let op = match modality {
        Modality::Mesh => {
            let mesh = shape.as_mesh().ok_or_else(|| {
                Error::InvalidArgument(format!("'{}' is a point cloud, not a mesh", shape.shape_id()))
            })?;
            cotan_laplacian(mesh)?
        }
        Modality::PointCloud => pointcloud_laplacian(&shape.to_cloud(), knn)?,
    };
    let basis = eigenbasis(&op, k)?;
    if let Some(path) = &cached {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        cache::save(path, &basis, modality, hash)?;
    }
    Ok(basis)
}

/// Descriptors of the configured kind. External features cannot be computed
/// and must be supplied by the caller.
pub fn extract_features(shape: &Shape, basis: &SpectralBasis, config: &PipelineConfig) -> Result<FeatureMatrix> {
    match config.descriptor {
        FeatureKind::Hks => hks(basis, config.hks_times),
        FeatureKind::Wks => wks(basis, config.wks_energies),
        FeatureKind::Xyz => Ok(xyz_features(shape)),
        FeatureKind::External => Err(Error::InvalidArgument(
            "descriptor = external needs feature files for both shapes".into(),
        )),
    }
}

/// Features as fed to the similarity route: columns z-scored, rows scaled
/// to length `scale`. Every point is then most similar to itself, and
/// `scale² / temperature` sets how sharply similarities separate.
pub fn similarity_features(features: &FeatureMatrix, scale: f64) -> FeatureMatrix {
    let mut values = features.standardized().values;
    for mut row in values.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row *= scale / norm;
        }
    }
    FeatureMatrix {
        values,
        kind: features.kind,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Mesh to mesh: regularized functional map, then nearest neighbours.
    FunctionalMap,
    /// Any pair involving a point cloud: feature similarity and Sinkhorn
    /// (complete) or column softmax (partial).
    Similarity,
}

impl Route {
    pub fn for_pair(source: &Shape, target: &Shape) -> Self {
        match (source, target) {
            (Shape::Mesh(_), Shape::Mesh(_)) => Route::FunctionalMap,
            _ => Route::Similarity,
        }
    }
}

/// Optional precomputed features for source and target.
#[derive(Debug, Clone, Copy, Default)]
pub struct FeatureOverride<'a> {
    pub source: Option<&'a FeatureMatrix>,
    pub target: Option<&'a FeatureMatrix>,
}

fn pick_features(
    given: Option<&FeatureMatrix>,
    shape: &Shape,
    basis: &SpectralBasis,
    config: &PipelineConfig,
) -> Result<FeatureMatrix> {
    match given {
        Some(f) if f.n() != shape.len() => Err(Error::ShapeMismatch(format!(
            "feature file has {} rows, '{}' has {} vertices",
            f.n(),
            shape.shape_id(),
            shape.len()
        ))),
        Some(f) => Ok(f.clone()),
        None => extract_features(shape, basis, config),
    }
}

#[derive(Debug, Clone)]
pub struct MatchOutput {
    pub route: Route,
    /// For every target vertex, its source vertex.
    pub pointmap: PointMap,
    pub fmap: FunctionalMap,
    pub soft: Option<SoftCorrespondence>,
}

/// Matches `source` (X) to `target` (Y). For partial pairs `target` is the
/// partial shape.
pub fn cmd_match(
    source: &Shape,
    target: &Shape,
    config: &PipelineConfig,
    features: FeatureOverride<'_>,
    cache: &BasisCache,
) -> Result<MatchOutput> {
    config.validate()?;
    let pair = format!("pair {} -> {}", source.shape_id(), target.shape_id());
    let k = config.effective_k();
    let route = Route::for_pair(source, target);
    let out = (|| match route {
        Route::FunctionalMap => {
            let bx = compute_basis(source, Modality::Mesh, k, config.knn, cache)?;
            let by = compute_basis(target, Modality::Mesh, k, config.knn, cache)?;
            let fx = pick_features(features.source, source, &bx, config)?;
            let fy = pick_features(features.target, target, &by, config)?;
            let problem = FmapProblem::from_features(&bx, &by, &fx, &fy, config.lambda_reg)?;
            let mask = resolvent_mask(&bx.evals, &by.evals, config.gamma)?;
            let fmap = solve_fmap(&problem, &mask)?.with_ids(source.shape_id(), target.shape_id());
            let pointmap = fmap_to_pointmap(&fmap, &bx, &by)?;
            Ok(MatchOutput {
                route,
                pointmap,
                fmap,
                soft: None,
            })
        }
        Route::Similarity => {
            let bx = compute_basis(source, Modality::PointCloud, k, config.knn, cache)?;
            let by = compute_basis(target, Modality::PointCloud, k, config.knn, cache)?;
            let fx = similarity_features(&pick_features(features.source, source, &bx, config)?, config.feature_scale);
            let fy = similarity_features(&pick_features(features.target, target, &by, config)?, config.feature_scale);
            let (soft, pointmap) = if config.partial {
                let soft = column_softmax(&similarity(&fx, &fy)?, config.temperature)?;
                let pm = quantize(&soft);
                (soft, pm)
            } else {
                let soft = sinkhorn(&similarity(&fy, &fx)?, config.sinkhorn_iterations, config.temperature)?;
                let pm = quantize(&soft);
                (soft, pm)
            };
            let fmap = pointmap_to_fmap(&pointmap, &bx, &by)?.with_ids(source.shape_id(), target.shape_id());
            Ok(MatchOutput {
                route,
                pointmap,
                fmap,
                soft: Some(soft),
            })
        }
    })();
    out.context(|| pair)
}

/// Scores `pred` against `gt`; both map target vertices into `mesh`.
pub fn cmd_eval(pair_id: &str, pred: &PointMap, gt: &PointMap, mesh: &TriangleMesh, thresholds: Option<&[f64]>) -> Result<MatchReport> {
    let defaults = default_thresholds();
    let errors = geodesic_error(pred, gt, mesh).context(|| format!("pair {pair_id}"))?;
    MatchReport::new(pair_id, &errors, thresholds.unwrap_or(&defaults))
}

/// Everything the objective needs for one mesh pair: mesh bases, mesh
/// descriptors, and descriptors of each mesh's sampled point cloud. All four
/// feature sets are z-scored per column.
#[derive(Debug, Clone)]
pub struct TrainingPair {
    pub basis_x: SpectralBasis,
    pub basis_y: SpectralBasis,
    pub mesh_x: FeatureMatrix,
    pub mesh_y: FeatureMatrix,
    pub cloud_x: FeatureMatrix,
    pub cloud_y: FeatureMatrix,
    pub mode: MatchMode,
}

impl TrainingPair {
    /// Clouds are sampled with `noise_sigma` (seeds `seed` and `seed + 1`).
    /// Supplied features replace the computed ones for both modalities.
    pub fn build(
        mesh_x: &TriangleMesh,
        mesh_y: &TriangleMesh,
        config: &PipelineConfig,
        features: FeatureOverride<'_>,
        cache: &BasisCache,
    ) -> Result<Self> {
        config.validate()?;
        let k = config.effective_k();
        let (sx, sy) = (Shape::Mesh(mesh_x.clone()), Shape::Mesh(mesh_y.clone()));
        let basis_x = compute_basis(&sx, Modality::Mesh, k, config.knn, cache)?;
        let basis_y = compute_basis(&sy, Modality::Mesh, k, config.knn, cache)?;
        let mesh_fx = pick_features(features.source, &sx, &basis_x, config)?;
        let mesh_fy = pick_features(features.target, &sy, &basis_y, config)?;

        let cloud = |mesh: &TriangleMesh, seed: u64, given: Option<&FeatureMatrix>| -> Result<FeatureMatrix> {
            if let Some(f) = given {
                return Ok(f.clone());
            }
            let cloud = Shape::Cloud(mesh_to_point_cloud(mesh, config.noise_sigma, seed)?);
            let basis = compute_basis(&cloud, Modality::PointCloud, k, config.knn, cache)?;
            extract_features(&cloud, &basis, config)
        };
        let cloud_x = cloud(mesh_x, config.seed, features.source)?;
        let cloud_y = cloud(mesh_y, config.seed.wrapping_add(1), features.target)?;

        let mode = if config.partial {
            let k_used = basis_x.k().min(basis_y.k());
            let r = match config.r {
                Some(r) => r.min(k_used),
                None => estimate_r(surface_area(mesh_y), surface_area(mesh_x), k_used)?,
            };
            MatchMode::Partial { r }
        } else {
            MatchMode::Complete
        };
        Ok(Self {
            basis_x,
            basis_y,
            mesh_x: mesh_fx.standardized(),
            mesh_y: mesh_fy.standardized(),
            cloud_x: cloud_x.standardized(),
            cloud_y: cloud_y.standardized(),
            mode,
        })
    }

    pub fn problem<'a>(&'a self, config: &PipelineConfig) -> RefineProblem<'a> {
        RefineProblem {
            basis_x: &self.basis_x,
            basis_y: &self.basis_y,
            mesh_x: &self.mesh_x,
            mesh_y: &self.mesh_y,
            cloud_x: &self.cloud_x,
            cloud_y: &self.cloud_y,
            lambda_reg: config.lambda_reg,
            gamma: config.gamma,
            sinkhorn_iterations: config.sinkhorn_iterations,
            temperature: config.temperature,
            weights: config.weights,
            mode: self.mode,
        }
    }

    fn features(&self, transform: Option<&DMatrix<f64>>) -> [FeatureMatrix; 4] {
        let apply = |f: &FeatureMatrix| match transform {
            Some(w) => FeatureMatrix {
                values: &f.values * w,
                kind: FeatureKind::External,
            },
            None => f.clone(),
        };
        [
            apply(&self.mesh_x),
            apply(&self.mesh_y),
            apply(&self.cloud_x),
            apply(&self.cloud_y),
        ]
    }

    /// Functional-map matching of mesh X to mesh Y from the (possibly
    /// transformed) descriptors with unit rows, as the refinement loss sees
    /// them; one source index per target vertex.
    pub fn fmap_match(&self, transform: Option<&DMatrix<f64>>, config: &PipelineConfig) -> Result<PointMap> {
        let [fx, fy, _, _] = self.features(transform).map(|f| FeatureMatrix {
            values: unit_rows(&f.values),
            kind: f.kind,
        });
        let problem = FmapProblem::from_features(&self.basis_x, &self.basis_y, &fx, &fy, config.lambda_reg)?;
        let mask = resolvent_mask(&self.basis_x.evals, &self.basis_y.evals, config.gamma)?;
        fmap_to_pointmap(&solve_fmap(&problem, &mask)?, &self.basis_x, &self.basis_y)
    }

    /// Similarity matching of mesh X to the point cloud of Y, as `cmd_match`
    /// does for a mesh/cloud pair.
    pub fn similarity_match(&self, transform: Option<&DMatrix<f64>>, config: &PipelineConfig) -> Result<PointMap> {
        let [fx, _, _, gy] = self.features(transform);
        let fx = similarity_features(&fx, config.feature_scale);
        let gy = similarity_features(&gy, config.feature_scale);
        let soft = match self.mode {
            MatchMode::Complete => sinkhorn(&similarity(&gy, &fx)?, config.sinkhorn_iterations, config.temperature)?,
            MatchMode::Partial { .. } => column_softmax(&similarity(&fx, &gy)?, config.temperature)?,
        };
        Ok(quantize(&soft))
    }
}

/// Loss report of the untransformed descriptors.
pub fn cmd_losses(pair: &TrainingPair, config: &PipelineConfig) -> Result<LossReport> {
    let c = pair.mesh_x.dim();
    pair.problem(config).evaluate(&DMatrix::identity(c, c))
}

/// Mean geodesic errors of one matching route before and after refinement.
#[derive(Debug, Clone)]
pub struct RouteComparison {
    pub before: MatchReport,
    pub after: MatchReport,
}

#[derive(Debug, Clone)]
pub struct RefineResult {
    pub outcome: RefineOutcome,
    /// Refined mesh_x, mesh_y, cloud_x, cloud_y descriptors.
    pub refined: [FeatureMatrix; 4],
    /// Mesh X to mesh Y through the functional map.
    pub fmap_route: Option<RouteComparison>,
    /// Mesh X to the cloud of Y through feature similarity.
    pub similarity_route: Option<RouteComparison>,
}

/// Refines the descriptors of `pair`. With ground truth (target vertex to
/// source vertex) also scores both matching routes before and after.
pub fn cmd_refine(
    pair: &TrainingPair,
    config: &PipelineConfig,
    ground_truth: Option<(&PointMap, &TriangleMesh)>,
) -> Result<RefineResult> {
    let outcome = refine_features(&pair.problem(config), &config.refine)?;
    let refined = pair.features(Some(&outcome.transform));
    let compare = |name: &str, run: &dyn Fn(Option<&DMatrix<f64>>) -> Result<PointMap>| -> Result<Option<RouteComparison>> {
        let Some((gt, mesh)) = ground_truth else {
            return Ok(None);
        };
        Ok(Some(RouteComparison {
            before: cmd_eval(&format!("{name} before"), &run(None)?, gt, mesh, None)?,
            after: cmd_eval(&format!("{name} after"), &run(Some(&outcome.transform))?, gt, mesh, None)?,
        }))
    };
    let fmap_route = compare("fmap", &|w| pair.fmap_match(w, config))?;
    let similarity_route = compare("similarity", &|w| pair.similarity_match(w, config))?;
    Ok(RefineResult {
        outcome,
        refined,
        fmap_route,
        similarity_route,
    })
}

pub fn cmd_synth(kind: SynthKind, params: &SynthParams, out_dir: Option<&Path>) -> Result<SynthPair> {
    let pair = SynthPair::generate(kind, params)?;
    if let Some(dir) = out_dir {
        pair.write(dir)?;
    }
    Ok(pair)
}

/// Descriptors of one shape under the modality it would be matched with:
/// meshes use the cotangent basis, clouds the kNN basis.
pub fn dump_features(shape: &Shape, config: &PipelineConfig, cache: &BasisCache) -> Result<FeatureMatrix> {
    config.validate()?;
    let modality = match shape {
        Shape::Mesh(_) => Modality::Mesh,
        Shape::Cloud(_) => Modality::PointCloud,
    };
    let basis = compute_basis(shape, modality, config.effective_k(), config.knn, cache)?;
    extract_features(shape, &basis, config)
}
