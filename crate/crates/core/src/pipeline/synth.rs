//! Seeded synthetic pairs with exact ground truth: a bumpy sphere and its
//! twisted copy, a bumpy plane bent around a cylinder, and a sphere with a
//! cap cut away.

use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fmap::PointMap;
use crate::geometry::{primitives, save_shape, surface_area, Shape, ShapeFormat, TriangleMesh, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    IsospherePair,
    BentPlanePair,
    PartialCutPair,
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "isosphere_pair" => Ok(SynthKind::IsospherePair),
            "bent_plane_pair" => Ok(SynthKind::BentPlanePair),
            "partial_cut_pair" => Ok(SynthKind::PartialCutPair),
            other => Err(Error::InvalidArgument(format!("unknown synthetic pair kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SynthParams {
    /// Icosphere subdivision level (sphere-based kinds).
    pub level: u32,
    /// Grid resolution (bent plane).
    pub nx: usize,
    pub ny: usize,
    /// Twist (radians per unit height) or bend curvature (1 / radius).
    pub deformation: f64,
    /// Fraction of faces removed by the partial cut.
    pub cut_fraction: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            level: 3,
            nx: 25,
            ny: 20,
            deformation: 0.3,
            cut_fraction: 0.4,
            seed: 0,
        }
    }
}

/// Source `X`, target `Y` and, for every vertex of `Y`, its vertex in `X`.
#[derive(Debug, Clone)]
pub struct SynthPair {
    pub kind: SynthKind,
    pub params: SynthParams,
    pub source: TriangleMesh,
    pub target: TriangleMesh,
    pub ground_truth: PointMap,
    /// `area(Y) / area(X)`.
    pub area_ratio: f64,
}

#[derive(Serialize)]
struct SynthSummary<'a> {
    kind: SynthKind,
    params: &'a SynthParams,
    n_source: usize,
    n_target: usize,
    area_ratio: f64,
}

impl SynthPair {
    pub fn generate(kind: SynthKind, params: &SynthParams) -> Result<Self> {
        if !params.deformation.is_finite() {
            return Err(Error::InvalidArgument("deformation must be finite".into()));
        }
        match kind {
            SynthKind::IsospherePair => isosphere_pair(params),
            SynthKind::BentPlanePair => bent_plane_pair(params),
            SynthKind::PartialCutPair => partial_cut_pair(params),
        }
    }

    /// Writes `source.off`, `target.off`, `gt.txt` and `synth.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_shape(&Shape::Mesh(self.source.clone()), &dir.join("source.off"), ShapeFormat::Off)?;
        save_shape(&Shape::Mesh(self.target.clone()), &dir.join("target.off"), ShapeFormat::Off)?;
        self.ground_truth.save(&dir.join("gt.txt"))?;
        let summary = SynthSummary {
            kind: self.kind,
            params: &self.params,
            n_source: self.source.n_vertices(),
            n_target: self.target.n_vertices(),
            area_ratio: self.area_ratio,
        };
        let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
        let path = dir.join("synth.json");
        std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
    }
}

fn unit_normal(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

/// Elongated icosphere (semi-axes 0.8, 1.2, 2.0) with seeded radial
/// Gaussian bumps of distinct sizes, so the shape has no intrinsic symmetry.
pub fn bumpy_sphere(level: u32, seed: u64) -> Result<TriangleMesh> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<(Vec3, f64, f64)> = (0..6)
        .map(|i| {
            let dir = unit_normal(&mut rng);
            let height = 1.5 * (0.15 + 0.08 * i as f64 + rng.random_range(0.0..0.05));
            let width = 0.25 + 0.07 * i as f64;
            (dir, height, width)
        })
        .collect();
    let sphere = primitives::icosphere(level);
    let vertices = sphere
        .vertices()
        .iter()
        .map(|v| {
            let lift: f64 = bumps
                .iter()
                .map(|(d, h, w)| h * (-(1.0 - v.dot(d)) / (w * w)).exp())
                .sum();
            let p = v * (1.0 + lift);
            Vec3::new(0.8 * p.x, 1.2 * p.y, 2.0 * p.z)
        })
        .collect();
    TriangleMesh::new(vertices, sphere.faces().to_vec(), format!("bumpy_sphere_{seed}"))
}

fn isosphere_pair(params: &SynthParams) -> Result<SynthPair> {
    let source = bumpy_sphere(params.level, params.seed)?;
    // twist about the z axis, angle proportional to height
    let vertices = source
        .vertices()
        .iter()
        .map(|v| {
            let (s, c) = (params.deformation * v.z).sin_cos();
            Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
        })
        .collect();
    let target = TriangleMesh::new(vertices, source.faces().to_vec(), "isosphere_pair_target")?;
    let n = source.n_vertices();
    Ok(SynthPair {
        kind: SynthKind::IsospherePair,
        params: *params,
        area_ratio: surface_area(&target) / surface_area(&source),
        source,
        target,
        ground_truth: PointMap::identity(n),
    })
}

/// Grid over an asymmetric planar domain (a bent trapezoid about 2 x 1.6)
/// with seeded height bumps. Vertex `(i, j)` has index `j * nx + i`.
pub fn bumpy_plane(nx: usize, ny: usize, seed: u64) -> Result<TriangleMesh> {
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidArgument("grid needs at least 2x2 vertices".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|i| {
            let cx = rng.random_range(-0.8..0.8);
            let cy = rng.random_range(-0.6..0.6);
            let height = 0.08 + 0.05 * i as f64;
            let width = 0.2 + 0.06 * i as f64;
            (cx, cy, height, width)
        })
        .collect();
    let plane = primitives::grid(nx, ny, 1.0, 1.0);
    let vertices = plane
        .vertices()
        .iter()
        .map(|v| {
            let (u, w) = (v.x, v.y);
            let (x, y) = (2.0 * u - 1.0, 1.6 * w - 0.8);
            let z: f64 = bumps
                .iter()
                .map(|(cx, cy, h, s)| h * (-((x - cx).powi(2) + (y - cy).powi(2)) / (s * s)).exp())
                .sum();
            // no mirror symmetry in the outline
            Vec3::new(x + 0.25 * w * w, y * (0.55 + 0.6 * u) + 0.15 * u * u, z)
        })
        .collect();
    TriangleMesh::new(vertices, plane.faces().to_vec(), format!("bumpy_plane_{seed}"))
}

fn bent_plane_pair(params: &SynthParams) -> Result<SynthPair> {
    let source = bumpy_plane(params.nx, params.ny, params.seed)?;
    let kappa = params.deformation;
    let vertices = source
        .vertices()
        .iter()
        .map(|v| {
            if kappa == 0.0 {
                return *v;
            }
            // wrap x around a cylinder of radius 1/kappa along the y axis,
            // keeping the height offset along the surface normal
            let radius = 1.0 / kappa;
            let (s, c) = (v.x * kappa).sin_cos();
            let rho = radius - v.z;
            Vec3::new(rho * s, v.y, radius - rho * c)
        })
        .collect();
    let target = TriangleMesh::new(vertices, source.faces().to_vec(), "bent_plane_pair_target")?;
    let n = source.n_vertices();
    Ok(SynthPair {
        kind: SynthKind::BentPlanePair,
        params: *params,
        area_ratio: surface_area(&target) / surface_area(&source),
        source,
        target,
        ground_truth: PointMap::identity(n),
    })
}

fn partial_cut_pair(params: &SynthParams) -> Result<SynthPair> {
    if !(params.cut_fraction > 0.0 && params.cut_fraction < 1.0) {
        return Err(Error::InvalidArgument("cut_fraction must lie in (0, 1)".into()));
    }
    let source = bumpy_sphere(params.level, params.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x5eed_c0de);
    let dir = unit_normal(&mut rng);

    let centroid = |f: &[usize; 3]| -> f64 {
        let v = source.vertices();
        ((v[f[0]] + v[f[1]] + v[f[2]]) / 3.0).dot(&dir)
    };
    let mut order: Vec<usize> = (0..source.n_faces()).collect();
    let heights: Vec<f64> = source.faces().iter().map(centroid).collect();
    // highest faces first; ties broken by index for determinism
    order.sort_by(|&a, &b| heights[b].total_cmp(&heights[a]).then(a.cmp(&b)));
    let n_cut = (params.cut_fraction * source.n_faces() as f64).round() as usize;
    let kept: Vec<[usize; 3]> = {
        let mut keep = vec![true; source.n_faces()];
        for &f in &order[..n_cut.min(source.n_faces() - 1)] {
            keep[f] = false;
        }
        source
            .faces()
            .iter()
            .zip(&keep)
            .filter(|(_, k)| **k)
            .map(|(f, _)| *f)
            .collect()
    };

    let mut new_index = vec![usize::MAX; source.n_vertices()];
    let mut used = vec![false; source.n_vertices()];
    for f in &kept {
        for &v in f {
            used[v] = true;
        }
    }
    let mut gt = Vec::new();
    let mut vertices = Vec::new();
    for (old, _) in used.iter().enumerate().filter(|(_, u)| **u) {
        new_index[old] = gt.len();
        gt.push(old);
        vertices.push(source.vertices()[old]);
    }
    let faces = kept
        .iter()
        .map(|f| [new_index[f[0]], new_index[f[1]], new_index[f[2]]])
        .collect();
    let target = TriangleMesh::new(vertices, faces, "partial_cut_pair_target")?;
    let ground_truth = PointMap::new(gt, source.n_vertices())?;
    Ok(SynthPair {
        kind: SynthKind::PartialCutPair,
        params: *params,
        area_ratio: surface_area(&target) / surface_area(&source),
        source,
        target,
        ground_truth,
    })
}

/// Uniformly random permutation, seeded.
pub fn random_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    perm
}

/// Rotation about a seeded random axis.
pub fn random_rotation(seed: u64) -> nalgebra::Matrix3<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = nalgebra::Unit::new_normalize(unit_normal(&mut rng));
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    *nalgebra::Rotation3::from_axis_angle(&axis, angle).matrix()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_deformation_gives_identical_meshes() {
        let params = SynthParams {
            level: 2,
            deformation: 0.0,
            ..Default::default()
        };
        let pair = SynthPair::generate(SynthKind::IsospherePair, &params).unwrap();
        assert_eq!(pair.source.vertices(), pair.target.vertices());
        assert_eq!(pair.ground_truth, PointMap::identity(pair.source.n_vertices()));
        assert_eq!(pair.area_ratio, 1.0);
    }

    #[test]
    fn partial_cut_ground_truth_covers_survivors() {
        let params = SynthParams {
            level: 2,
            cut_fraction: 0.4,
            seed: 3,
            ..Default::default()
        };
        let pair = SynthPair::generate(SynthKind::PartialCutPair, &params).unwrap();
        let nf = pair.source.n_faces();
        assert_eq!(pair.target.n_faces(), nf - (0.4 * nf as f64).round() as usize);
        assert_eq!(pair.ground_truth.len(), pair.target.n_vertices());
        for (j, &i) in pair.ground_truth.assignment.iter().enumerate() {
            assert_eq!(pair.target.vertices()[j], pair.source.vertices()[i]);
        }
        assert!(pair.area_ratio > 0.4 && pair.area_ratio < 0.8, "{}", pair.area_ratio);
    }

    #[test]
    fn bent_plane_is_deterministic_and_near_isometric() {
        let params = SynthParams {
            nx: 12,
            ny: 10,
            deformation: 0.3,
            seed: 9,
            ..Default::default()
        };
        let a = SynthPair::generate(SynthKind::BentPlanePair, &params).unwrap();
        let b = SynthPair::generate(SynthKind::BentPlanePair, &params).unwrap();
        assert_eq!(a.target.vertices(), b.target.vertices());
        assert!((a.area_ratio - 1.0).abs() < 0.02, "{}", a.area_ratio);
        let other = SynthPair::generate(SynthKind::BentPlanePair, &SynthParams { seed: 10, ..params }).unwrap();
        assert_ne!(a.source.vertices(), other.source.vertices());
    }

    #[test]
    fn permutation_is_a_bijection() {
        let mut p = random_permutation(50, 1);
        p.sort_unstable();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }
}
