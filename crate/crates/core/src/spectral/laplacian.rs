use std::f64::consts::PI;

use nalgebra::DVector;
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use super::{LaplaceOperator, Modality};
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Shape, TriangleMesh, Vec3};

pub const DEFAULT_KNN: usize = 16;

const MIN_FACE_AREA: f64 = 1e-12;

/// Assembles `S` from symmetric edge weights: `S_ij = -w`, `S_ii = Σ w`.
fn assemble(n: usize, weights: &[(usize, usize, f64)]) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(n, n);
    for &(a, b, w) in weights {
        coo.push(a, b, -w);
        coo.push(b, a, -w);
        coo.push(a, a, w);
        coo.push(b, b, w);
    }
    CsrMatrix::from(&coo)
}

/// Cotangent stiffness with barycentric (area / 3) lumped mass.
pub fn cotan_laplacian(mesh: &TriangleMesh) -> Result<LaplaceOperator> {
    let v = mesh.vertices();
    let n = mesh.n_vertices();
    let mut mass = DVector::zeros(n);
    let mut weights = Vec::with_capacity(mesh.n_faces() * 3);
    for (fi, face) in mesh.faces().iter().enumerate() {
        let area = mesh.face_area(fi);
        if area < MIN_FACE_AREA {
            return Err(Error::DegenerateFace { face: fi, area });
        }
        for c in 0..3 {
            let (corner, a, b) = (face[c], face[(c + 1) % 3], face[(c + 2) % 3]);
            let u = v[a] - v[corner];
            let w = v[b] - v[corner];
            let cot = u.dot(&w) / u.cross(&w).norm();
            weights.push((a, b, 0.5 * cot));
            mass[corner] += area / 3.0;
        }
    }
    if let Some(i) = mass.iter().position(|m| *m <= 0.0) {
        return Err(Error::InvalidShape(format!(
            "vertex {i} is not referenced by any face"
        )));
    }
    Ok(LaplaceOperator {
        stiffness: assemble(n, &weights),
        mass,
        modality: Modality::Mesh,
    })
}

/// Indices of the `k` nearest other points, closest first, ties by index.
fn knn_indices(points: &[Vec3], i: usize, k: usize) -> Vec<(usize, f64)> {
    let mut d: Vec<(usize, f64)> = points
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(j, p)| (j, (p - points[i]).norm_squared()))
        .collect();
    let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    d.select_nth_unstable_by(k - 1, cmp);
    d.truncate(k);
    d.sort_by(cmp);
    d.into_iter().map(|(j, d2)| (j, d2.sqrt())).collect()
}

/// Symmetrized kNN graph Laplacian with Gaussian heat weights.
///
/// Weights are `exp(-d² / 2σ²)` with `σ` the mean distance to the `knn`-th
/// neighbour. The local area of point `i` is estimated as `π r_i² / knn`
/// from its `knn`-th neighbour distance `r_i`; mass is proportional to the
/// weighted degree and sums to that area estimate. The stiffness is scaled
/// by `4 Ā / m̄₂` (mean area over mean weighted second moment), which makes
/// `Σ_j w_ij (f_j - f_i)` a consistent estimate of the surface Laplacian.
pub fn pointcloud_laplacian(cloud: &PointCloud, knn: usize) -> Result<LaplaceOperator> {
    let pts = cloud.points();
    let n = pts.len();
    if knn < 3 {
        return Err(Error::InvalidArgument(format!("knn must be >= 3, got {knn}")));
    }
    if n <= knn {
        return Err(Error::InvalidArgument(format!(
            "point cloud with {n} points cannot support knn = {knn}"
        )));
    }
    let neighbours: Vec<Vec<(usize, f64)>> = (0..n).map(|i| knn_indices(pts, i, knn)).collect();
    let radii: Vec<f64> = neighbours.iter().map(|nb| nb[knn - 1].1).collect();
    let sigma = radii.iter().sum::<f64>() / n as f64;
    let scale = crate::geometry::bounding_box_diagonal(pts);
    if !(sigma > 1e-12 * scale.max(1e-300)) {
        return Err(Error::InvalidShape(format!(
            "neighbourhood scale collapsed to {sigma:e}; the cloud has duplicate points"
        )));
    }

    let mut edges: Vec<(usize, usize)> = neighbours
        .iter()
        .enumerate()
        .flat_map(|(i, nb)| nb.iter().map(move |&(j, _)| (i.min(j), i.max(j))))
        .collect();
    edges.sort_unstable();
    edges.dedup();

    let mut degree = vec![0.0; n];
    let mut moment = vec![0.0; n];
    let weights: Vec<(usize, usize, f64)> = edges
        .into_iter()
        .map(|(a, b)| {
            let d2 = (pts[a] - pts[b]).norm_squared();
            let w = (-d2 / (2.0 * sigma * sigma)).exp();
            degree[a] += w;
            degree[b] += w;
            moment[a] += w * d2;
            moment[b] += w * d2;
            (a, b, w)
        })
        .collect();

    let area: f64 = radii.iter().map(|r| PI * r * r / knn as f64).sum();
    let total_degree: f64 = degree.iter().sum();
    let mass = DVector::from_iterator(n, degree.iter().map(|d| d * area / total_degree));
    let mean_moment = moment.iter().sum::<f64>() / n as f64;
    let stiffness_scale = 4.0 * (area / n as f64) / mean_moment;

    let scaled: Vec<_> = weights
        .into_iter()
        .map(|(a, b, w)| (a, b, w * stiffness_scale))
        .collect();
    Ok(LaplaceOperator {
        stiffness: assemble(n, &scaled),
        mass,
        modality: Modality::PointCloud,
    })
}

/// Cotangent Laplacian for meshes, kNN heat Laplacian for clouds.
pub fn shape_laplacian(shape: &Shape, knn: usize) -> Result<LaplaceOperator> {
    match shape {
        Shape::Mesh(m) => cotan_laplacian(m),
        Shape::Cloud(c) => pointcloud_laplacian(c, knn),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{primitives, surface_area};

    #[test]
    fn equilateral_triangle_weights() {
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.5, 3f64.sqrt() / 2.0, 0.0),
        ];
        let mesh = TriangleMesh::new(v, vec![[0, 1, 2]], "eq").unwrap();
        let op = cotan_laplacian(&mesh).unwrap();
        let s = op.dense_stiffness();
        // cot(60°) / 2 = 1 / (2√3)
        let w = 1.0 / (2.0 * 3f64.sqrt());
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 2.0 * w } else { -w };
                assert!((s[(i, j)] - expected).abs() < 1e-12, "{i},{j}: {}", s[(i, j)]);
            }
        }
        assert!((s[(0, 1)] + 0.288_675_134_594_812_9).abs() < 1e-12);
        assert!((s[(0, 0)] - 0.577_350_269_189_625_8).abs() < 1e-12);
    }

    #[test]
    fn cotan_invariants_on_sphere() {
        let mesh = primitives::icosphere(2);
        let op = cotan_laplacian(&mesh).unwrap();
        let s = op.dense_stiffness();
        assert!((&s - s.transpose()).amax() < 1e-10);
        let ones = DVector::from_element(mesh.n_vertices(), 1.0);
        assert!((&s * ones).amax() < 1e-8);
        assert!(op.mass.iter().all(|m| *m > 0.0));
        assert!((op.mass.sum() - surface_area(&mesh)).abs() < 1e-10);
    }

    #[test]
    fn degenerate_face_is_named() {
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        let mesh = TriangleMesh::new(v, vec![[0, 1, 3], [0, 1, 2]], "flat").unwrap();
        assert!(matches!(
            cotan_laplacian(&mesh),
            Err(Error::DegenerateFace { face: 1, .. })
        ));
    }

    #[test]
    fn pointcloud_kernel_and_symmetry() {
        let cloud = crate::geometry::mesh_to_point_cloud(&primitives::icosphere(2), 0.0, 0).unwrap();
        let op = pointcloud_laplacian(&cloud, 8).unwrap();
        let s = op.dense_stiffness();
        assert!((&s - s.transpose()).amax() < 1e-10);
        let ones = DVector::from_element(cloud.n_points(), 1.0);
        assert!((&s * ones).amax() < 1e-8);
        assert!(op.mass.iter().all(|m| *m > 0.0));
    }

    #[test]
    fn pointcloud_argument_errors() {
        let cloud = PointCloud::new(vec![Vec3::zeros(); 10], "dup").unwrap();
        assert!(matches!(
            pointcloud_laplacian(&cloud, 3),
            Err(Error::InvalidShape(_))
        ));
        assert!(pointcloud_laplacian(&cloud, 2).is_err());
        assert!(pointcloud_laplacian(&cloud, 10).is_err());
    }
}
