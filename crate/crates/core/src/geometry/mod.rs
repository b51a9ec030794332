//! Shape representations and the geometric plumbing around them: file I/O,
//! mesh to point-cloud conversion, areas and graph geodesics.

mod geodesic;
pub mod io;
pub mod primitives;

use std::collections::BTreeSet;

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

pub use geodesic::{geodesic_distances, GeodesicTable};
pub use io::{load_shape, save_shape, ShapeFormat};

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    pub shape_id: String,
}

impl TriangleMesh {
    pub fn new(
        vertices: Vec<Vec3>,
        faces: Vec<[usize; 3]>,
        shape_id: impl Into<String>,
    ) -> Result<Self> {
        let n = vertices.len();
        if !faces.is_empty() && n < 3 {
            return Err(Error::InvalidShape(format!(
                "mesh with faces needs at least 3 vertices, got {n}"
            )));
        }
        for (i, v) in vertices.iter().enumerate() {
            if !v.iter().all(|c| c.is_finite()) {
                return Err(Error::NonFinite(format!("vertex {i} has coordinates {v:?}")));
            }
        }
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&idx| idx >= n) {
                return Err(Error::InvalidShape(format!(
                    "face {fi} references vertex {bad}, but there are only {n} vertices"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidShape(format!(
                    "face {fi} repeats a vertex: {f:?}"
                )));
            }
        }
        Ok(Self {
            vertices,
            faces,
            shape_id: shape_id.into(),
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    /// Unique undirected edges as `(lo, hi)` pairs, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut set = BTreeSet::new();
        for f in &self.faces {
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                set.insert((a.min(b), a.max(b)));
            }
        }
        set.into_iter().collect()
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.faces[face];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * (pb - pa).cross(&(pc - pa)).norm()
    }

    /// Applies `x -> rotation * x + translation` to every vertex.
    pub fn transformed(&self, rotation: &Matrix3<f64>, translation: &Vec3) -> Self {
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|v| rotation * v + translation)
                .collect(),
            faces: self.faces.clone(),
            shape_id: self.shape_id.clone(),
        }
    }

    /// Relabels vertices so that new vertex `j` is old vertex `perm[j]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n_vertices();
        let inverse = inverse_permutation(perm, n)?;
        let vertices = perm.iter().map(|&old| self.vertices[old]).collect();
        let faces = self
            .faces
            .iter()
            .map(|f| [inverse[f[0]], inverse[f[1]], inverse[f[2]]])
            .collect();
        Self::new(vertices, faces, self.shape_id.clone())
    }

    pub fn bounding_box_diagonal(&self) -> f64 {
        bounding_box_diagonal(&self.vertices)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
    pub shape_id: String,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>, shape_id: impl Into<String>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidShape("point cloud has no points".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(Error::NonFinite(format!("point {i} has coordinates {p:?}")));
            }
        }
        Ok(Self {
            points,
            shape_id: shape_id.into(),
        })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn bounding_box_diagonal(&self) -> f64 {
        bounding_box_diagonal(&self.points)
    }
}

/// Either input modality.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Mesh(TriangleMesh),
    Cloud(PointCloud),
}

impl Shape {
    pub fn positions(&self) -> &[Vec3] {
        match self {
            Shape::Mesh(m) => m.vertices(),
            Shape::Cloud(c) => c.points(),
        }
    }

    pub fn len(&self) -> usize {
        self.positions().len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions().is_empty()
    }

    pub fn shape_id(&self) -> &str {
        match self {
            Shape::Mesh(m) => &m.shape_id,
            Shape::Cloud(c) => &c.shape_id,
        }
    }

    pub fn as_mesh(&self) -> Option<&TriangleMesh> {
        match self {
            Shape::Mesh(m) => Some(m),
            Shape::Cloud(_) => None,
        }
    }

    /// Drops connectivity. Point clouds are returned unchanged.
    pub fn to_cloud(&self) -> PointCloud {
        match self {
            Shape::Mesh(m) => PointCloud {
                points: m.vertices.clone(),
                shape_id: m.shape_id.clone(),
            },
            Shape::Cloud(c) => c.clone(),
        }
    }
}

impl From<TriangleMesh> for Shape {
    fn from(m: TriangleMesh) -> Self {
        Shape::Mesh(m)
    }
}

impl From<PointCloud> for Shape {
    fn from(c: PointCloud) -> Self {
        Shape::Cloud(c)
    }
}

/// Discards connectivity and perturbs every vertex by isotropic Gaussian
/// noise of standard deviation `noise_sigma`. Point `i` corresponds to
/// vertex `i`.
pub fn mesh_to_point_cloud(mesh: &TriangleMesh, noise_sigma: f64, seed: u64) -> Result<PointCloud> {
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise sigma must be finite and >= 0, got {noise_sigma}"
        )));
    }
    let points = if noise_sigma == 0.0 {
        mesh.vertices.clone()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_sigma).expect("sigma checked above");
        mesh.vertices
            .iter()
            .map(|v| {
                let d = Vec3::new(
                    normal.sample(&mut rng),
                    normal.sample(&mut rng),
                    normal.sample(&mut rng),
                );
                v + d
            })
            .collect()
    };
    PointCloud::new(points, mesh.shape_id.clone())
}

pub fn surface_area(mesh: &TriangleMesh) -> f64 {
    (0..mesh.n_faces()).map(|f| mesh.face_area(f)).sum()
}

pub(crate) fn bounding_box_diagonal(points: &[Vec3]) -> f64 {
    let Some(first) = points.first() else {
        return 0.0;
    };
    let (lo, hi) = points
        .iter()
        .fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
    (hi - lo).norm()
}

pub(crate) fn inverse_permutation(perm: &[usize], n: usize) -> Result<Vec<usize>> {
    if perm.len() != n {
        return Err(Error::InvalidArgument(format!(
            "permutation has {} entries, expected {n}",
            perm.len()
        )));
    }
    let mut inverse = vec![usize::MAX; n];
    for (new, &old) in perm.iter().enumerate() {
        if old >= n || inverse[old] != usize::MAX {
            return Err(Error::InvalidArgument(format!(
                "not a permutation: entry {new} = {old}"
            )));
        }
        inverse[old] = new;
    }
    Ok(inverse)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn right_triangle(offset: f64) -> (Vec<Vec3>, [usize; 3]) {
        (
            vec![
                Vec3::new(offset, 0.0, 0.0),
                Vec3::new(offset + 1.0, 0.0, 0.0),
                Vec3::new(offset, 1.0, 0.0),
            ],
            [0, 1, 2],
        )
    }

    #[test]
    fn rejects_out_of_range_and_degenerate_faces() {
        let (v, _) = right_triangle(0.0);
        assert!(TriangleMesh::new(v.clone(), vec![[0, 1, 5]], "m").is_err());
        assert!(TriangleMesh::new(v, vec![[0, 1, 1]], "m").is_err());
        let two = vec![Vec3::zeros(), Vec3::x()];
        assert!(TriangleMesh::new(two, vec![[0, 1, 0]], "m").is_err());
    }

    #[test]
    fn unit_right_triangle_area() {
        let (v, f) = right_triangle(0.0);
        let mesh = TriangleMesh::new(v, vec![f], "t").unwrap();
        assert!((surface_area(&mesh) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn area_is_additive_over_disjoint_triangles() {
        let (mut v, _) = right_triangle(0.0);
        let (v2, _) = right_triangle(5.0);
        v.extend(v2);
        let mesh = TriangleMesh::new(v, vec![[0, 1, 2], [3, 4, 5]], "t").unwrap();
        assert!((surface_area(&mesh) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_noise_cloud_equals_vertices() {
        let mesh = primitives::icosphere(1);
        let cloud = mesh_to_point_cloud(&mesh, 0.0, 7).unwrap();
        assert_eq!(cloud.points(), mesh.vertices());
    }

    #[test]
    fn noisy_cloud_is_deterministic() {
        let mesh = primitives::icosphere(1);
        let a = mesh_to_point_cloud(&mesh, 0.01, 7).unwrap();
        let b = mesh_to_point_cloud(&mesh, 0.01, 7).unwrap();
        let bits = |c: &PointCloud| -> Vec<u64> {
            c.points().iter().flat_map(|p| p.iter().map(|x| x.to_bits())).collect()
        };
        assert_eq!(bits(&a), bits(&b));
        let c = mesh_to_point_cloud(&mesh, 0.01, 8).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn negative_sigma_is_rejected() {
        let mesh = primitives::icosphere(0);
        assert!(matches!(
            mesh_to_point_cloud(&mesh, -1.0, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn permutation_round_trip() {
        let mesh = primitives::icosphere(1);
        let n = mesh.n_vertices();
        let perm: Vec<usize> = (0..n).rev().collect();
        let p = mesh.permuted(&perm).unwrap();
        assert_eq!(p.vertices()[0], mesh.vertices()[n - 1]);
        assert!((surface_area(&p) - surface_area(&mesh)).abs() < 1e-12);
        assert!(mesh.permuted(&[0, 0, 1]).is_err());
    }
}
