mod common;

use nalgebra::Vector3;
use proptest::prelude::*;
use rand::Rng;

use shapematch::eval::geodesic_error;
use shapematch::fmap::PointMap;
use shapematch::geometry::primitives::{grid, icosphere, tetrahedron};
use shapematch::geometry::{
    geodesic_distances, load_shape, mesh_to_point_cloud, save_shape, surface_area, Shape, ShapeFormat, TriangleMesh,
};

fn jittered_grid(nx: usize, ny: usize, seed: u64) -> TriangleMesh {
    let base = grid(nx, ny, 1.0, 1.0);
    let mut rng = common::rng(seed);
    let vertices = base
        .vertices()
        .iter()
        .map(|v| v + Vector3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.3..0.3)))
        .collect();
    TriangleMesh::new(vertices, base.faces().to_vec(), "jittered").unwrap()
}

#[test]
fn dijkstra_equals_bellman_ford_on_small_corpus() {
    for mesh in common::small_corpus() {
        let oracle = common::bellman_ford(&mesh);
        for (s, row) in oracle.iter().enumerate() {
            assert_eq!(&geodesic_distances(&mesh, s).unwrap().distances, row, "{} from {s}", mesh.shape_id);
        }
    }
}

#[test]
fn grid_corner_to_corner() {
    let mesh = grid(3, 3, 2.0, 2.0);
    let d = geodesic_distances(&mesh, 0).unwrap();
    assert_eq!(d.distance_to(8), common::bellman_ford(&mesh)[0][8]);
}

#[test]
fn tetrahedron_is_a_sphere() {
    let t = tetrahedron();
    let (v, e, f) = (t.n_vertices() as i64, t.edges().len() as i64, t.n_faces() as i64);
    assert_eq!(v - e + f, 2);
}

#[test]
fn icosphere_area_near_analytic() {
    let s = icosphere(3);
    assert_eq!(s.n_faces(), 1280);
    let rel = (surface_area(&s) - 4.0 * std::f64::consts::PI).abs() / (4.0 * std::f64::consts::PI);
    assert!(rel < 0.02, "relative area gap {rel}");
}

#[test]
fn noise_magnitude_matches_gaussian_norm() {
    let mesh = icosphere(3);
    assert_eq!(mesh.n_vertices(), 642);
    let sigma = 0.01;
    let cloud = mesh_to_point_cloud(&mesh, sigma, 7).unwrap();
    let mean: f64 = cloud
        .points()
        .iter()
        .zip(mesh.vertices())
        .map(|(p, v)| (p - v).norm())
        .sum::<f64>()
        / 642.0;
    // E|N(0, σ²I₃)| = σ √(8/π)
    let expected = sigma * (8.0 / std::f64::consts::PI).sqrt();
    assert!((0.8 * expected..=1.2 * expected).contains(&mean), "{mean} vs {expected}");
    assert_eq!(mesh_to_point_cloud(&mesh, sigma, 7).unwrap(), cloud);
    assert_ne!(mesh_to_point_cloud(&mesh, sigma, 8).unwrap(), cloud);
}

#[test]
fn zero_noise_cloud_has_zero_identity_error() {
    let mesh = jittered_grid(6, 5, 1);
    let cloud = mesh_to_point_cloud(&mesh, 0.0, 3).unwrap();
    assert_eq!(cloud.points(), mesh.vertices());
    let id = PointMap::identity(mesh.n_vertices());
    let errors = geodesic_error(&id, &id, &mesh).unwrap();
    assert!(errors.scored().iter().all(|&e| e == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dijkstra_matches_oracle_on_random_grids(nx in 2usize..8, ny in 2usize..7, seed in 0u64..1000) {
        let mesh = jittered_grid(nx, ny, seed);
        let oracle = common::bellman_ford(&mesh);
        for (s, row) in oracle.iter().enumerate() {
            let d = geodesic_distances(&mesh, s).unwrap();
            prop_assert_eq!(&d.distances, row);
        }
    }

    #[test]
    fn geodesics_are_symmetric_and_obey_triangle_inequality(nx in 2usize..7, ny in 2usize..6, seed in 0u64..1000) {
        let mesh = jittered_grid(nx, ny, seed);
        let n = mesh.n_vertices();
        let d: Vec<Vec<f64>> = (0..n).map(|s| geodesic_distances(&mesh, s).unwrap().distances).collect();
        for a in 0..n {
            prop_assert_eq!(d[a][a], 0.0);
            for b in 0..n {
                prop_assert!((d[a][b] - d[b][a]).abs() < 1e-12);
                for c in 0..n {
                    prop_assert!(d[a][c] <= d[a][b] + d[b][c] + 1e-9);
                }
            }
        }
    }

    #[test]
    fn off_and_ply_round_trip(nx in 2usize..6, ny in 2usize..6, seed in 0u64..1000, ply in any::<bool>()) {
        let mesh = jittered_grid(nx, ny, seed);
        let dir = tempfile::tempdir().unwrap();
        let (format, name) = if ply { (ShapeFormat::Ply, "m.ply") } else { (ShapeFormat::Off, "m.off") };
        let path = dir.path().join(name);
        save_shape(&Shape::Mesh(mesh.clone()), &path, format).unwrap();
        let Shape::Mesh(back) = load_shape(&path, format).unwrap() else {
            panic!("mesh came back as a cloud");
        };
        prop_assert_eq!(back.vertices(), mesh.vertices());
        prop_assert_eq!(back.faces(), mesh.faces());
    }
}
