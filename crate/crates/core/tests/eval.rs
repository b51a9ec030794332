mod common;

use nalgebra::Vector3;
use proptest::prelude::*;
use rand::Rng;

use shapematch::eval::{aggregate, geodesic_error, pck_curve, MatchReport};
use shapematch::fmap::PointMap;
use shapematch::geometry::surface_area;
use shapematch::pipeline::synth::{bumpy_plane, bumpy_sphere, random_rotation};

#[test]
fn errors_match_bellman_ford_recomputation() {
    for mesh in common::small_corpus() {
        let n = mesh.n_vertices();
        let d = common::bellman_ford(&mesh);
        let mut rng = common::rng(n as u64);
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let gt: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let errors = geodesic_error(&PointMap::new(pred.clone(), n).unwrap(), &PointMap::new(gt.clone(), n).unwrap(), &mesh).unwrap();
        let norm = surface_area(&mesh).sqrt();
        let mut skipped = 0;
        for j in 0..n {
            let want = d[pred[j]][gt[j]];
            match errors.per_vertex[j] {
                Some(e) => assert!((e - want / norm).abs() < 1e-12, "{} vertex {j}", mesh.shape_id),
                None => {
                    assert!(want.is_infinite());
                    skipped += 1;
                }
            }
        }
        assert_eq!(errors.skipped, skipped);
    }
}

#[test]
fn identity_has_zero_error_on_corpus() {
    for mesh in [bumpy_sphere(2, 0).unwrap(), bumpy_plane(12, 9, 0).unwrap()] {
        let id = PointMap::identity(mesh.n_vertices());
        let report = MatchReport::evaluate("self", &id, &id, &mesh).unwrap();
        assert_eq!(report.mean_error, 0.0);
    }
}

#[test]
fn errors_invariant_under_rigid_motion() {
    let mesh = bumpy_plane(10, 8, 3).unwrap();
    let moved = mesh.transformed(&random_rotation(4), &Vector3::new(10.0, -3.0, 2.0));
    let n = mesh.n_vertices();
    let mut rng = common::rng(5);
    let pred = PointMap::new((0..n).map(|_| rng.random_range(0..n)).collect(), n).unwrap();
    let gt = PointMap::identity(n);
    let (a, b) = (geodesic_error(&pred, &gt, &mesh).unwrap(), geodesic_error(&pred, &gt, &moved).unwrap());
    for (x, y) in a.scored().iter().zip(b.scored()) {
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn aggregate_is_percent_of_mean_of_means() {
    let mesh = bumpy_plane(4, 4, 0).unwrap();
    let id = PointMap::identity(16);
    let mut reports = vec![MatchReport::evaluate("a", &id, &id, &mesh).unwrap(); 2];
    reports[0].mean_error = 0.02;
    reports[1].mean_error = 0.04;
    assert!((aggregate(&reports).unwrap() - 3.0).abs() < 1e-12);
    assert!(aggregate(&[]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn pck_matches_counting_loop(errors in prop::collection::vec(0.0f64..0.5, 1..60)) {
        let thresholds: Vec<f64> = (0..=25).map(|i| i as f64 / 100.0).collect();
        let pck = pck_curve(&errors, &thresholds).unwrap();
        let mut last = 0.0;
        for (&(t, f), &want_t) in pck.iter().zip(&thresholds) {
            prop_assert_eq!(t, want_t);
            let count = errors.iter().filter(|&&e| e <= t).count();
            prop_assert_eq!(f, count as f64 / errors.len() as f64);
            prop_assert!(f >= last);
            last = f;
        }
        let all = pck_curve(&errors, &[f64::INFINITY]).unwrap();
        prop_assert_eq!(all[0].1, 1.0);
    }
}
