mod common;

use nalgebra::{DMatrix, Vector3};

use shapematch::descriptors::{FeatureKind, FeatureMatrix};
use shapematch::eval::MatchReport;
use shapematch::fmap::PointMap;
use shapematch::geometry::{mesh_to_point_cloud, Shape, TriangleMesh};
use shapematch::pipeline::synth::{bumpy_sphere, random_permutation, random_rotation};
use shapematch::pipeline::{
    cmd_match, cmd_refine, BasisCache, FeatureOverride, PipelineConfig, Route, SynthKind, SynthPair, SynthParams,
    TrainingPair,
};

fn corpus() -> Vec<TriangleMesh> {
    let mut shapes = Vec::new();
    for seed in 0..2 {
        let params = SynthParams { level: 2, nx: 14, ny: 11, seed, ..SynthParams::default() };
        shapes.push(SynthPair::generate(SynthKind::IsospherePair, &params).unwrap().source);
        shapes.push(SynthPair::generate(SynthKind::BentPlanePair, &params).unwrap().target);
    }
    shapes
}

fn config(pairs: &[(&str, &str)]) -> PipelineConfig {
    let overrides: Vec<String> = pairs.iter().map(|(k, v)| format!("{k}={v}")).collect();
    PipelineConfig::default().with_overrides(&overrides).unwrap()
}

#[test]
fn mesh_matches_itself_exactly() {
    for mesh in corpus() {
        let shape = Shape::Mesh(mesh.clone());
        let out = cmd_match(&shape, &shape, &PipelineConfig::default(), FeatureOverride::default(), &BasisCache::default()).unwrap();
        assert_eq!(out.route, Route::FunctionalMap);
        let id = PointMap::identity(mesh.n_vertices());
        let report = MatchReport::evaluate("self", &out.pointmap, &id, &mesh).unwrap();
        assert!(report.mean_error < 1e-6, "{}: {}", mesh.shape_id, report.mean_error);
    }
}

#[test]
fn mesh_matches_its_own_cloud() {
    for mesh in corpus() {
        let cloud = Shape::Cloud(mesh_to_point_cloud(&mesh, 0.0, 0).unwrap());
        let out = cmd_match(&Shape::Mesh(mesh.clone()), &cloud, &PipelineConfig::default(), FeatureOverride::default(), &BasisCache::default()).unwrap();
        assert_eq!(out.route, Route::Similarity);
        let hits = out.pointmap.assignment.iter().enumerate().filter(|(j, &i)| i == *j).count();
        assert!(hits as f64 >= 0.99 * mesh.n_vertices() as f64, "{}: {hits} of {}", mesh.shape_id, mesh.n_vertices());
    }
}

#[test]
fn mismatched_feature_dimensions_are_rejected() {
    let mesh = corpus().remove(0);
    let n = mesh.n_vertices();
    let a = FeatureMatrix::new(DMatrix::from_element(n, 4, 1.0), FeatureKind::External).unwrap();
    let b = FeatureMatrix::new(DMatrix::from_element(n, 5, 1.0), FeatureKind::External).unwrap();
    let cloud = Shape::Cloud(mesh_to_point_cloud(&mesh, 0.0, 0).unwrap());
    let feats = FeatureOverride { source: Some(&a), target: Some(&b) };
    let err = cmd_match(&Shape::Mesh(mesh), &cloud, &PipelineConfig::default(), feats, &BasisCache::default()).unwrap_err();
    assert!(err.to_string().contains("dimension"), "{err}");
}

#[test]
fn basis_cache_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cache = BasisCache(Some(dir.path().to_path_buf()));
    let pair = SynthPair::generate(SynthKind::BentPlanePair, &SynthParams { nx: 10, ny: 8, ..SynthParams::default() }).unwrap();
    let (x, y) = (Shape::Mesh(pair.source), Shape::Mesh(pair.target));
    let cfg = config(&[("k", "20")]);
    let plain = cmd_match(&x, &y, &cfg, FeatureOverride::default(), &BasisCache::default()).unwrap();
    let cold = cmd_match(&x, &y, &cfg, FeatureOverride::default(), &cache).unwrap();
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
    let warm = cmd_match(&x, &y, &cfg, FeatureOverride::default(), &cache).unwrap();
    assert_eq!(plain.pointmap, cold.pointmap);
    assert_eq!(cold.fmap, warm.fmap);
}

#[test]
fn noisy_runs_are_reproducible() {
    let mesh = corpus().remove(1);
    let cfg = config(&[("k", "20"), ("noise_sigma", "0.01")]);
    let run = || {
        let pair = TrainingPair::build(&mesh, &mesh, &cfg, FeatureOverride::default(), &BasisCache::default()).unwrap();
        pair.cloud_x.values
    };
    assert_eq!(run(), run());
}

#[test]
fn refinement_keeps_exact_isometric_match() {
    let seed = 0;
    let mesh = bumpy_sphere(2, seed).unwrap();
    let perm = random_permutation(mesh.n_vertices(), seed + 10);
    let copy = mesh.permuted(&perm).unwrap().transformed(&random_rotation(seed + 20), &Vector3::new(0.5, 0.0, -1.0));
    let gt = PointMap::new(perm, mesh.n_vertices()).unwrap();
    let cfg = config(&[("k", "30"), ("wks_energies", "8")]);
    let pair = TrainingPair::build(&mesh, &copy, &cfg, FeatureOverride::default(), &BasisCache::default()).unwrap();
    let result = cmd_refine(&pair, &cfg, Some((&gt, &mesh))).unwrap();

    let trace: Vec<f64> = result.outcome.trace.iter().map(|r| r.e_total).collect();
    assert!(trace.windows(2).all(|w| w[1] <= w[0]), "{trace:?}");
    assert!(trace.last() < trace.first());
    let fmap = result.fmap_route.unwrap();
    // frozen on the first run: 0 before and after
    assert_eq!(fmap.before.mean_error, 0.0);
    assert!(fmap.after.mean_error <= fmap.before.mean_error);
}

#[test]
fn zero_steps_leave_features_untouched() {
    let pair = SynthPair::generate(SynthKind::BentPlanePair, &SynthParams { nx: 8, ny: 6, ..SynthParams::default() }).unwrap();
    let mut cfg = config(&[("k", "15"), ("wks_energies", "6")]);
    cfg.refine.steps = 0;
    cfg.refine.out_dim = 6;
    let tp = TrainingPair::build(&pair.source, &pair.target, &cfg, FeatureOverride::default(), &BasisCache::default()).unwrap();
    let result = cmd_refine(&tp, &cfg, Some((&pair.ground_truth, &pair.source))).unwrap();
    assert_eq!(result.outcome.transform, DMatrix::<f64>::identity(6, 6));
    assert_eq!(result.refined[0].values, tp.mesh_x.values);
    assert_eq!(result.outcome.trace.len(), 1);
    let fmap = result.fmap_route.unwrap();
    assert_eq!(fmap.before.mean_error, fmap.after.mean_error);
}
