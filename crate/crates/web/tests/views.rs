use shapematch_web::{EigenView, MatchView, SinkhornView};

#[test]
fn eigen_view_exposes_basis() {
    let view = EigenView::build("sphere", 2, 10, 0).unwrap();
    let n = view.vertices().len() / 3;
    assert_eq!(n, 162);
    assert_eq!(view.faces().len(), 3 * 320);
    let evals = view.eigenvalues();
    assert_eq!(evals.len(), 10);
    assert!(evals[0].abs() < 1e-8);
    assert!(evals.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(view.values(3).unwrap().len(), n);
    assert!(view.values(10).is_err());

    let plane = EigenView::build("plane", 10, 5, 1).unwrap();
    assert_eq!(plane.vertices().len(), 3 * 80);
    assert!(EigenView::build("torus", 2, 5, 0).is_err());
}

#[test]
fn sinkhorn_view_recovers_planted_permutation() {
    let view = SinkhornView::build(32, 3.0, 0.2, 10, 7).unwrap();
    let longer = SinkhornView::build(32, 3.0, 0.2, 50, 7).unwrap();
    assert!(longer.residual() < view.residual());
    assert_eq!(view.recovered(), 1.0);
    assert_eq!(view.matrix().len(), 32 * 32);

    let weak = SinkhornView::build(32, 0.0, 0.2, 10, 7).unwrap();
    assert!(weak.recovered() < 0.5);
    assert!(SinkhornView::build(0, 1.0, 0.2, 10, 0).is_err());
    assert!(SinkhornView::build(8, 1.0, 0.0, 10, 0).is_err());
}

#[test]
fn match_view_scores_every_target_vertex() {
    let view = MatchView::build(10, 0.0, 0).unwrap();
    let n = view.vertices().len() / 3;
    assert_eq!(view.per_vertex().len(), n);
    assert!(view.mean_error().is_finite() && view.mean_error() >= 0.0);
    let pck = view.pck_fractions();
    assert_eq!(pck.len(), 26);
    assert!(pck.windows(2).all(|w| w[0] <= w[1]));
}
