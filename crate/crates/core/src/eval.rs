//! Correspondence quality: geodesic errors normalized by `√area`, PCK curves
//! and benchmark-style aggregation (mean error x 100).

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fmap::PointMap;
use crate::geometry::{geodesic_distances, surface_area, GeodesicTable, TriangleMesh};

/// Thresholds `0.00, 0.01, ..., 0.25` used when none are given.
pub fn default_thresholds() -> Vec<f64> {
    (0..=25).map(|i| i as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicErrors {
    /// Normalized error per mapped element; `None` where prediction and
    /// ground truth lie on different connected components.
    pub per_vertex: Vec<Option<f64>>,
    pub skipped: usize,
}

impl GeodesicErrors {
    pub fn scored(&self) -> Vec<f64> {
        self.per_vertex.iter().flatten().copied().collect()
    }
}

/// `error_j = d_geo(pred[j], gt[j]) / √area(mesh)`, where `mesh` is the
/// shape both maps index into.
pub fn geodesic_error(pred: &PointMap, gt: &PointMap, mesh: &TriangleMesh) -> Result<GeodesicErrors> {
    if pred.len() != gt.len() {
        return Err(Error::ShapeMismatch(format!(
            "prediction has {} entries, ground truth {}",
            pred.len(),
            gt.len()
        )));
    }
    let n = mesh.n_vertices();
    if pred.range != n || gt.range != n {
        return Err(Error::ShapeMismatch(format!(
            "maps index {} / {} vertices but the mesh has {n}",
            pred.range, gt.range
        )));
    }
    let norm = surface_area(mesh).sqrt();
    if !(norm > 0.0) {
        return Err(Error::InvalidShape("mesh has zero area".into()));
    }
    let mut tables: HashMap<usize, GeodesicTable> = HashMap::new();
    let mut per_vertex = Vec::with_capacity(pred.len());
    let mut skipped = 0;
    for (&p, &g) in pred.assignment.iter().zip(&gt.assignment) {
        if p == g {
            per_vertex.push(Some(0.0));
            continue;
        }
        let table = match tables.entry(g) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => e.insert(geodesic_distances(mesh, g)?),
        };
        let d = table.distance_to(p);
        if d.is_finite() {
            per_vertex.push(Some(d / norm));
        } else {
            skipped += 1;
            per_vertex.push(None);
        }
    }
    Ok(GeodesicErrors {
        per_vertex,
        skipped,
    })
}

/// Fraction of errors `<= t` for each threshold.
pub fn pck_curve(errors: &[f64], thresholds: &[f64]) -> Result<Vec<(f64, f64)>> {
    if thresholds.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("PCK thresholds must be ascending".into()));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len().max(1) as f64;
    Ok(thresholds
        .iter()
        .map(|&t| {
            let count = sorted.partition_point(|&e| e <= t);
            (t, if sorted.is_empty() { 0.0 } else { count as f64 / n })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchReport {
    pub pair_id: String,
    pub errors: Vec<f64>,
    pub mean_error: f64,
    pub pck: Vec<(f64, f64)>,
    pub skipped_count: usize,
}

impl MatchReport {
    pub fn new(pair_id: impl Into<String>, errors: &GeodesicErrors, thresholds: &[f64]) -> Result<Self> {
        let scored = errors.scored();
        let mean_error = if scored.is_empty() {
            f64::NAN
        } else {
            scored.iter().sum::<f64>() / scored.len() as f64
        };
        Ok(Self {
            pair_id: pair_id.into(),
            pck: pck_curve(&scored, thresholds)?,
            errors: scored,
            mean_error,
            skipped_count: errors.skipped,
        })
    }

    pub fn evaluate(pair_id: impl Into<String>, pred: &PointMap, gt: &PointMap, mesh: &TriangleMesh) -> Result<Self> {
        Self::new(pair_id, &geodesic_error(pred, gt, mesh)?, &default_thresholds())
    }

    /// Human-readable record.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[pair {}]", self.pair_id);
        let _ = writeln!(out, "scored = {}", self.errors.len());
        let _ = writeln!(out, "skipped = {}", self.skipped_count);
        let _ = writeln!(out, "mean_error = {}", self.mean_error);
        let _ = writeln!(out, "mean_error_x100 = {}", self.mean_error * 100.0);
        for (t, f) in &self.pck {
            let _ = writeln!(out, "pck {t} {f}");
        }
        out
    }
}

/// Mean of the per-pair mean errors, times 100.
pub fn aggregate(reports: &[MatchReport]) -> Result<f64> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("cannot aggregate zero reports".into()));
    }
    Ok(100.0 * reports.iter().map(|r| r.mean_error).sum::<f64>() / reports.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;

    #[test]
    fn identity_has_zero_error() {
        let mesh = primitives::icosphere(1);
        let id = PointMap::identity(mesh.n_vertices());
        let rep = MatchReport::evaluate("self", &id, &id, &mesh).unwrap();
        assert_eq!(rep.mean_error, 0.0);
        assert!(rep.pck.iter().all(|(_, f)| *f == 1.0));
    }

    #[test]
    fn single_neighbour_error() {
        let mesh = primitives::grid(3, 3, 2.0, 2.0);
        let gt = PointMap::identity(9);
        let mut pred = gt.clone();
        pred.assignment[4] = 5;
        let errs = geodesic_error(&pred, &gt, &mesh).unwrap();
        let expected = 1.0 / 4f64.sqrt();
        for (j, e) in errs.per_vertex.iter().enumerate() {
            let e = e.unwrap();
            if j == 4 {
                assert!((e - expected).abs() < 1e-15);
            } else {
                assert_eq!(e, 0.0);
            }
        }
    }

    #[test]
    fn pck_counts() {
        assert_eq!(pck_curve(&[0.0, 0.0], &[0.0, 0.1]).unwrap(), vec![(0.0, 1.0), (0.1, 1.0)]);
        assert_eq!(
            pck_curve(&[0.0, 0.1], &[0.05, 0.2]).unwrap(),
            vec![(0.05, 0.5), (0.2, 1.0)]
        );
        assert!(pck_curve(&[0.1], &[0.2, 0.1]).is_err());
    }

    #[test]
    fn aggregation_uses_percent() {
        let rep = |m: f64| MatchReport {
            pair_id: String::new(),
            errors: vec![m],
            mean_error: m,
            pck: vec![],
            skipped_count: 0,
        };
        assert!((aggregate(&[rep(0.02)]).unwrap() - 2.0).abs() < 1e-12);
        assert!((aggregate(&[rep(0.02), rep(0.04)]).unwrap() - 3.0).abs() < 1e-12);
        assert!(aggregate(&[]).is_err());
    }
}
