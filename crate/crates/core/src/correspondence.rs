//! Soft correspondences from descriptor similarity.
//!
//! Complete shapes use log-domain Sinkhorn normalization, partial shapes a
//! column-wise softmax. Both are quantized to hard maps by argmax.

use nalgebra::{DMatrix, Dim, Matrix, RawStorage};

use crate::descriptors::FeatureMatrix;
use crate::error::{Error, Result};
use crate::fmap::PointMap;

pub const DEFAULT_SINKHORN_ITERATIONS: usize = 10;
pub const DEFAULT_TEMPERATURE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    Sinkhorn,
    ColumnSoftmax,
}

/// Relaxed (partial) permutation matrix `Π̂_xy`, n_x x n_y.
#[derive(Debug, Clone)]
pub struct SoftCorrespondence {
    pub pi: DMatrix<f64>,
    pub normalization: Normalization,
    pub temperature: f64,
    pub iterations: usize,
}

/// Dot products between every row of `f_x` and every row of `f_y`.
pub fn similarity(f_x: &FeatureMatrix, f_y: &FeatureMatrix) -> Result<DMatrix<f64>> {
    if f_x.dim() != f_y.dim() {
        return Err(Error::ShapeMismatch(format!(
            "feature dimensions differ: {} vs {}",
            f_x.dim(),
            f_y.dim()
        )));
    }
    Ok(&f_x.values * f_y.values.transpose())
}

fn check_inputs(sim: &DMatrix<f64>, temperature: f64) -> Result<()> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "temperature must be > 0, got {temperature}"
        )));
    }
    if sim.is_empty() {
        return Err(Error::InvalidArgument("empty similarity matrix".into()));
    }
    if sim.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("similarity matrix".into()));
    }
    Ok(())
}

pub(crate) fn log_sum_exp<R: Dim, C: Dim, S: RawStorage<f64, R, C>>(values: &Matrix<f64, R, C, S>) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

// Column-major storage: accumulate per-row maxima and sums column by column.
fn normalize_rows(log_k: &mut DMatrix<f64>, log_target: f64) {
    let mut max = vec![f64::NEG_INFINITY; log_k.nrows()];
    for col in log_k.column_iter() {
        for (m, &v) in max.iter_mut().zip(col.iter()) {
            *m = m.max(v);
        }
    }
    let mut sum = vec![0.0; log_k.nrows()];
    for col in log_k.column_iter() {
        for ((s, &m), &v) in sum.iter_mut().zip(&max).zip(col.iter()) {
            *s += (v - m).exp();
        }
    }
    let shift: Vec<f64> = max
        .iter()
        .zip(&sum)
        .map(|(&m, &s)| if m == f64::NEG_INFINITY { 0.0 } else { log_target - m - s.ln() })
        .collect();
    for mut col in log_k.column_iter_mut() {
        for (v, &d) in col.iter_mut().zip(&shift) {
            *v += d;
        }
    }
}

fn normalize_columns(log_k: &mut DMatrix<f64>, log_target: f64) {
    for mut col in log_k.column_iter_mut() {
        let lse = log_sum_exp(&col);
        col.add_scalar_mut(log_target - lse);
    }
}

fn finish(log_k: DMatrix<f64>, normalization: Normalization, temperature: f64, iterations: usize) -> Result<SoftCorrespondence> {
    let pi = log_k.map(f64::exp);
    if pi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("soft correspondence overflowed".into()));
    }
    Ok(SoftCorrespondence {
        pi,
        normalization,
        temperature,
        iterations,
    })
}

/// Sinkhorn normalization of `exp(sim / temperature)` in the log domain.
///
/// Each iteration normalizes rows then columns; a final row normalization
/// follows, so rows are exactly stochastic. For an n_x x n_y input the row
/// sums target `min(n_x, n_y) / n_x` and the column sums
/// `min(n_x, n_y) / n_y`, i.e. both are 1 for square inputs.
pub fn sinkhorn(sim: &DMatrix<f64>, iterations: usize, temperature: f64) -> Result<SoftCorrespondence> {
    check_inputs(sim, temperature)?;
    if iterations == 0 {
        return Err(Error::InvalidArgument("sinkhorn needs at least one iteration".into()));
    }
    let (nx, ny) = sim.shape();
    let mass = nx.min(ny) as f64;
    let (row_target, col_target) = ((mass / nx as f64).ln(), (mass / ny as f64).ln());
    let mut log_k = sim / temperature;
    for _ in 0..iterations {
        normalize_rows(&mut log_k, row_target);
        normalize_columns(&mut log_k, col_target);
    }
    normalize_rows(&mut log_k, row_target);
    finish(log_k, Normalization::Sinkhorn, temperature, iterations)
}

/// Column-first variant, used to check that the normalization order does not
/// change quantized results. Ends on a column normalization.
pub fn sinkhorn_column_first(sim: &DMatrix<f64>, iterations: usize, temperature: f64) -> Result<SoftCorrespondence> {
    let transposed = sinkhorn(&sim.transpose(), iterations, temperature)?;
    Ok(SoftCorrespondence {
        pi: transposed.pi.transpose(),
        ..transposed
    })
}

/// Softmax of every column of `sim / temperature`.
pub fn column_softmax(sim: &DMatrix<f64>, temperature: f64) -> Result<SoftCorrespondence> {
    check_inputs(sim, temperature)?;
    let mut log_k = sim / temperature;
    normalize_columns(&mut log_k, 0.0);
    finish(log_k, Normalization::ColumnSoftmax, temperature, 1)
}

fn argmax<'a>(values: impl Iterator<Item = &'a f64>) -> usize {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, &v) in values.enumerate() {
        if v > best.0 {
            best = (v, i);
        }
    }
    best.1
}

/// Hard map by argmax with ties going to the smallest index.
///
/// Sinkhorn output is quantized per row (each `x` gets a `y`); column
/// softmax output per column (each partial-shape `y` gets an `x`).
pub fn quantize(soft: &SoftCorrespondence) -> PointMap {
    let (nx, ny) = soft.pi.shape();
    match soft.normalization {
        Normalization::Sinkhorn => PointMap {
            assignment: soft.pi.row_iter().map(|r| argmax(r.iter())).collect(),
            range: ny,
        },
        Normalization::ColumnSoftmax => PointMap {
            assignment: soft.pi.column_iter().map(|c| argmax(c.iter())).collect(),
            range: nx,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptors::FeatureKind;

    #[test]
    fn orthonormal_rows_give_identity_similarity() {
        let f = FeatureMatrix::new(DMatrix::identity(3, 3), FeatureKind::External).unwrap();
        assert_eq!(similarity(&f, &f).unwrap(), DMatrix::identity(3, 3));
        let g = FeatureMatrix::new(DMatrix::identity(3, 3) * 2.0, FeatureKind::External).unwrap();
        assert_eq!(similarity(&f, &g).unwrap(), DMatrix::identity(3, 3) * 2.0);
        let h = FeatureMatrix::new(DMatrix::identity(3, 2), FeatureKind::External).unwrap();
        assert!(similarity(&f, &h).is_err());
    }

    #[test]
    fn zero_similarity_is_uniform() {
        let soft = sinkhorn(&DMatrix::zeros(4, 4), 10, 0.2).unwrap();
        assert!(soft.pi.iter().all(|v| (v - 0.25).abs() < 1e-9));
    }

    #[test]
    fn dominant_diagonal_is_near_identity() {
        let soft = sinkhorn(&(DMatrix::identity(3, 3) * 10.0), 10, 0.2).unwrap();
        assert!((soft.pi - DMatrix::<f64>::identity(3, 3)).amax() < 1e-3);
    }

    #[test]
    fn rectangular_marginals() {
        let sim = DMatrix::from_fn(3, 5, |i, j| ((i * 7 + j * 3) % 5) as f64 * 0.1);
        let soft = sinkhorn(&sim, 50, 0.2).unwrap();
        for r in soft.pi.row_iter() {
            assert!((r.sum() - 1.0).abs() < 1e-12);
        }
        for c in soft.pi.column_iter() {
            assert!((c.sum() - 0.6).abs() < 1e-6);
        }
    }

    #[test]
    fn stable_for_large_ratios() {
        let sim = DMatrix::from_fn(4, 4, |i, j| if i == j { 2000.0 } else { -2000.0 });
        let soft = sinkhorn(&sim, 10, 0.2).unwrap();
        assert!(soft.pi.iter().all(|v| v.is_finite()));
        let bad = DMatrix::from_element(2, 2, f64::NAN);
        assert!(matches!(sinkhorn(&bad, 10, 0.2), Err(Error::NonFinite(_))));
        assert!(sinkhorn(&sim, 10, 0.0).is_err());
    }

    #[test]
    fn column_softmax_columns_sum_to_one() {
        let sim = DMatrix::from_column_slice(3, 1, &[0.1, 0.5, -0.2]);
        let soft = column_softmax(&sim, 0.2).unwrap();
        assert!((soft.pi.sum() - 1.0).abs() < 1e-12);
        let hot = column_softmax(&sim, 1e9).unwrap();
        assert!(hot.pi.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-8));
    }

    #[test]
    fn quantize_rules() {
        let soft = |pi: DMatrix<f64>| SoftCorrespondence {
            pi,
            normalization: Normalization::Sinkhorn,
            temperature: 0.2,
            iterations: 10,
        };
        assert_eq!(quantize(&soft(DMatrix::identity(3, 3))).assignment, vec![0, 1, 2]);
        let row = DMatrix::from_row_slice(1, 3, &[0.2, 0.5, 0.3]);
        assert_eq!(quantize(&soft(row)).assignment, vec![1]);
        let tie = DMatrix::from_row_slice(1, 2, &[0.5, 0.5]);
        assert_eq!(quantize(&soft(tie)).assignment, vec![0]);

        let mut cs = soft(DMatrix::from_row_slice(2, 3, &[0.9, 0.2, 0.5, 0.1, 0.8, 0.5]));
        cs.normalization = Normalization::ColumnSoftmax;
        let q = quantize(&cs);
        assert_eq!((q.assignment, q.range), (vec![0, 1, 0], 2));
    }
}
