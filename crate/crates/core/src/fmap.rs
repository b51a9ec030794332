//! Regularized functional maps and their conversion to and from point maps.
//!
//! A functional map `C_xy` (k_y x k_x) transports spectral coefficients on
//! the source `X` to coefficients on the target `Y`. It is estimated from
//! descriptor coefficients `A = Φ_x† F_x`, `B = Φ_y† F_y` by minimizing
//! `‖CA - B‖² + λ Σ_ij C_ij² M_ij` with the resolvent mask `M`. The penalty
//! is elementwise, so every row of `C` is an independent ridge problem.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::descriptors::FeatureMatrix;
use crate::error::{Error, Result};
use crate::spectral::SpectralBasis;

pub const DEFAULT_LAMBDA: f64 = 100.0;
pub const DEFAULT_GAMMA: f64 = 0.5;

/// Spectral coefficients of both descriptor sets plus the eigenvalues.
#[derive(Debug, Clone)]
pub struct FmapProblem {
    /// k_x x c
    pub a: DMatrix<f64>,
    /// k_y x c
    pub b: DMatrix<f64>,
    pub evals_x: Vec<f64>,
    pub evals_y: Vec<f64>,
    pub lambda_reg: f64,
}

impl FmapProblem {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        evals_x: Vec<f64>,
        evals_y: Vec<f64>,
        lambda_reg: f64,
    ) -> Result<Self> {
        if a.ncols() != b.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "descriptor dimensions differ: {} vs {}",
                a.ncols(),
                b.ncols()
            )));
        }
        if a.nrows() != evals_x.len() || b.nrows() != evals_y.len() {
            return Err(Error::ShapeMismatch(
                "coefficient rows must match the eigenvalue counts".into(),
            ));
        }
        if !(lambda_reg >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be >= 0, got {lambda_reg}"
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("spectral descriptor coefficients".into()));
        }
        Ok(Self {
            a,
            b,
            evals_x,
            evals_y,
            lambda_reg,
        })
    }

    /// Projects features onto both bases.
    pub fn from_features(
        basis_x: &SpectralBasis,
        basis_y: &SpectralBasis,
        f_x: &FeatureMatrix,
        f_y: &FeatureMatrix,
        lambda_reg: f64,
    ) -> Result<Self> {
        if f_x.n() != basis_x.n() || f_y.n() != basis_y.n() {
            return Err(Error::ShapeMismatch(
                "feature rows must match the basis vertex counts".into(),
            ));
        }
        Self::new(
            basis_x.project(&f_x.values),
            basis_y.project(&f_y.values),
            basis_x.evals.clone(),
            basis_y.evals.clone(),
            lambda_reg,
        )
    }

    pub fn k_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn k_y(&self) -> usize {
        self.b.nrows()
    }

    /// `‖CA - B‖² + λ Σ C_ij² M_ij`
    pub fn objective(&self, c: &DMatrix<f64>, mask: &DMatrix<f64>) -> f64 {
        let data = (c * &self.a - &self.b).norm_squared();
        let reg: f64 = c.iter().zip(mask.iter()).map(|(c, m)| c * c * m).sum();
        data + self.lambda_reg * reg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalMap {
    /// k_y x k_x
    pub c: DMatrix<f64>,
    pub source_id: String,
    pub target_id: String,
}

impl FunctionalMap {
    pub fn new(c: DMatrix<f64>) -> Self {
        Self {
            c,
            source_id: String::new(),
            target_id: String::new(),
        }
    }

    pub fn with_ids(mut self, source: &str, target: &str) -> Self {
        self.source_id = source.to_string();
        self.target_id = target.to_string();
        self
    }

    /// Header `k_y k_x`, then one row per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.c.nrows(), self.c.ncols());
        for row in self.c.row_iter() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (ln, header) = lines.next().ok_or_else(|| Error::parse(1, "empty functional map"))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::parse(ln + 1, "bad header")))
            .collect::<Result<_>>()?;
        let [rows, cols] = dims[..] else {
            return Err(Error::parse(ln + 1, "header must be 'k_y k_x'"));
        };
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| Error::parse(ln + 1, format!("expected {rows} rows")))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::parse(ln + 1, format!("bad entry '{t}'")))
                })
                .collect::<Result<_>>()?;
            if row.len() != cols {
                return Err(Error::parse(ln + 1, format!("expected {cols} entries")));
            }
            values.extend(row);
        }
        Ok(Self::new(DMatrix::from_row_slice(rows, cols, &values)))
    }
}

/// Hard correspondence: `assignment[i]` is the index, on the other shape,
/// matched to element `i` of this shape. All indices are `< range`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointMap {
    pub assignment: Vec<usize>,
    pub range: usize,
}

impl PointMap {
    pub fn new(assignment: Vec<usize>, range: usize) -> Result<Self> {
        if let Some((i, &bad)) = assignment.iter().enumerate().find(|(_, &a)| a >= range) {
            return Err(Error::InvalidArgument(format!(
                "point map entry {i} = {bad} is out of range {range}"
            )));
        }
        Ok(Self { assignment, range })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            assignment: (0..n).collect(),
            range: n,
        }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// One index per line.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.len() * 6);
        for a in &self.assignment {
            let _ = writeln!(out, "{a}");
        }
        out
    }

    pub fn from_text(text: &str, range: usize) -> Result<Self> {
        let assignment = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::parse(i + 1, format!("bad index '{}'", l.trim())))
            })
            .collect::<Result<_>>()?;
        Self::new(assignment, range)
    }

    pub fn load(path: &Path, range: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, range).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Resolvent penalty `M_ij = |r(λ̄ʸ_i) - r(λ̄ˣ_j)|²` with `r(λ) = 1 / (λ + iγ)`,
/// after dividing both spectra by their common maximum.
pub fn resolvent_mask(evals_x: &[f64], evals_y: &[f64], gamma: f64) -> Result<DMatrix<f64>> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!("gamma must be > 0, got {gamma}")));
    }
    if evals_x.iter().chain(evals_y).any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(Error::InvalidArgument("eigenvalues must be finite and >= 0".into()));
    }
    let max = evals_x.iter().chain(evals_y).copied().fold(0.0, f64::max);
    let scale = if max > 0.0 { 1.0 / max } else { 1.0 };
    // 1 / (λ + iγ) = (λ - iγ) / (λ² + γ²)
    let resolvent = |l: f64| {
        let l = l * scale;
        let d = l * l + gamma * gamma;
        (l / d, -gamma / d)
    };
    let rx: Vec<(f64, f64)> = evals_x.iter().map(|&l| resolvent(l)).collect();
    let ry: Vec<(f64, f64)> = evals_y.iter().map(|&l| resolvent(l)).collect();
    Ok(DMatrix::from_fn(evals_y.len(), evals_x.len(), |i, j| {
        (ry[i].0 - rx[j].0).powi(2) + (ry[i].1 - rx[j].1).powi(2)
    }))
}

/// Row `i` of `C` solves `(AAᵀ + λ diag(M_i,:)) c_i = A B_i,:ᵀ`.
pub fn solve_fmap(problem: &FmapProblem, mask: &DMatrix<f64>) -> Result<FunctionalMap> {
    let (kx, ky) = (problem.k_x(), problem.k_y());
    if mask.shape() != (ky, kx) {
        return Err(Error::ShapeMismatch(format!(
            "mask is {:?}, expected ({ky}, {kx})",
            mask.shape()
        )));
    }
    let gram = &problem.a * problem.a.transpose();
    let rhs = &problem.a * problem.b.transpose();
    let mut c = DMatrix::zeros(ky, kx);
    for i in 0..ky {
        let mut system = gram.clone();
        for j in 0..kx {
            system[(j, j)] += problem.lambda_reg * mask[(i, j)];
        }
        let scale = system.diagonal().amax();
        let chol = Cholesky::new(system).filter(|ch| {
            let d = ch.l_dirty().diagonal();
            d.min() > 1e-7 * d.max()
        });
        let Some(chol) = chol.filter(|_| scale > 0.0) else {
            return Err(Error::Singular(format!(
                "normal equations for row {i} are singular; use lambda > 0 or richer descriptors"
            )));
        };
        let row: DVector<f64> = chol.solve(&rhs.column(i));
        c.row_mut(i).copy_from(&row.transpose());
    }
    Ok(FunctionalMap::new(c))
}

/// Nearest-neighbour recovery of `Π_yx` from `Φ_y C_xy ≈ Π_yx Φ_x`.
///
/// Entry `j` of the result is the source vertex whose spectral embedding is
/// closest to row `j` of `Φ_y C_xy`; ties go to the smallest index.
pub fn fmap_to_pointmap(
    c_xy: &FunctionalMap,
    basis_x: &SpectralBasis,
    basis_y: &SpectralBasis,
) -> Result<PointMap> {
    let (ky, kx) = c_xy.c.shape();
    if ky > basis_y.k() || kx > basis_x.k() {
        return Err(Error::ShapeMismatch(format!(
            "map is {ky}x{kx} but bases have k_y = {}, k_x = {}",
            basis_y.k(),
            basis_x.k()
        )));
    }
    let emb_y = basis_y.phi.columns(0, ky) * &c_xy.c;
    let emb_x = basis_x.phi.columns(0, kx).into_owned();
    Ok(PointMap {
        assignment: nearest_rows(&emb_y, &emb_x),
        range: basis_x.n(),
    })
}

/// For each row of `queries`, the index of the closest row of `points`.
pub(crate) fn nearest_rows(queries: &DMatrix<f64>, points: &DMatrix<f64>) -> Vec<usize> {
    let pts = points.transpose();
    let qs = queries.transpose();
    qs.column_iter()
        .map(|q| {
            let mut best = (f64::INFINITY, 0);
            for (i, p) in pts.column_iter().enumerate() {
                let d = (p - q).norm_squared();
                if d < best.0 {
                    best = (d, i);
                }
            }
            best.1
        })
        .collect()
}

/// Least-squares functional map `C_xy = Φ_y† Π_yx Φ_x` of a point map that
/// sends every target vertex `j` to source vertex `pi[j]`.
pub fn pointmap_to_fmap(
    pi: &PointMap,
    basis_x: &SpectralBasis,
    basis_y: &SpectralBasis,
) -> Result<FunctionalMap> {
    if pi.len() != basis_y.n() || pi.range != basis_x.n() {
        return Err(Error::ShapeMismatch(format!(
            "point map covers {} -> {} vertices, bases have {} and {}",
            pi.len(),
            pi.range,
            basis_y.n(),
            basis_x.n()
        )));
    }
    let pulled = basis_x.phi.select_rows(&pi.assignment);
    Ok(FunctionalMap::new(basis_y.project(&pulled)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_diagonal_vanishes_for_equal_spectra() {
        let ev = [0.0, 0.3, 1.2, 4.0];
        let m = resolvent_mask(&ev, &ev, 0.5).unwrap();
        for i in 0..4 {
            assert_eq!(m[(i, i)], 0.0);
        }
        assert!(m.iter().all(|v| *v >= 0.0));
        let toy = resolvent_mask(&[0.0, 1.0], &[0.0, 1.0], 0.5).unwrap();
        assert_eq!(toy[(0, 1)], toy[(1, 0)]);
        assert!(toy[(0, 1)] > 0.0);
        assert!(resolvent_mask(&ev, &ev, 0.0).is_err());
    }

    #[test]
    fn identity_when_descriptors_coincide() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, -1.0, 3.0, 0.2, 0.3, 0.4, 1.5]);
        let ev = vec![0.0, 1.0, 2.0];
        let p = FmapProblem::new(a.clone(), a, ev.clone(), ev.clone(), 0.0).unwrap();
        let mask = resolvent_mask(&ev, &ev, 0.5).unwrap();
        let c = solve_fmap(&p, &mask).unwrap().c;
        assert!((c - DMatrix::<f64>::identity(3, 3)).amax() < 1e-8);
    }

    #[test]
    fn rank_deficient_without_regularization_is_singular() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let ev = vec![0.0, 1.0];
        let p = FmapProblem::new(a.clone(), a, ev.clone(), ev.clone(), 0.0).unwrap();
        let mask = resolvent_mask(&ev, &ev, 0.5).unwrap();
        assert!(matches!(solve_fmap(&p, &mask), Err(Error::Singular(_))));
    }

    #[test]
    fn text_round_trips() {
        let fm = FunctionalMap::new(DMatrix::from_row_slice(2, 3, &[1.0, -0.5, 1e-300, 0.1, 2.0, 3.0]));
        assert_eq!(FunctionalMap::from_text(&fm.to_text()).unwrap().c, fm.c);
        let pm = PointMap::new(vec![2, 0, 1], 3).unwrap();
        assert_eq!(PointMap::from_text(&pm.to_text(), 3).unwrap(), pm);
        assert!(PointMap::from_text("0\n3\n", 3).is_err());
    }
}
