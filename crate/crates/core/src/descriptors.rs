//! Per-vertex feature matrices: heat and wave kernel signatures, raw
//! coordinates, and externally computed features loaded from text files.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::Shape;
use crate::spectral::SpectralBasis;

pub const DEFAULT_HKS_TIMES: usize = 64;
pub const DEFAULT_WKS_ENERGIES: usize = 128;
/// Band width of the WKS filters in units of the log-energy grid step.
pub const WKS_VARIANCE: f64 = 7.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Hks,
    Wks,
    Xyz,
    External,
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hks" => Ok(FeatureKind::Hks),
            "wks" => Ok(FeatureKind::Wks),
            "xyz" => Ok(FeatureKind::Xyz),
            "external" => Ok(FeatureKind::External),
            other => Err(Error::InvalidArgument(format!(
                "unknown descriptor '{other}' (expected hks, wks, xyz or external)"
            ))),
        }
    }
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FeatureKind::Hks => "hks",
            FeatureKind::Wks => "wks",
            FeatureKind::Xyz => "xyz",
            FeatureKind::External => "external",
        })
    }
}

/// n x c matrix of per-vertex features, one row per vertex or point.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: DMatrix<f64>,
    pub kind: FeatureKind,
}

impl FeatureMatrix {
    pub fn new(values: DMatrix<f64>, kind: FeatureKind) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::NonFinite(format!("feature entry ({r}, {c})")));
        }
        Ok(Self { values, kind })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// Zero mean, unit variance per column. Constant columns are only centered.
    pub fn standardized(&self) -> FeatureMatrix {
        let n = self.n() as f64;
        let mut values = self.values.clone();
        for mut col in values.column_iter_mut() {
            let mean = col.sum() / n;
            col.add_scalar_mut(-mean);
            let std = (col.norm_squared() / n).sqrt();
            if std > 0.0 {
                col /= std;
            }
        }
        FeatureMatrix {
            values,
            kind: self.kind,
        }
    }

    /// Text form: one row per line, whitespace-separated decimals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in self.values.row_iter() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Eigenvalues treated as zero: at most `1e-9` of the largest one.
fn positive_spectrum(basis: &SpectralBasis) -> Result<(f64, f64)> {
    let lmax = basis.evals.iter().copied().fold(0.0, f64::max);
    let zero = 1e-9 * lmax;
    if basis.k() < 2 || basis.evals[1] <= zero {
        return Err(Error::InvalidArgument(
            "second eigenvalue is not positive (disconnected shape or k < 2)".into(),
        ));
    }
    let lmin = basis
        .evals
        .iter()
        .copied()
        .find(|&l| l > zero)
        .expect("evals[1] is positive");
    Ok((lmin, lmax))
}

fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Heat kernel signature: column `t` is `Σ_j exp(-λ_j τ_t) Φ_{:,j}²`, with
/// `τ` log-spaced over `[4 ln10 / λ_max, 4 ln10 / λ_min]` where `λ_min` is
/// the smallest positive eigenvalue.
pub fn hks(basis: &SpectralBasis, n_times: usize) -> Result<FeatureMatrix> {
    if n_times == 0 {
        return Err(Error::InvalidArgument("hks needs at least one time".into()));
    }
    let (lmin, lmax) = positive_spectrum(basis)?;
    let c = 4.0 * std::f64::consts::LN_10;
    let times = log_space(c / lmax, c / lmin, n_times);
    let phi_sq = basis.phi.map(|v| v * v);
    let weights = DMatrix::from_fn(basis.k(), n_times, |j, t| (-basis.evals[j] * times[t]).exp());
    FeatureMatrix::new(phi_sq * weights, FeatureKind::Hks)
}

/// Wave kernel signature with Gaussian log-energy bands.
///
/// Energies `e` form a linear grid over `[ln λ_min, ln λ_max]`, the band
/// width is [`WKS_VARIANCE`] grid steps, and every column is divided by its
/// band partition function `Σ_j exp(-(e - ln λ_j)² / 2σ²)`. Zero eigenvalues
/// do not contribute.
pub fn wks(basis: &SpectralBasis, n_energies: usize) -> Result<FeatureMatrix> {
    if n_energies == 0 {
        return Err(Error::InvalidArgument("wks needs at least one energy".into()));
    }
    let (lmin, lmax) = positive_spectrum(basis)?;
    let (emin, emax) = (lmin.ln(), lmax.ln());
    let step = (emax - emin) / (n_energies.max(2) - 1) as f64;
    if step <= 0.0 {
        return Err(Error::InvalidArgument(
            "wks needs at least two distinct positive eigenvalues".into(),
        ));
    }
    let sigma = WKS_VARIANCE * step;
    let zero = 1e-9 * lmax;
    let log_evals: Vec<Option<f64>> = basis
        .evals
        .iter()
        .map(|&l| (l > zero).then(|| l.ln()))
        .collect();

    let mut weights = DMatrix::zeros(basis.k(), n_energies);
    for t in 0..n_energies {
        let e = emin + step * t as f64;
        let mut partition = 0.0;
        for (j, le) in log_evals.iter().enumerate() {
            if let Some(le) = le {
                let w = (-(e - le).powi(2) / (2.0 * sigma * sigma)).exp();
                weights[(j, t)] = w;
                partition += w;
            }
        }
        weights.column_mut(t).scale_mut(1.0 / partition);
    }
    let phi_sq = basis.phi.map(|v| v * v);
    FeatureMatrix::new(phi_sq * weights, FeatureKind::Wks)
}

pub fn xyz_features(shape: &Shape) -> FeatureMatrix {
    let pos = shape.positions();
    FeatureMatrix {
        values: DMatrix::from_fn(pos.len(), 3, |i, j| pos[i][j]),
        kind: FeatureKind::Xyz,
    }
}

pub fn parse_external_features(text: &str, expected_n: usize) -> Result<FeatureMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                let v: f64 = t
                    .parse()
                    .map_err(|_| Error::parse(i + 1, format!("cannot parse feature '{t}'")))?;
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "line {}: feature value '{t}'",
                        i + 1
                    )));
                }
                Ok(v)
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::parse(
                    i + 1,
                    format!("row has {} values, previous rows have {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.len() != expected_n {
        return Err(Error::ShapeMismatch(format!(
            "feature file has {} rows, shape has {expected_n} vertices",
            rows.len()
        )));
    }
    let c = rows.first().map_or(0, Vec::len);
    if c == 0 {
        return Err(Error::InvalidArgument("feature file has no columns".into()));
    }
    Ok(FeatureMatrix {
        values: DMatrix::from_fn(expected_n, c, |i, j| rows[i][j]),
        kind: FeatureKind::External,
    })
}

pub fn load_external_features(path: &Path, expected_n: usize) -> Result<FeatureMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_external_features(&text, expected_n).map_err(|e| e.context(path.display().to_string()))
}
