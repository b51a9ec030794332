//! Independent reference implementations used as test oracles. None of them
//! call into the library's numerical code paths.

#![allow(dead_code)]

use nalgebra::{Complex, DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shapematch::geometry::primitives::{grid, icosphere, tetrahedron};
use shapematch::geometry::TriangleMesh;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

/// All-pairs shortest paths by Bellman-Ford relaxation over the undirected
/// edges read directly from the faces.
pub fn bellman_ford(mesh: &TriangleMesh) -> Vec<Vec<f64>> {
    let n = mesh.n_vertices();
    let v = mesh.vertices();
    let mut edges = Vec::new();
    for f in mesh.faces() {
        for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
            let w = (v[a] - v[b]).norm();
            edges.push((a, b, w));
            edges.push((b, a, w));
        }
    }
    (0..n)
        .map(|s| {
            let mut d = vec![f64::INFINITY; n];
            d[s] = 0.0;
            for _ in 0..n {
                let mut changed = false;
                for &(a, b, w) in &edges {
                    if d[a] + w < d[b] {
                        d[b] = d[a] + w;
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
            }
            d
        })
        .collect()
}

/// Meshes with at most 50 vertices, including a disconnected one.
pub fn small_corpus() -> Vec<TriangleMesh> {
    let two_triangles = TriangleMesh::new(
        vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(5.0, 0.0, 0.0),
            Vector3::new(6.0, 0.0, 0.0),
            Vector3::new(5.0, 1.0, 0.0),
        ],
        vec![[0, 1, 2], [3, 4, 5]],
        "two_triangles",
    )
    .unwrap();
    vec![
        tetrahedron(),
        grid(3, 3, 2.0, 2.0),
        grid(7, 7, 1.0, 1.5),
        icosphere(1),
        shapematch::pipeline::synth::bumpy_plane(6, 5, 3).unwrap(),
        two_triangles,
    ]
}

/// Minimizer of `‖CA - B‖² + λ Σ C_ij² M_ij` as one stacked least-squares
/// problem over all entries of C, solved by SVD.
pub fn fmap_oracle(a: &DMatrix<f64>, b: &DMatrix<f64>, mask: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let (kx, c) = a.shape();
    let ky = b.nrows();
    let unknowns = ky * kx;
    let rows = ky * c + unknowns;
    let mut design = DMatrix::zeros(rows, unknowns);
    let mut target = DVector::zeros(rows);
    for i in 0..ky {
        for t in 0..c {
            let r = i * c + t;
            for j in 0..kx {
                design[(r, i * kx + j)] = a[(j, t)];
            }
            target[r] = b[(i, t)];
        }
    }
    for i in 0..ky {
        for j in 0..kx {
            let u = i * kx + j;
            design[(ky * c + u, u)] = (lambda * mask[(i, j)]).sqrt();
        }
    }
    let svd = design.clone().svd(true, true);
    let mut x = svd.solve(&target, 1e-14).unwrap();
    // the SVD alone is only good to about 1e-9 here; refine on the residual
    for _ in 0..3 {
        x += svd.solve(&(&target - &design * &x), 1e-14).unwrap();
    }
    DMatrix::from_fn(ky, kx, |i, j| x[i * kx + j])
}

/// `|r(λ̄_i^y) - r(λ̄_j^x)|²` with complex arithmetic.
pub fn resolvent_oracle(evals_x: &[f64], evals_y: &[f64], gamma: f64) -> DMatrix<f64> {
    let max = evals_x.iter().chain(evals_y).fold(0.0f64, |m, &l| m.max(l));
    let r = |l: f64| Complex::new(1.0, 0.0) / Complex::new(l / max, gamma);
    DMatrix::from_fn(evals_y.len(), evals_x.len(), |i, j| {
        (r(evals_y[i]) - r(evals_x[j])).norm_sqr()
    })
}

/// Plain-exponential Sinkhorn: rows, then columns, ending on rows.
pub fn sinkhorn_oracle(sim: &DMatrix<f64>, iterations: usize, temperature: f64) -> DMatrix<f64> {
    let (n, m) = sim.shape();
    let mut k = sim.map(|s| (s / temperature).exp());
    let (row_target, col_target) = (n.min(m) as f64 / n as f64, n.min(m) as f64 / m as f64);
    let normalize_rows = |k: &mut DMatrix<f64>| {
        for i in 0..n {
            let s: f64 = (0..m).map(|j| k[(i, j)]).sum();
            for j in 0..m {
                k[(i, j)] *= row_target / s;
            }
        }
    };
    for _ in 0..iterations {
        normalize_rows(&mut k);
        for j in 0..m {
            let s: f64 = (0..n).map(|i| k[(i, j)]).sum();
            for i in 0..n {
                k[(i, j)] *= col_target / s;
            }
        }
    }
    normalize_rows(&mut k);
    k
}

pub fn softmax(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

pub fn frobenius_sq(m: &DMatrix<f64>) -> f64 {
    let mut s = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            s += m[(i, j)] * m[(i, j)];
        }
    }
    s
}

/// Matrix product by explicit loops.
pub fn matmul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), b.ncols(), |i, j| {
        (0..a.ncols()).map(|t| a[(i, t)] * b[(t, j)]).sum()
    })
}

pub fn e_nce_oracle(f: &DMatrix<f64>, f_hat: &DMatrix<f64>, tau: f64) -> f64 {
    let n = f.nrows();
    let dot = |i: usize, j: usize| (0..f.ncols()).map(|t| f[(i, t)] * f_hat[(j, t)]).sum::<f64>();
    (0..n)
        .map(|i| {
            let denom: f64 = (0..n).map(|j| (dot(i, j) / tau).exp()).sum();
            -((dot(i, i) / tau).exp() / denom).ln()
        })
        .sum()
}

/// Direct evaluation of the WKS definition for a tiny basis.
pub fn wks_oracle(phi: &DMatrix<f64>, evals: &[f64], n_energies: usize, variance: f64) -> DMatrix<f64> {
    let logs: Vec<(usize, f64)> = evals
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > 1e-12)
        .map(|(j, &l)| (j, l.ln()))
        .collect();
    let emin = logs.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let emax = logs.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let step = (emax - emin) / (n_energies.max(2) - 1) as f64;
    let sigma = variance * step;
    DMatrix::from_fn(phi.nrows(), n_energies, |x, t| {
        let e = emin + step * t as f64;
        let g = |le: f64| (-(e - le) * (e - le) / (2.0 * sigma * sigma)).exp();
        let num: f64 = logs.iter().map(|&(j, le)| g(le) * phi[(x, j)].powi(2)).sum();
        let den: f64 = logs.iter().map(|&(_, le)| g(le)).sum();
        num / den
    })
}
