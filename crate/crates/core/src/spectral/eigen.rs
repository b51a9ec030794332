use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{row_abs_sum_max, LaplaceOperator, SpectralBasis};
use crate::error::{Error, Result};

/// Largest operator size handled by the dense solver under [`EigenSolver::Auto`].
pub const DENSE_LIMIT: usize = 2000;

const SHIFT_INVERT_TOL: f64 = 1e-11;
const SHIFT_INVERT_MAX_ITER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenSolver {
    /// Dense up to [`DENSE_LIMIT`], shift-invert above.
    #[default]
    Auto,
    Dense,
    /// Shift-invert block subspace iteration on a sparse Cholesky factor.
    ShiftInvert,
}

pub fn eigenbasis(op: &LaplaceOperator, k: usize) -> Result<SpectralBasis> {
    eigenbasis_with(op, k, EigenSolver::Auto)
}

pub fn eigenbasis_with(op: &LaplaceOperator, k: usize, solver: EigenSolver) -> Result<SpectralBasis> {
    let n = op.n();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "basis size k = {k} must satisfy 1 <= k < n = {n}"
        )));
    }
    let dense = match solver {
        EigenSolver::Auto => n <= DENSE_LIMIT,
        EigenSolver::Dense => true,
        EigenSolver::ShiftInvert => false,
    };
    let (mut phi, mut evals) = if dense {
        dense_solve(op, k)
    } else {
        shift_invert_solve(op, k)?
    };
    for l in evals.iter_mut() {
        // roundoff around the kernel
        if *l < 0.0 {
            *l = 0.0;
        }
    }
    fix_signs(&mut phi);
    evals.truncate(k);
    Ok(SpectralBasis {
        phi,
        evals,
        mass: op.mass.clone(),
    })
}

/// Makes the largest-magnitude entry of every column positive
/// (first index wins on ties).
fn fix_signs(phi: &mut DMatrix<f64>) {
    for mut col in phi.column_iter_mut() {
        let mut best = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

fn dense_solve(op: &LaplaceOperator, k: usize) -> (DMatrix<f64>, Vec<f64>) {
    let n = op.n();
    let inv_sqrt: DVector<f64> = op.mass.map(|m| 1.0 / m.sqrt());
    let mut a = op.dense_stiffness();
    for j in 0..n {
        for i in 0..n {
            a[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    // symmetrize roundoff so the solver sees an exactly symmetric matrix
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let mut phi = DMatrix::zeros(n, k);
    let mut evals = Vec::with_capacity(k);
    for (c, &idx) in order.iter().take(k).enumerate() {
        evals.push(eig.eigenvalues[idx]);
        for i in 0..n {
            phi[(i, c)] = eig.eigenvectors[(i, idx)] * inv_sqrt[i];
        }
    }
    (phi, evals)
}

/// Reverse Cuthill-McKee ordering of the sparsity graph.
fn rcm_order(op: &LaplaceOperator) -> Vec<usize> {
    let n = op.n();
    let adj: Vec<Vec<usize>> = op
        .stiffness
        .row_iter()
        .enumerate()
        .map(|(i, r)| r.col_indices().iter().copied().filter(|&j| j != i).collect())
        .collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (adj[i].len(), i));
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut next: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
            next.sort_by_key(|&v| (adj[v].len(), v));
            for v in next {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

/// Cholesky factor of `P (S + σM) Pᵀ` together with the permutation.
struct ShiftedFactor {
    perm: Vec<usize>,
    chol: CscCholesky<f64>,
}

impl ShiftedFactor {
    fn new(op: &LaplaceOperator, shift: f64) -> Result<Self> {
        let n = op.n();
        let perm = rcm_order(op);
        let mut position = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            position[old] = new;
        }
        let mut coo = CooMatrix::new(n, n);
        for (i, j, v) in op.stiffness.triplet_iter() {
            coo.push(position[i], position[j], *v);
        }
        for (i, m) in op.mass.iter().enumerate() {
            coo.push(position[i], position[i], shift * m);
        }
        let chol = CscCholesky::factor(&CscMatrix::from(&coo)).map_err(|e| {
            Error::Singular(format!("shifted stiffness is not positive definite: {e}"))
        })?;
        Ok(Self { perm, chol })
    }

    fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let permuted = rhs.select_rows(&self.perm);
        let sol = self.chol.solve(&permuted);
        let mut out = DMatrix::zeros(rhs.nrows(), rhs.ncols());
        for (new, &old) in self.perm.iter().enumerate() {
            out.row_mut(old).copy_from(&sol.row(new));
        }
        out
    }
}

/// Mass-orthonormalizes the columns of `y` by twice-iterated Gram-Schmidt.
/// Columns that collapse numerically are replaced by fresh random vectors.
fn m_orthonormalize(y: &mut DMatrix<f64>, mass: &DVector<f64>, rng: &mut ChaCha8Rng) {
    let (n, p) = y.shape();
    for j in 0..p {
        for attempt in 0..3 {
            let before = m_norm(&y.column(j).into_owned(), mass);
            for _ in 0..2 {
                for i in 0..j {
                    let qi = y.column(i).into_owned();
                    let proj = qi.component_mul(mass).dot(&y.column(j));
                    let mut cj = y.column_mut(j);
                    cj.axpy(-proj, &qi, 1.0);
                }
            }
            let norm = m_norm(&y.column(j).into_owned(), mass);
            if norm > 1e-10 * before && norm > 0.0 {
                y.column_mut(j).scale_mut(1.0 / norm);
                break;
            }
            let fresh = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
            y.set_column(j, &fresh);
            debug_assert!(attempt < 2, "could not extend the subspace");
        }
    }
}

fn m_norm(v: &DVector<f64>, mass: &DVector<f64>) -> f64 {
    v.component_mul(mass).dot(v).sqrt()
}

fn shift_invert_solve(op: &LaplaceOperator, k: usize) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let n = op.n();
    let p = (2 * k).max(k + 16).min(n);
    let trace_s: f64 = op
        .stiffness
        .triplet_iter()
        .filter(|(i, j, _)| i == j)
        .map(|(_, _, v)| *v)
        .sum();
    let trace_m = op.mass.sum();
    // small against the first nonzero eigenvalue, large enough to keep the
    // shifted operator comfortably positive definite
    let shift = 1e-2 * trace_s / (n as f64 * trace_m);
    let shift = if shift > 0.0 { shift } else { 1e-8 };
    let factor = ShiftedFactor::new(op, shift)?;
    let s_norm = row_abs_sum_max(&op.stiffness).max(f64::MIN_POSITIVE);

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
    m_orthonormalize(&mut x, &op.mass, &mut rng);

    let mut residual = f64::INFINITY;
    for iter in 1..=SHIFT_INVERT_MAX_ITER {
        let mut mx = x.clone();
        for (mut row, m) in mx.row_iter_mut().zip(op.mass.iter()) {
            row *= *m;
        }
        let mut y = factor.solve(&mx);
        m_orthonormalize(&mut y, &op.mass, &mut rng);

        // Rayleigh-Ritz on the stiffness
        let sy = &op.stiffness * &y;
        let h = y.transpose() * &sy;
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let z = DMatrix::from_fn(p, p, |i, j| eig.eigenvectors[(i, order[j])]);
        let theta: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        x = &y * z;

        let sx = &op.stiffness * &x;
        residual = (0..k)
            .map(|j| {
                let col = x.column(j);
                let r = sx.column(j) - col.component_mul(&op.mass) * theta[j];
                r.norm() / (s_norm * col.norm())
            })
            .fold(0.0, f64::max);
        if residual < SHIFT_INVERT_TOL {
            return Ok((x.columns(0, k).into_owned(), theta[..k].to_vec()));
        }
        if iter == SHIFT_INVERT_MAX_ITER {
            break;
        }
    }
    Err(Error::NoConvergence {
        iterations: SHIFT_INVERT_MAX_ITER,
        residual,
        tolerance: SHIFT_INVERT_TOL,
    })
}
