//! Symmetric positive definite linear solves: a profile (skyline) Cholesky
//! under reverse Cuthill-McKee ordering, and diagonally preconditioned CG for
//! systems too large to factor.

use std::collections::VecDeque;

use thiserror::Error;

use crate::sparse::{dot, norm2, CsrMatrix};

/// Above this many unknowns the solver switches from factorization to CG.
pub const DIRECT_LIMIT: usize = 20_000;
/// Relative residual target for the CG path.
pub const CG_TOLERANCE: f64 = 1e-11;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearSolveError {
    #[error("matrix is not positive definite: pivot {pivot} of row {row}")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("conjugate gradient stalled after {} iterations (last relative residual {:e})", .history.len(), .history.last().copied().unwrap_or(f64::NAN))]
    NoConvergence { history: Vec<f64> },
    #[error("dimension mismatch: matrix {rows}x{cols}, rhs {rhs}")]
    Dimension { rows: usize, cols: usize, rhs: usize },
}

/// Reverse Cuthill-McKee ordering; `perm[new] = old`.
pub fn rcm_ordering(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let adj: Vec<Vec<usize>> = (0..n).map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect()).collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let start = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| (degree[i], i)).unwrap();
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Profile Cholesky factor `P A Pᵀ = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct SkylineCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

impl SkylineCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self, LinearSolveError> {
        let n = a.nrows();
        let perm = rcm_ordering(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        // lower profile of the permuted matrix
        let mut first: Vec<usize> = (0..n).collect();
        for old_i in 0..n {
            let i = inv[old_i];
            for (old_j, _) in a.row(old_i) {
                let j = inv[old_j];
                if j < i {
                    first[i] = first[i].min(j);
                }
            }
        }
        let mut rows: Vec<Vec<f64>> = (0..n).map(|i| vec![0.0; i - first[i] + 1]).collect();
        for old_i in 0..n {
            let i = inv[old_i];
            for (old_j, v) in a.row(old_i) {
                let j = inv[old_j];
                if j <= i {
                    rows[i][j - first[i]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let lo = fi.max(fj);
                let mut s = rows[i][j - fi];
                for k in lo..j {
                    s -= rows[i][k - fi] * rows[j][k - fj];
                }
                if j < i {
                    rows[i][j - fi] = s / rows[j][j - fj];
                } else {
                    if !(s > 0.0) {
                        return Err(LinearSolveError::NotPositiveDefinite { row: perm[i], pivot: s });
                    }
                    rows[i][i - fi] = s.sqrt();
                }
            }
        }
        Ok(SkylineCholesky { perm, first, rows })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.rows[i];
            let mut s = y[i];
            for k in fi..i {
                s -= row[k - fi] * y[k];
            }
            y[i] = s / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.rows[i];
            y[i] /= row[i - fi];
            let xi = y[i];
            for k in fi..i {
                y[k] -= row[k - fi] * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

/// Jacobi-preconditioned conjugate gradient.
pub fn pcg(a: &CsrMatrix, b: &[f64], tol: f64, max_iters: usize) -> Result<(Vec<f64>, Vec<f64>), LinearSolveError> {
    let n = a.nrows();
    let diag = a.diagonal();
    if let Some((row, &pivot)) = diag.iter().enumerate().find(|(_, d)| !(**d > 0.0)) {
        return Err(LinearSolveError::NotPositiveDefinite { row, pivot });
    }
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    let mut history = Vec::new();
    if bnorm == 0.0 {
        return Ok((x, history));
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..max_iters {
        let ap = a.mul_vec(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(LinearSolveError::NotPositiveDefinite { row: 0, pivot: pap });
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let rel = norm2(&r) / bnorm;
        history.push(rel);
        if rel <= tol {
            return Ok((x, history));
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(LinearSolveError::NoConvergence { history })
}

/// Factor-once SPD solver choosing the direct or iterative path by size.
#[derive(Clone, Debug)]
pub enum SpdSolver {
    Direct { matrix: CsrMatrix, factor: SkylineCholesky },
    Iterative { matrix: CsrMatrix },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveStats {
    pub relative_residual: f64,
    pub iterations: usize,
}

impl SpdSolver {
    pub fn new(matrix: CsrMatrix) -> Result<Self, LinearSolveError> {
        Self::with_limit(matrix, DIRECT_LIMIT)
    }

    pub fn with_limit(matrix: CsrMatrix, direct_limit: usize) -> Result<Self, LinearSolveError> {
        if matrix.nrows() <= direct_limit {
            let factor = SkylineCholesky::factor(&matrix)?;
            Ok(SpdSolver::Direct { matrix, factor })
        } else {
            Ok(SpdSolver::Iterative { matrix })
        }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        match self {
            SpdSolver::Direct { matrix, .. } | SpdSolver::Iterative { matrix } => matrix,
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, SolveStats), LinearSolveError> {
        let a = self.matrix();
        if b.len() != a.nrows() {
            return Err(LinearSolveError::Dimension { rows: a.nrows(), cols: a.ncols(), rhs: b.len() });
        }
        let (x, iterations) = match self {
            SpdSolver::Direct { factor, .. } => (factor.solve(b), 1),
            SpdSolver::Iterative { matrix } => {
                let (x, hist) = pcg(matrix, b, CG_TOLERANCE, 10 * matrix.nrows().max(100))?;
                (x, hist.len())
            }
        };
        let relative_residual = relative_residual(a, &x, b);
        Ok((x, SolveStats { relative_residual, iterations }))
    }
}

pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: f64 = ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let bn = norm2(b);
    if bn == 0.0 {
        r
    } else {
        r / bn
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn direct_and_cg_agree() {
        let a = laplace_1d(40);
        let b: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).sin()).collect();
        let (x1, s1) = SpdSolver::new(a.clone()).unwrap().solve(&b).unwrap();
        let (x2, s2) = SpdSolver::with_limit(a, 0).unwrap().solve(&b).unwrap();
        assert!(s1.relative_residual < 1e-13);
        assert!(s2.relative_residual < 1e-10);
        for (p, q) in x1.iter().zip(&x2) {
            assert!((p - q).abs() < 1e-8);
        }
    }

    #[test]
    fn rcm_is_permutation() {
        let a = laplace_1d(7);
        let mut p = rcm_ordering(&a);
        p.sort_unstable();
        assert_eq!(p, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn indefinite_rejected() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(SkylineCholesky::factor(&a), Err(LinearSolveError::NotPositiveDefinite { .. })));
    }
}
