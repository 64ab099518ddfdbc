//! Compressed sparse row storage and a direct solver with iterative refinement.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("singular system: {0}")]
    Singular(String),
    #[error("no convergence after {iterations} refinement steps (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("dimension mismatch: matrix is {rows}x{cols}, right-hand side has {rhs}")]
    Dimension { rows: usize, cols: usize, rhs: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from (row, col, value) triplets; duplicates are summed
    /// in a fixed order so the result does not depend on insertion order
    /// beyond floating-point summation of duplicates.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(trip.len());
        let mut values: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            assert!(r < n_rows && c < n_cols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_rows)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|k| self.values[k] * x[self.col_idx[k]])
                    .sum()
            })
            .collect()
    }

    /// Replaces row `r` by the identity row. The diagonal entry must be
    /// structurally present.
    pub fn set_identity_row(&mut self, r: usize) {
        for k in self.row_ptr[r]..self.row_ptr[r + 1] {
            self.values[k] = if self.col_idx[k] == r { 1.0 } else { 0.0 };
        }
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>, SolveError> {
        let mut trip = Vec::with_capacity(self.nnz());
        for r in 0..self.n_rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.values[k] != 0.0 {
                    trip.push(Triplet::new(r, self.col_idx[k], self.values[k]));
                }
            }
        }
        SparseColMat::try_new_from_triplets(self.n_rows, self.n_cols, &trip)
            .map_err(|e| SolveError::Singular(format!("{e:?}")))
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    /// Number of refinement sweeps after the initial solve.
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `a x = b` by sparse LU with iterative refinement until
/// ‖a x − b‖ ≤ tol·‖b‖ (absolute when b = 0).
pub fn solve(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<Solution, SolveError> {
    if a.n_rows != a.n_cols || b.len() != a.n_rows {
        return Err(SolveError::Dimension {
            rows: a.n_rows,
            cols: a.n_cols,
            rhs: b.len(),
        });
    }
    let n = b.len();
    if n == 0 {
        return Ok(Solution {
            x: Vec::new(),
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let fa = a.to_faer()?;
    let lu = fa
        .sp_lu()
        .map_err(|e| SolveError::Singular(format!("{e:?}")))?;
    let bnorm = norm2(b);
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };

    let rhs = Col::from_fn(n, |i| b[i]);
    let sol = lu.solve(&rhs);
    let mut x: Vec<f64> = (0..n).map(|i| sol[i]).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::Singular("factorization produced non-finite values".into()));
    }
    let mut iterations = 0;
    loop {
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let rel = norm2(&r) / scale;
        if rel <= tol {
            return Ok(Solution {
                x,
                iterations,
                relative_residual: rel,
            });
        }
        if iterations >= max_iter {
            return Err(SolveError::NotConverged {
                iterations,
                residual: rel,
            });
        }
        let rc = Col::from_fn(n, |i| r[i]);
        let dx = lu.solve(&rc);
        for i in 0..n {
            x[i] += dx[i];
        }
        iterations += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_returns_rhs() {
        let a = CsrMatrix::identity(4);
        let b = [1.0, -2.0, 3.5, 0.25];
        let s = solve(&a, &b, 1e-10, 5).unwrap();
        assert_eq!(s.x, b);
    }

    #[test]
    fn scalar_system() {
        let a = CsrMatrix::from_triplets(1, 1, vec![(0, 0, 2.0)]);
        let s = solve(&a, &[4.0], 1e-10, 5).unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn duplicates_are_summed() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(1, 1, 1.0), (0, 0, 1.0), (1, 1, 2.0), (0, 1, 1.0)]);
        assert_eq!(a.get(1, 1), 3.0);
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.get(1, 0), 0.0);
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![2.0, 3.0]);
    }

    #[test]
    fn singular_is_reported() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        assert!(solve(&a, &[1.0, 2.0], 1e-10, 3).is_err());
    }

    #[test]
    fn nonsymmetric_tridiagonal() {
        let n = 50;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i > 0 {
                t.push((i, i - 1, -1.5));
            }
            if i + 1 < n {
                t.push((i, i + 1, -0.5));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, t);
        let xs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = a.mul_vec(&xs);
        let s = solve(&a, &b, 1e-12, 5).unwrap();
        for i in 0..n {
            assert!((s.x[i] - xs[i]).abs() < 1e-12);
        }
    }
}
