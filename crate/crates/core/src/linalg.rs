//! Compressed sparse column matrices and the direct solver used for the
//! saddle-point systems.

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMat, Triplet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearSolveError {
    #[error("matrix is {rows}x{cols}, right-hand side has length {rhs}")]
    Dimension { rows: usize, cols: usize, rhs: usize },
    #[error("factorization failed at pivot {pivot:?}: {reason}")]
    Factorization { pivot: Option<usize>, reason: String },
    #[error("relative residual {residual:e} above {tolerance:e} after {refinements} refinement steps")]
    Inaccurate { residual: f64, tolerance: f64, refinements: usize },
}

/// Square or rectangular CSC matrix with sorted row indices and no duplicates.
#[derive(Clone, Debug, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    /// Duplicates are summed in input order, so the result does not depend on
    /// anything but the triplet sequence.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&t| (triplets[t].1, triplets[t].0));
        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &t in &order {
            let (i, j, v) = triplets[t];
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) outside {nrows}x{ncols}");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_idx.push(i);
                values.push(v);
                col_ptr[j + 1] += 1;
                last = Some((i, j));
            }
        }
        for j in 0..ncols {
            col_ptr[j + 1] += col_ptr[j];
        }
        CscMatrix { nrows, ncols, col_ptr, row_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        match self.row_idx[r.clone()].binary_search(&i) {
            Ok(pos) => self.values[r.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for (i, a) in self.column(j) {
                    y[i] += a * xj;
                }
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for j in 0..self.ncols {
            for (i, a) in self.column(j) {
                t.push((j, i, a));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |a_ij - a_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        let mut worst: f64 = 0.0;
        for j in 0..self.ncols {
            for (i, a) in self.column(j) {
                worst = worst.max((a - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.nrows, self.ncols);
        for j in 0..self.ncols {
            for (i, a) in self.column(j) {
                m[(i, j)] = a;
            }
        }
        m
    }

    fn to_faer(&self) -> SparseColMat<usize, f64> {
        let mut t = Vec::with_capacity(self.nnz());
        for j in 0..self.ncols {
            for (i, a) in self.column(j) {
                t.push(Triplet::new(i, j, a));
            }
        }
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &t).expect("valid sorted triplets")
    }

    fn same_pattern(&self, other: &CscMatrix) -> bool {
        self.nrows == other.nrows && self.col_ptr == other.col_ptr && self.row_idx == other.row_idx
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Outcome of one direct solve.
#[derive(Clone, Debug)]
pub struct LinearSolve {
    pub solution: Vec<f64>,
    /// `|b - A x| / |b|` (absolute when `b = 0`).
    pub relative_residual: f64,
    pub refinements: usize,
}

/// Sparse LU with partial pivoting. The symbolic analysis is kept and reused
/// while the sparsity pattern stays the same.
#[derive(Default)]
pub struct DirectSolver {
    cached: Option<(CscMatrix, SymbolicLu<usize>)>,
    tolerance: Option<f64>,
}

impl DirectSolver {
    pub const DEFAULT_TOLERANCE: f64 = 1e-10;

    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_tolerance(tolerance: f64) -> Self {
        DirectSolver { cached: None, tolerance: Some(tolerance) }
    }

    pub fn solve(&mut self, a: &CscMatrix, b: &[f64]) -> Result<LinearSolve, LinearSolveError> {
        if b.len() != a.nrows {
            return Err(LinearSolveError::Dimension { rows: a.nrows, cols: a.ncols, rhs: b.len() });
        }
        self.factorize(a)?.solve(b)
    }

    /// Numeric factorization of `a`, reusable for several right-hand sides.
    pub fn factorize<'a>(&mut self, a: &'a CscMatrix) -> Result<Factorization<'a>, LinearSolveError> {
        let tolerance = self.tolerance.unwrap_or(Self::DEFAULT_TOLERANCE);
        if a.nrows != a.ncols {
            return Err(LinearSolveError::Dimension { rows: a.nrows, cols: a.ncols, rhs: 0 });
        }
        let fa = a.to_faer();
        let symbolic = match &self.cached {
            Some((pattern, sym)) if pattern.same_pattern(a) => sym.clone(),
            _ => {
                let sym = SymbolicLu::try_new(fa.symbolic())
                    .map_err(|e| LinearSolveError::Factorization { pivot: None, reason: format!("{e:?}") })?;
                let pattern = CscMatrix { values: Vec::new(), ..a.clone() };
                self.cached = Some((pattern, sym.clone()));
                sym
            }
        };
        let lu = Lu::try_new_with_symbolic(symbolic, fa.as_ref()).map_err(|e| match e {
            LuError::SymbolicSingular { index } => LinearSolveError::Factorization {
                pivot: Some(index),
                reason: "structurally singular".into(),
            },
            LuError::Generic(g) => LinearSolveError::Factorization { pivot: None, reason: format!("{g:?}") },
        })?;
        Ok(Factorization { matrix: a, lu, tolerance })
    }
}

/// LU factors of one matrix.
pub struct Factorization<'a> {
    matrix: &'a CscMatrix,
    lu: Lu<usize, f64>,
    tolerance: f64,
}

impl Factorization<'_> {
    const MAX_REFINEMENTS: usize = 3;

    fn apply(&self, rhs: &[f64]) -> Vec<f64> {
        let mut col = Col::<f64>::from_fn(rhs.len(), |i| rhs[i]);
        self.lu.solve_in_place(col.as_mat_mut());
        (0..rhs.len()).map(|i| col[i]).collect()
    }

    /// Solve with iterative refinement; fails if the relative residual stays
    /// above the tolerance.
    pub fn solve(&self, b: &[f64]) -> Result<LinearSolve, LinearSolveError> {
        let a = self.matrix;
        if b.len() != a.nrows {
            return Err(LinearSolveError::Dimension { rows: a.nrows, cols: a.ncols, rhs: b.len() });
        }
        let bnorm = norm2(b);
        let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
        let mut x = self.apply(b);
        let mut refinements = 0;
        loop {
            let ax = a.matvec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            let rel = norm2(&r) / scale;
            if !rel.is_finite() || x.iter().any(|v| !v.is_finite()) {
                return Err(LinearSolveError::Factorization { pivot: None, reason: "non-finite solution, numerically singular".into() });
            }
            if rel <= 1e-13 || refinements == Self::MAX_REFINEMENTS {
                if rel > self.tolerance {
                    return Err(LinearSolveError::Inaccurate { residual: rel, tolerance: self.tolerance, refinements });
                }
                return Ok(LinearSolve { solution: x, relative_residual: rel, refinements });
            }
            let dx = self.apply(&r);
            for (xi, d) in x.iter_mut().zip(&dx) {
                *xi += d;
            }
            refinements += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn triplets_sum_duplicates() {
        let a = CscMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (1, 2, 2.0), (0, 0, 3.0), (1, 0, -1.0)]);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.get(1, 0), -1.0);
        assert_eq!(a.get(0, 2), 0.0);
        assert_eq!(a.matvec(&[1.0, 5.0, 2.0]), vec![4.0, 3.0]);
        assert_eq!(a.transpose().get(2, 1), 2.0);
    }

    #[test]
    fn identity_bordered_system_is_exact() {
        // [I 1; 1^T 0]
        let n = 4;
        let mut t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        for i in 0..n {
            t.push((i, n, 1.0));
            t.push((n, i, 1.0));
        }
        let a = CscMatrix::from_triplets(n + 1, n + 1, &t);
        let b = [1.0, 2.0, 3.0, 4.0, 0.0];
        let s = DirectSolver::new().solve(&a, &b).unwrap();
        // x_i + lam = b_i, sum x_i = 0 -> lam = 2.5
        let expected = [-1.5, -0.5, 0.5, 1.5, 2.5];
        for (x, e) in s.solution.iter().zip(expected) {
            assert!((x - e).abs() < 1e-14);
        }
    }

    #[test]
    fn random_saddle_system_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (n, m) = (30, 8);
        let mut t = Vec::new();
        // SPD block: diagonally dominant symmetric
        for i in 0..n {
            t.push((i, i, 10.0 + rng.gen::<f64>()));
            for _ in 0..3 {
                let j = rng.gen_range(0..n);
                if j != i {
                    let v = rng.gen::<f64>() - 0.5;
                    t.push((i, j, v));
                    t.push((j, i, v));
                }
            }
        }
        for k in 0..m {
            for _ in 0..4 {
                let j = rng.gen_range(0..n);
                let v = rng.gen::<f64>() - 0.5;
                t.push((n + k, j, v));
                t.push((j, n + k, v));
            }
            t.push((n + k, (k * 3) % n, 1.0));
            t.push(((k * 3) % n, n + k, 1.0));
        }
        let a = CscMatrix::from_triplets(n + m, n + m, &t);
        assert!(a.max_asymmetry() == 0.0);
        let b: Vec<f64> = (0..n + m).map(|_| rng.gen::<f64>()).collect();
        let mut solver = DirectSolver::new();
        let s = solver.solve(&a, &b).unwrap();
        assert!(s.relative_residual <= 1e-10);
        // second solve reuses the symbolic analysis
        let s2 = solver.solve(&a, &b).unwrap();
        assert_eq!(s.solution, s2.solution);
    }

    #[test]
    fn singular_matrix_reported() {
        let a = CscMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 1.0), (0, 2, 1.0)]);
        let err = DirectSolver::new().solve(&a, &[1.0, 1.0, 1.0]).unwrap_err();
        assert!(matches!(err, LinearSolveError::Factorization { .. } | LinearSolveError::Inaccurate { .. }), "{err:?}");
        assert!(matches!(DirectSolver::new().solve(&a, &[1.0]), Err(LinearSolveError::Dimension { .. })));
    }
}
