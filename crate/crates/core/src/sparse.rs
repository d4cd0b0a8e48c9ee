//! Compressed sparse row matrices and the pure-Neumann Laplace solve.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Result, SmtError};
use crate::sum::ordered_sum;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Square matrix from `(row, col, value)` entries; duplicates are summed.
    pub fn from_triplets(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_by_key(|a| (a.0, a.1));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        Self { n, indptr, indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.indptr[i]..self.indptr[i + 1])
                    .map(|k| self.values[k] * x[self.indices[k]])
                    .sum()
            })
            .collect()
    }

    /// The bilinear form `uᵀ A v`.
    pub fn form(&self, u: &[f64], v: &[f64]) -> f64 {
        let av = self.matvec(v);
        ordered_sum(&u.iter().zip(&av).map(|(a, b)| a * b).collect::<Vec<_>>())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.indices[self.indptr[i]..self.indptr[i + 1]];
        match row.binary_search(&j) {
            Ok(k) => self.values[self.indptr[i] + k],
            Err(_) => 0.0,
        }
    }
}

/// Solver for `K u = r` with `Σ r = 0`, returning the zero-mean solution.
///
/// One vertex is pinned to make the reduced stiffness matrix definite; the
/// solution is then shifted to zero mean with respect to the mass weights.
pub struct NeumannSolver {
    n: usize,
    pinned: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
    load_one: Vec<f64>,
    area: f64,
}

impl std::fmt::Debug for NeumannSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NeumannSolver")
            .field("n", &self.n)
            .field("pinned", &self.pinned)
            .finish()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeumannSolution {
    pub values: Vec<f64>,
    /// `‖K u - r‖ / ‖r‖` in the Euclidean norm.
    pub relative_residual: f64,
}

impl NeumannSolver {
    pub fn new(stiffness: &CsrMatrix, load_one: &[f64], pinned: usize) -> Result<Self> {
        let n = stiffness.n;
        if n < 2 || pinned >= n {
            return Err(SmtError::LinearSolve("system too small or bad pinned vertex".into()));
        }
        let map = |i: usize| if i < pinned { i } else { i - 1 };
        let mut trip = Vec::with_capacity(stiffness.nnz());
        for i in 0..n {
            if i == pinned {
                continue;
            }
            for k in stiffness.indptr[i]..stiffness.indptr[i + 1] {
                let j = stiffness.indices[k];
                if j != pinned {
                    trip.push(Triplet::new(map(i), map(j), stiffness.values[k]));
                }
            }
        }
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n - 1, n - 1, &trip)
            .map_err(|e| SmtError::LinearSolve(format!("{e:?}")))?;
        let llt = a
            .sp_cholesky(faer::Side::Lower)
            .map_err(|e| SmtError::LinearSolve(format!("Cholesky factorization failed: {e:?}")))?;
        Ok(Self {
            n,
            pinned,
            llt,
            load_one: load_one.to_vec(),
            area: ordered_sum(load_one),
        })
    }

    pub fn solve(&self, stiffness: &CsrMatrix, rhs: &[f64]) -> Result<NeumannSolution> {
        let scale = rhs.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let total = ordered_sum(rhs);
        if total.abs() > 1e-9 * scale * (self.n as f64).sqrt() && total.abs() > 1e-300 {
            return Err(SmtError::Precondition(format!(
                "right-hand side sums to {total:e}, it must be orthogonal to constants"
            )));
        }
        let p = self.pinned;
        let b = Col::<f64>::from_fn(self.n - 1, |i| rhs[if i < p { i } else { i + 1 }]);
        let x = self.llt.solve(&b);
        let mut values = Vec::with_capacity(self.n);
        for i in 0..self.n {
            values.push(match i.cmp(&p) {
                std::cmp::Ordering::Less => x[i],
                std::cmp::Ordering::Equal => 0.0,
                std::cmp::Ordering::Greater => x[i - 1],
            });
        }
        let mean = ordered_sum(
            &values.iter().zip(&self.load_one).map(|(a, b)| a * b).collect::<Vec<_>>(),
        ) / self.area;
        for v in &mut values {
            *v -= mean;
        }
        let kx = stiffness.matvec(&values);
        let res: f64 = kx.iter().zip(rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = rhs.iter().map(|x| x * x).sum::<f64>().sqrt();
        let relative_residual = if norm > 0.0 { res / norm } else { res };
        Ok(NeumannSolution { values, relative_residual })
    }
}
