//! Sparse symmetric positive-definite solves.
//!
//! Matrices are assembled from triplets into compressed columns with a fixed
//! summation order, factored with a sparse Cholesky decomposition, and the
//! answer is polished by iterative refinement against a residual computed
//! independently of the factorization.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Col, Side};

use crate::error::{Error, Result};

/// Relative residual every accepted solution must reach.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
const MAX_REFINEMENT_STEPS: usize = 3;

/// Symmetric matrix stored as its lower triangle in compressed columns.
#[derive(Clone, Debug)]
pub struct SymmetricMatrix {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SymmetricMatrix {
    /// Builds the matrix from `(row, col, value)` entries. Entries above the
    /// diagonal are mirrored into the lower triangle; duplicates are summed
    /// in the order given.
    pub fn from_triplets(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut lower: Vec<(usize, usize, f64)> = entries
            .iter()
            .map(|&(r, c, v)| if r >= c { (r, c, v) } else { (c, r, v) })
            .collect();
        if let Some(&(r, _, _)) = lower.iter().find(|e| e.0 >= n) {
            return Err(Error::invalid(format!("matrix entry row {r} outside dimension {n}")));
        }
        lower.sort_by_key(|&(r, c, _)| (c, r));
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(lower.len());
        let mut values: Vec<f64> = Vec::with_capacity(lower.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in lower {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_idx.push(r);
                values.push(v);
                col_ptr[c + 1] += 1;
                last = Some((r, c));
            }
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        Ok(SymmetricMatrix {
            n,
            col_ptr,
            row_idx,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz_lower(&self) -> usize {
        self.values.len()
    }

    /// `y = A x` using both triangles.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for c in 0..self.n {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                let (r, v) = (self.row_idx[k], self.values[k]);
                y[r] += v * x[c];
                if r != c {
                    y[c] += v * x[r];
                }
            }
        }
        y
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let triplets: Vec<Triplet<usize, usize, f64>> = (0..self.n)
            .flat_map(|c| (self.col_ptr[c]..self.col_ptr[c + 1]).map(move |k| (c, k)))
            .map(|(c, k)| Triplet::new(self.row_idx[k], c, self.values[k]))
            .collect();
        SparseColMat::try_new_from_triplets(self.n, self.n, &triplets)
            .map_err(|e| Error::solve(format!("sparse matrix construction failed: {e:?}")))
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Outcome of [`solve_spd`].
#[derive(Clone, Debug)]
pub struct SpdSolution {
    pub x: Vec<f64>,
    /// `|b - A x| / |b|` of the returned `x`.
    pub relative_residual: f64,
    pub refinement_steps: usize,
}

/// Solves `A x = b` for symmetric positive-definite `A`.
pub fn solve_spd(a: &SymmetricMatrix, b: &[f64]) -> Result<SpdSolution> {
    if b.len() != a.n {
        return Err(Error::invalid("right-hand side length does not match the matrix"));
    }
    let b_norm = norm(b);
    if a.n == 0 || b_norm == 0.0 {
        return Ok(SpdSolution {
            x: vec![0.0; a.n],
            relative_residual: 0.0,
            refinement_steps: 0,
        });
    }
    let llt = a
        .to_faer()?
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::solve(format!("Cholesky factorization failed ({e:?}); the system is singular or indefinite")))?;
    let apply = |rhs: &[f64]| -> Vec<f64> {
        let col = Col::<f64>::from_fn(rhs.len(), |i| rhs[i]);
        let sol = llt.solve(&col);
        (0..rhs.len()).map(|i| sol[i]).collect()
    };

    let mut x = apply(b);
    let residual_of = |x: &[f64]| -> Vec<f64> { a.mul(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect() };
    let mut r = residual_of(&x);
    let mut rel = norm(&r) / b_norm;
    let mut steps = 0;
    while !(rel <= RESIDUAL_TOLERANCE) && steps < MAX_REFINEMENT_STEPS {
        if !rel.is_finite() {
            break;
        }
        let dx = apply(&r);
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        r = residual_of(&x);
        rel = norm(&r) / b_norm;
        steps += 1;
    }
    if !(rel <= RESIDUAL_TOLERANCE) {
        return Err(Error::SolveFailure {
            reason: "residual above tolerance after iterative refinement".into(),
            residual: rel,
            iterations: steps,
        });
    }
    Ok(SpdSolution {
        x,
        relative_residual: rel,
        refinement_steps: steps,
    })
}
