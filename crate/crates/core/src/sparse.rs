//! Thin wrappers over the sparse direct solvers.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Which factorisation produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factorization {
    Cholesky,
    Lu,
}

fn build(n: usize, triplets: &[(usize, usize, f64)]) -> Result<SparseColMat<usize, f64>> {
    let t: Vec<Triplet<usize, usize, f64>> = triplets.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
    SparseColMat::try_new_from_triplets(n, n, &t).map_err(|e| Error::SolverFailure(format!("matrix assembly: {e:?}")))
}

fn rhs_matrix(n: usize, rhs: &[Vec<f64>]) -> Result<Mat<f64>> {
    if let Some(bad) = rhs.iter().find(|c| c.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.len(),
        });
    }
    Ok(Mat::from_fn(n, rhs.len(), |i, j| rhs[j][i]))
}

fn columns(x: &Mat<f64>) -> Result<Vec<Vec<f64>>> {
    let cols: Vec<Vec<f64>> = (0..x.ncols())
        .map(|j| (0..x.nrows()).map(|i| x[(i, j)]).collect())
        .collect();
    if cols.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::SolverFailure("solution has non-finite entries".into()));
    }
    Ok(cols)
}

/// Solves a symmetric positive definite system by sparse Cholesky, falling back to LU.
pub fn solve_spd(
    n: usize,
    triplets: &[(usize, usize, f64)],
    rhs: &[Vec<f64>],
) -> Result<(Vec<Vec<f64>>, Factorization)> {
    let a = build(n, triplets)?;
    let b = rhs_matrix(n, rhs)?;
    if let Ok(llt) = a.sp_cholesky(Side::Lower) {
        if let Ok(x) = columns(&llt.solve(&b)) {
            return Ok((x, Factorization::Cholesky));
        }
    }
    let lu = a
        .sp_lu()
        .map_err(|e| Error::SolverFailure(format!("LU factorisation: {e:?}")))?;
    Ok((columns(&lu.solve(&b))?, Factorization::Lu))
}

/// Solves a general square system by sparse LU.
pub fn solve_general(n: usize, triplets: &[(usize, usize, f64)], rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let a = build(n, triplets)?;
    let b = rhs_matrix(n, rhs)?;
    let lu = a
        .sp_lu()
        .map_err(|e| Error::SolverFailure(format!("LU factorisation: {e:?}")))?;
    columns(&lu.solve(&b))
}

/// `A x` for a triplet matrix.
pub fn triplet_matvec(n: usize, triplets: &[(usize, usize, f64)], x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for &(r, c, v) in triplets {
        y[r] += v * x[c];
    }
    y
}
