use rayon::prelude::*;

use crate::error::{Error, Result};

use super::dense::DenseMatrix;
use super::sparse::SparseMatrix;
use super::Scalar;

/// `S * D` for sparse `S` (m x n) and dense `D` (n x k).
///
/// Cost is proportional to `nnz(S) * k`. Parallel over output rows.
pub fn sparse_dense_matmul<F: Scalar>(
    s: &SparseMatrix<F>,
    d: &DenseMatrix<F>,
) -> Result<DenseMatrix<F>> {
    if s.cols() != d.rows() {
        return Err(Error::Shape(format!(
            "sparse_dense_matmul {}x{} * {}x{}",
            s.rows(),
            s.cols(),
            d.rows(),
            d.cols()
        )));
    }
    let mut out = DenseMatrix::zeros(s.rows(), d.cols());
    out.par_rows_mut().enumerate().for_each(|(i, out_row)| {
        let (cols, vals) = s.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            for (o, &d_jc) in out_row.iter_mut().zip(d.row(j)) {
                *o += v * d_jc;
            }
        }
    });
    Ok(out)
}

/// `S^T * D` for sparse `S` (m x n) and dense `D` (m x k), via the
/// column view of `S`. Parallel over output rows (columns of `S`).
pub fn sparse_transpose_dense_matmul<F: Scalar>(
    s: &SparseMatrix<F>,
    d: &DenseMatrix<F>,
) -> Result<DenseMatrix<F>> {
    if s.rows() != d.rows() {
        return Err(Error::Shape(format!(
            "sparse_transpose_dense_matmul ({}x{})^T * {}x{}",
            s.rows(),
            s.cols(),
            d.rows(),
            d.cols()
        )));
    }
    let mut out = DenseMatrix::zeros(s.cols(), d.cols());
    out.par_rows_mut().enumerate().for_each(|(j, out_row)| {
        let (rows, vals) = s.col(j);
        for (&i, &v) in rows.iter().zip(vals) {
            for (o, &d_ic) in out_row.iter_mut().zip(d.row(i)) {
                *o += v * d_ic;
            }
        }
    });
    Ok(out)
}

/// `Q^T * Q` for dense `Q` (m x k). The upper triangle is accumulated
/// in row order and mirrored, so the result is symmetric to the bit.
pub fn gram<F: Scalar>(q: &DenseMatrix<F>) -> DenseMatrix<F> {
    let k = q.cols();
    let mut g = DenseMatrix::zeros(k, k);
    for i in 0..q.rows() {
        let row = q.row(i);
        for a in 0..k {
            let ra = row[a];
            if ra == F::zero() {
                continue;
            }
            for b in a..k {
                let cur = g.get(a, b);
                g.set(a, b, cur + ra * row[b]);
            }
        }
    }
    for a in 0..k {
        for b in (a + 1)..k {
            let v = g.get(a, b);
            g.set(b, a, v);
        }
    }
    g
}

/// Solves `A X = B` for symmetric positive definite `A` (k x k) via
/// Cholesky factorization. `B` is k x p; all right-hand sides are
/// solved in one sweep.
///
/// A non-positive pivot reports [`Error::NotPositiveDefinite`], which
/// for regularized Gram systems signals a lambda that is too small.
pub fn spd_solve<F: Scalar>(a: &DenseMatrix<F>, b: &DenseMatrix<F>) -> Result<DenseMatrix<F>> {
    if a.rows() != a.cols() {
        return Err(Error::Shape(format!(
            "spd_solve needs square A, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if b.rows() != a.rows() {
        return Err(Error::Shape(format!(
            "spd_solve A is {}x{} but B has {} rows",
            a.rows(),
            a.cols(),
            b.rows()
        )));
    }
    let chol = cholesky(a)?;
    Ok(cholesky_solve(&chol, b))
}

/// Lower-triangular Cholesky factor `L` with `L L^T = A`.
pub(crate) fn cholesky<F: Scalar>(a: &DenseMatrix<F>) -> Result<DenseMatrix<F>> {
    let k = a.rows();
    let mut l = a.clone();
    for j in 0..k {
        let mut diag = l.get(j, j);
        for t in 0..j {
            let ljt = l.get(j, t);
            diag = diag - ljt * ljt;
        }
        if !(diag > F::zero()) || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite {
                index: j,
                value: diag.to_f64_lossy(),
            });
        }
        let pivot = diag.sqrt();
        l.set(j, j, pivot);
        for i in (j + 1)..k {
            let mut v = l.get(i, j);
            for t in 0..j {
                v = v - l.get(i, t) * l.get(j, t);
            }
            l.set(i, j, v / pivot);
        }
    }
    // Zero the upper triangle so the factor is exactly lower-triangular.
    for i in 0..k {
        for j in (i + 1)..k {
            l.set(i, j, F::zero());
        }
    }
    Ok(l)
}

/// Solves `L L^T x = b` for a single right-hand side.
pub(crate) fn cholesky_solve_vec<F: Scalar>(l: &DenseMatrix<F>, b: &[F]) -> Vec<F> {
    let k = l.rows();
    let mut x = b.to_vec();
    for i in 0..k {
        let mut v = x[i];
        for j in 0..i {
            v = v - l.get(i, j) * x[j];
        }
        x[i] = v / l.get(i, i);
    }
    for i in (0..k).rev() {
        let mut v = x[i];
        for j in (i + 1)..k {
            v = v - l.get(j, i) * x[j];
        }
        x[i] = v / l.get(i, i);
    }
    x
}

/// Solves `L L^T X = B` given the Cholesky factor `L`.
pub(crate) fn cholesky_solve<F: Scalar>(l: &DenseMatrix<F>, b: &DenseMatrix<F>) -> DenseMatrix<F> {
    let k = l.rows();
    let p = b.cols();
    let mut x = b.clone();
    // Forward substitution: L Y = B, sweeping whole rows of the
    // right-hand side so every column is solved together.
    for i in 0..k {
        for j in 0..i {
            let lij = l.get(i, j);
            if lij == F::zero() {
                continue;
            }
            for c in 0..p {
                let v = x.get(i, c) - lij * x.get(j, c);
                x.set(i, c, v);
            }
        }
        let d = l.get(i, i);
        for c in 0..p {
            let v = x.get(i, c) / d;
            x.set(i, c, v);
        }
    }
    // Backward substitution: L^T X = Y.
    for i in (0..k).rev() {
        for j in (i + 1)..k {
            let lji = l.get(j, i);
            if lji == F::zero() {
                continue;
            }
            for c in 0..p {
                let v = x.get(i, c) - lji * x.get(j, c);
                x.set(i, c, v);
            }
        }
        let d = l.get(i, i);
        for c in 0..p {
            let v = x.get(i, c) / d;
            x.set(i, c, v);
        }
    }
    x
}
