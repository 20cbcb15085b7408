//! Randomized truncated SVD for sparse matrices: Gaussian range
//! sketching with power iterations, then an exact small SVD of the
//! projected matrix. Only passes over the sparse operand are
//! proportional to nnz.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numkit::{
    sparse_dense_matmul, sparse_transpose_dense_matmul, DenseMatrix, Scalar, SparseMatrix,
};

/// Extra sketch columns beyond the requested rank.
const OVERSAMPLING: usize = 10;

const MAX_JACOBI_SWEEPS: usize = 64;

/// Rank-k factorization `S ~ U * diag(sigma) * V^T` with orthonormal
/// `U` (m x k) and `V` (n x k), singular values nonincreasing.
#[derive(Debug, Clone)]
pub struct TruncatedFactorization<F> {
    pub u: DenseMatrix<F>,
    pub singular_values: Vec<F>,
    pub v: DenseMatrix<F>,
    pub power_iterations: usize,
    pub seed: u64,
}

impl<F: Scalar> TruncatedFactorization<F> {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// Dense `U * diag(sigma) * V^T`, for error measurement in tests
    /// and small-scale diagnostics.
    pub fn reconstruct(&self) -> DenseMatrix<F> {
        let scaled = self
            .u
            .scale_columns(&self.singular_values)
            .expect("rank matches");
        scaled.matmul_nt(&self.v).expect("shapes agree")
    }
}

/// Truncated SVD of a sparse matrix by randomized range finding.
///
/// Deterministic for a fixed seed. `k` must satisfy
/// `1 <= k <= min(m, n)`; an all-zero matrix yields zero singular
/// values with an arbitrary orthonormal basis.
pub fn randomized_truncated_svd<F: Scalar>(
    s: &SparseMatrix<F>,
    k: usize,
    power_iterations: usize,
    seed: u64,
) -> Result<TruncatedFactorization<F>> {
    let (m, n) = (s.rows(), s.cols());
    let min_dim = m.min(n);
    if k == 0 || k > min_dim {
        return Err(Error::InvalidHyperparameter(format!(
            "rank {k} out of range for {m}x{n} matrix (need 1..={min_dim})"
        )));
    }
    let l = (k + OVERSAMPLING).min(min_dim);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sketch = DenseMatrix::zeros(n, l);
    for row in sketch.rows_mut() {
        for v in row {
            let x: f64 = StandardNormal.sample(&mut rng);
            *v = F::from_f64(x);
        }
    }

    let y = sparse_dense_matmul(s, &sketch)?;
    let mut q = thin_qr_q(&y);
    for _ in 0..power_iterations {
        let z = thin_qr_q(&sparse_transpose_dense_matmul(s, &q)?);
        q = thin_qr_q(&sparse_dense_matmul(s, &z)?);
    }

    // B = Q^T S, computed through the sparse transpose product.
    let mut b = sparse_transpose_dense_matmul(s, &q)?.transpose();
    let (u_small, mut sigma, mut v) = jacobi_svd_rows(&mut b);
    let mut u = q.matmul(&u_small)?;

    // Jacobi leaves singular values unsorted.
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&a, &b| sigma[b].partial_cmp(&sigma[a]).unwrap().then(a.cmp(&b)));
    u = permute_columns(&u, &order[..k]);
    v = permute_columns(&v, &order[..k]);
    sigma = order[..k].iter().map(|&i| sigma[i]).collect();

    fix_signs(&mut u, &mut v);

    Ok(TruncatedFactorization {
        u,
        singular_values: sigma,
        v,
        power_iterations,
        seed,
    })
}

/// Flips each singular pair so the largest-magnitude entry of the `V`
/// column is positive, making factorizations comparable across runs.
fn fix_signs<F: Scalar>(u: &mut DenseMatrix<F>, v: &mut DenseMatrix<F>) {
    for j in 0..v.cols() {
        let mut best = F::zero();
        let mut best_val = F::zero();
        for i in 0..v.rows() {
            let val = v.get(i, j);
            if val.abs() > best {
                best = val.abs();
                best_val = val;
            }
        }
        if best_val < F::zero() {
            for i in 0..v.rows() {
                let x = v.get(i, j);
                v.set(i, j, -x);
            }
            for i in 0..u.rows() {
                let x = u.get(i, j);
                u.set(i, j, -x);
            }
        }
    }
}

fn permute_columns<F: Scalar>(m: &DenseMatrix<F>, order: &[usize]) -> DenseMatrix<F> {
    let mut out = DenseMatrix::zeros(m.rows(), order.len());
    for i in 0..m.rows() {
        for (c, &src) in order.iter().enumerate() {
            out.set(i, c, m.get(i, src));
        }
    }
    out
}

/// Thin Q factor of the QR decomposition of `a` (m x l, m >= l), by
/// Householder reflections. Columns are exactly orthonormal even for
/// rank-deficient input (zero columns keep their canonical basis
/// vector).
pub(crate) fn thin_qr_q<F: Scalar>(a: &DenseMatrix<F>) -> DenseMatrix<F> {
    let m = a.rows();
    let l = a.cols();
    assert!(m >= l, "thin QR needs rows >= cols, got {m}x{l}");

    // Work on the transpose so each column of `a` is a contiguous row.
    let mut at = a.transpose();
    let mut betas = vec![F::zero(); l];

    for j in 0..l {
        let (head, tail) = at.split_rows_mut(j + 1);
        let x = &mut head[j * m..][j..m];
        let norm = x.iter().map(|&v| v * v).fold(F::zero(), |s, v| s + v).sqrt();
        if norm == F::zero() {
            continue;
        }
        let alpha = if x[0] > F::zero() { -norm } else { norm };
        x[0] = x[0] - alpha;
        let vtv = x.iter().map(|&v| v * v).fold(F::zero(), |s, v| s + v);
        if vtv == F::zero() {
            continue;
        }
        let beta = F::from_f64(2.0) / vtv;
        betas[j] = beta;
        let v = &head[j * m..][j..m];
        for r in (j + 1)..l {
            let row = &mut tail[(r - j - 1) * m..][j..m];
            let w = beta * dot_slices(v, row);
            for (rv, &vv) in row.iter_mut().zip(v) {
                *rv = *rv - w * vv;
            }
        }
    }

    // Accumulate Q^T = E^T H_{l-1} ... H_0 row by row.
    let mut qt = DenseMatrix::zeros(l, m);
    for j in 0..l {
        qt.set(j, j, F::one());
    }
    for j in (0..l).rev() {
        if betas[j] == F::zero() {
            continue;
        }
        let v = &at.row(j)[j..m];
        for r in 0..l {
            let row = &mut qt.row_mut(r)[j..m];
            let w = betas[j] * dot_slices(v, row);
            for (rv, &vv) in row.iter_mut().zip(v) {
                *rv = *rv - w * vv;
            }
        }
    }
    qt.transpose()
}

#[inline]
fn dot_slices<F: Scalar>(a: &[F], b: &[F]) -> F {
    let mut acc = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// One-sided Jacobi SVD applied to the rows of `b` (l x n, l <= n).
///
/// Returns `(U, sigma, V)` with `b = U * diag(sigma) * V^T`, `U` l x l,
/// `V` n x l. Rotations run in a fixed cyclic order. Zero singular
/// directions get an orthonormal completion so `V` always has
/// orthonormal columns.
pub(crate) fn jacobi_svd_rows<F: Scalar>(
    b: &mut DenseMatrix<F>,
) -> (DenseMatrix<F>, Vec<F>, DenseMatrix<F>) {
    let l = b.rows();
    let n = b.cols();
    assert!(l <= n, "jacobi_svd_rows needs rows <= cols, got {l}x{n}");

    let tol = F::epsilon() * F::from_f64(16.0);
    let mut rot = DenseMatrix::identity(l);

    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut converged = true;
        for p in 0..l {
            for q in (p + 1)..l {
                let (bp, bq) = row_pair_mut(b, p, q);
                let app = dot_slices(bp, bp);
                let aqq = dot_slices(bq, bq);
                let apq = dot_slices(bp, bq);
                if apq == F::zero() || apq.abs() <= tol * (app * aqq).sqrt() {
                    continue;
                }
                converged = false;
                let zeta = (aqq - app) / (F::from_f64(2.0) * apq);
                let t = if zeta >= F::zero() {
                    F::one() / (zeta + (F::one() + zeta * zeta).sqrt())
                } else {
                    -F::one() / (-zeta + (F::one() + zeta * zeta).sqrt())
                };
                let c = F::one() / (F::one() + t * t).sqrt();
                let s = c * t;
                rotate_rows(bp, bq, c, s);
                let (rp, rq) = row_pair_mut(&mut rot, p, q);
                rotate_rows(rp, rq, c, s);
            }
        }
        if converged {
            break;
        }
    }

    let mut sigma = Vec::with_capacity(l);
    for p in 0..l {
        let row = b.row(p);
        sigma.push(dot_slices(row, row).sqrt());
    }
    let max_sigma = sigma.iter().cloned().fold(F::zero(), |a, b| a.max(b));
    let cutoff = max_sigma * F::epsilon() * F::from_usize(n.max(l));

    let mut v = DenseMatrix::zeros(n, l);
    let mut missing = Vec::new();
    for p in 0..l {
        if sigma[p] <= cutoff {
            sigma[p] = F::zero();
            missing.push(p);
            continue;
        }
        let row = b.row(p);
        for i in 0..n {
            v.set(i, p, row[i] / sigma[p]);
        }
    }
    complete_orthonormal_columns(&mut v, &missing);

    (rot.transpose(), sigma, v)
}

/// Applies the Givens rotation `[c -s; s c]` to a row pair.
fn rotate_rows<F: Scalar>(rp: &mut [F], rq: &mut [F], c: F, s: F) {
    for (p, q) in rp.iter_mut().zip(rq.iter_mut()) {
        let np = c * *p - s * *q;
        let nq = s * *p + c * *q;
        *p = np;
        *q = nq;
    }
}

fn row_pair_mut<F: Scalar>(
    m: &mut DenseMatrix<F>,
    p: usize,
    q: usize,
) -> (&mut [F], &mut [F]) {
    debug_assert!(p < q);
    let cols = m.cols();
    let (head, tail) = m.split_rows_mut(q);
    (&mut head[p * cols..(p + 1) * cols], &mut tail[..cols])
}

/// Fills the listed columns with unit vectors orthogonal to every
/// other column, drawn from canonical basis candidates.
fn complete_orthonormal_columns<F: Scalar>(v: &mut DenseMatrix<F>, missing: &[usize]) {
    let n = v.rows();
    let l = v.cols();
    for &col in missing {
        'candidates: for t in 0..n {
            let mut cand = vec![F::zero(); n];
            cand[t] = F::one();
            for other in 0..l {
                if other == col {
                    continue;
                }
                let mut proj = F::zero();
                for i in 0..n {
                    proj += cand[i] * v.get(i, other);
                }
                if proj != F::zero() {
                    for (i, cv) in cand.iter_mut().enumerate() {
                        *cv = *cv - proj * v.get(i, other);
                    }
                }
            }
            let norm = cand
                .iter()
                .map(|&x| x * x)
                .fold(F::zero(), |a, b| a + b)
                .sqrt();
            if norm > F::from_f64(0.5) {
                for (i, cv) in cand.iter().enumerate() {
                    v.set(i, col, *cv / norm);
                }
                break 'candidates;
            }
        }
    }
}
