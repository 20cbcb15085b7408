use rayon::prelude::*;

use crate::error::{Error, Result};

use super::Scalar;

/// Fall back to a single thread below this many multiply-adds.
const PAR_FLOP_THRESHOLD: usize = 1 << 16;

/// Dense matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> DenseMatrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, F::one());
        }
        m
    }

    /// Wraps row-major data, rejecting length mismatches and non-finite
    /// values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{}x{} matrix needs {} values, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite value in matrix".into()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Test-friendly constructor from row slices.
    pub fn from_rows(rows: &[&[F]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::from_vec(r, c, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> F {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: F) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    /// Mutable row slices, for kernels that fill rows independently.
    pub(crate) fn rows_mut(&mut self) -> std::slice::ChunksMut<'_, F> {
        self.data.chunks_mut(self.cols.max(1))
    }

    /// Splits the backing storage before row `r`.
    pub(crate) fn split_rows_mut(&mut self, r: usize) -> (&mut [F], &mut [F]) {
        self.data.split_at_mut(r * self.cols)
    }

    /// Parallel mutable row slices; each row is owned by one task.
    pub(crate) fn par_rows_mut(&mut self) -> rayon::slice::ChunksMut<'_, F> {
        self.data.par_chunks_mut(self.cols.max(1))
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// `self * other`. Parallel over output rows; each row is
    /// accumulated sequentially, so results do not depend on scheduling.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "matmul {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        let work = self.rows * self.cols * other.cols;
        let body = |(i, out_row): (usize, &mut [F])| {
            let a_row = self.row(i);
            for (k, &a_ik) in a_row.iter().enumerate() {
                if a_ik == F::zero() {
                    continue;
                }
                let b_row = other.row(k);
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a_ik * b;
                }
            }
        };
        if work < PAR_FLOP_THRESHOLD {
            out.data.chunks_mut(other.cols).enumerate().for_each(body);
        } else {
            out.data
                .par_chunks_mut(other.cols)
                .enumerate()
                .for_each(body);
        }
        Ok(out)
    }

    /// `self * other^T`, computed from rows of both operands.
    pub fn matmul_nt(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::Shape(format!(
                "matmul_nt {}x{} * ({}x{})^T",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.rows);
        let work = self.rows * self.cols * other.rows;
        let body = |(i, out_row): (usize, &mut [F])| {
            let a_row = self.row(i);
            for (j, o) in out_row.iter_mut().enumerate() {
                *o = dot(a_row, other.row(j));
            }
        };
        if work < PAR_FLOP_THRESHOLD {
            out.data.chunks_mut(other.rows).enumerate().for_each(body);
        } else {
            out.data
                .par_chunks_mut(other.rows)
                .enumerate()
                .for_each(body);
        }
        Ok(out)
    }

    /// `self * v` for a column vector `v`.
    pub fn mat_vec(&self, v: &[F]) -> Result<Vec<F>> {
        if v.len() != self.cols {
            return Err(Error::Shape(format!(
                "mat_vec {}x{} * {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// Multiplies column `j` by `factors[j]`.
    pub fn scale_columns(&self, factors: &[F]) -> Result<Self> {
        if factors.len() != self.cols {
            return Err(Error::Shape(format!(
                "{} column factors for {} columns",
                factors.len(),
                self.cols
            )));
        }
        let mut out = self.clone();
        for i in 0..out.rows {
            for (v, &s) in out.row_mut(i).iter_mut().zip(factors) {
                *v = *v * s;
            }
        }
        Ok(out)
    }

    pub fn add_to_diagonal(&mut self, v: F) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            let cur = self.get(i, i);
            self.set(i, i, cur + v);
        }
    }

    pub fn frobenius_norm(&self) -> F {
        self.data
            .iter()
            .map(|&v| v * v)
            .fold(F::zero(), |a, b| a + b)
            .sqrt()
    }

    pub fn max_abs(&self) -> F {
        self.data
            .iter()
            .map(|v| v.abs())
            .fold(F::zero(), |a, b| a.max(b))
    }

    pub fn max_abs_diff(&self, other: &Self) -> F {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(F::zero(), |m, d| m.max(d))
    }
}

#[inline]
pub(crate) fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_validates_shape_and_finiteness() {
        assert!(DenseMatrix::from_vec(2, 2, vec![1.0_f64; 3]).is_err());
        assert!(DenseMatrix::from_vec(1, 2, vec![1.0, f64::INFINITY]).is_err());
        assert!(DenseMatrix::from_vec(1, 2, vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn matmul_small() {
        let a = DenseMatrix::from_rows(&[&[1.0_f64, 2.0], &[3.0, 4.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[&[5.0_f64], &[6.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.as_slice(), &[17.0, 39.0]);
    }

    #[test]
    fn matmul_nt_matches_explicit_transpose() {
        let a = DenseMatrix::from_rows(&[&[1.0_f64, 2.0, 3.0], &[0.5, -1.0, 2.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[&[2.0_f64, 0.0, 1.0], &[1.0, 1.0, 1.0]]).unwrap();
        let via_nt = a.matmul_nt(&b).unwrap();
        let via_t = a.matmul(&b.transpose()).unwrap();
        assert_eq!(via_nt, via_t);
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let a = DenseMatrix::<f64>::zeros(2, 3);
        let b = DenseMatrix::<f64>::zeros(2, 3);
        assert!(a.matmul(&b).is_err());
        assert!(a.mat_vec(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn scale_columns_applies_per_column_factor() {
        let a = DenseMatrix::from_rows(&[&[1.0_f64, 1.0], &[2.0, 3.0]]).unwrap();
        let s = a.scale_columns(&[3.0, 2.0]).unwrap();
        assert_eq!(s.as_slice(), &[3.0, 2.0, 6.0, 6.0]);
    }
}
