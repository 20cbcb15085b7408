use crate::error::{Error, Result};

use super::Scalar;

/// Sparse matrix in compressed row-major form with a parallel
/// column-major view built once at construction.
///
/// Within each row, column indices are strictly ascending and no
/// duplicate `(row, col)` pair exists. The column view mirrors the same
/// entries for per-column access (weighted regression walks item
/// columns, everything else walks user rows).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<F> {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<F>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    col_values: Vec<F>,
}

impl<F: Scalar> SparseMatrix<F> {
    /// Builds a matrix from unordered `(row, col, value)` triplets.
    ///
    /// Rejects out-of-range indices, duplicate coordinates, and
    /// non-finite values. An empty triplet list is a valid (all-zero)
    /// matrix.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, F)]) -> Result<Self> {
        let mut sorted = triplets.to_vec();
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        for window in sorted.windows(2) {
            if window[0].0 == window[1].0 && window[0].1 == window[1].1 {
                return Err(Error::InvalidInput(format!(
                    "duplicate entry at ({}, {})",
                    window[0].0, window[0].1
                )));
            }
        }

        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        for &(r, c, v) in &sorted {
            if r >= rows || c >= cols {
                return Err(Error::InvalidInput(format!(
                    "entry ({r}, {c}) out of range for {rows}x{cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite value at ({r}, {c})"
                )));
            }
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self::from_csr_unchecked(rows, cols, row_ptr, col_idx, values))
    }

    /// Builds a matrix from already-validated CSR arrays: `row_ptr` of
    /// length `rows + 1`, column indices strictly ascending within each
    /// row, all indices in range.
    pub(crate) fn from_csr_unchecked(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<F>,
    ) -> Self {
        debug_assert_eq!(row_ptr.len(), rows + 1);
        debug_assert_eq!(col_idx.len(), values.len());
        debug_assert_eq!(*row_ptr.last().unwrap(), col_idx.len());

        // Column view: counting sort over columns; scanning rows in
        // order keeps row indices ascending within each column.
        let nnz = col_idx.len();
        let mut col_ptr = vec![0usize; cols + 1];
        for &c in &col_idx {
            col_ptr[c + 1] += 1;
        }
        for j in 0..cols {
            col_ptr[j + 1] += col_ptr[j];
        }
        let mut cursor = col_ptr.clone();
        let mut row_idx = vec![0usize; nnz];
        let mut col_values = vec![F::zero(); nnz];
        for r in 0..rows {
            for e in row_ptr[r]..row_ptr[r + 1] {
                let c = col_idx[e];
                row_idx[cursor[c]] = r;
                col_values[cursor[c]] = values[e];
                cursor[c] += 1;
            }
        }

        Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
            col_ptr,
            row_idx,
            col_values,
        }
    }

    /// Validates CSR arrays before construction.
    pub fn from_csr(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<F>,
    ) -> Result<Self> {
        if row_ptr.len() != rows + 1 || row_ptr[0] != 0 {
            return Err(Error::Format("malformed row pointer array".into()));
        }
        if col_idx.len() != values.len() || *row_ptr.last().unwrap() != col_idx.len() {
            return Err(Error::Format("CSR array lengths disagree".into()));
        }
        for r in 0..rows {
            if row_ptr[r] > row_ptr[r + 1] {
                return Err(Error::Format("row pointers not nondecreasing".into()));
            }
            let range = row_ptr[r]..row_ptr[r + 1];
            for e in range.clone() {
                if col_idx[e] >= cols {
                    return Err(Error::Format(format!(
                        "column index {} out of range",
                        col_idx[e]
                    )));
                }
                if !values[e].is_finite() {
                    return Err(Error::Format("non-finite value".into()));
                }
                if e > range.start && col_idx[e] <= col_idx[e - 1] {
                    return Err(Error::Format(format!(
                        "columns not strictly ascending in row {r}"
                    )));
                }
            }
        }
        Ok(Self::from_csr_unchecked(rows, cols, row_ptr, col_idx, values))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[F]) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    /// Row indices and values of column `j`, from the column view.
    pub fn col(&self, j: usize) -> (&[usize], &[F]) {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[range.clone()], &self.col_values[range])
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn col_nnz(&self, j: usize) -> usize {
        self.col_ptr[j + 1] - self.col_ptr[j]
    }

    /// Per-column nonzero counts.
    pub fn col_counts(&self) -> Vec<usize> {
        (0..self.cols).map(|j| self.col_nnz(j)).collect()
    }

    /// Per-row nonzero counts.
    pub fn row_counts(&self) -> Vec<usize> {
        (0..self.rows).map(|i| self.row_nnz(i)).collect()
    }

    /// Iterates entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, F)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    /// Raw CSR arrays `(row_ptr, col_idx, values)`, used by persistence.
    pub fn csr_parts(&self) -> (&[usize], &[usize], &[F]) {
        (&self.row_ptr, &self.col_idx, &self.values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_row_and_column_views() {
        let m = SparseMatrix::from_triplets(
            3,
            2,
            &[(2, 1, 5.0_f64), (0, 0, 1.0), (0, 1, 2.0), (1, 0, 3.0)],
        )
        .unwrap();
        assert_eq!(m.nnz(), 4);
        assert_eq!(m.row(0), (&[0usize, 1][..], &[1.0, 2.0][..]));
        assert_eq!(m.row(1), (&[0usize][..], &[3.0][..]));
        assert_eq!(m.col(0), (&[0usize, 1][..], &[1.0, 3.0][..]));
        assert_eq!(m.col(1), (&[0usize, 2][..], &[2.0, 5.0][..]));
        assert_eq!(m.col_counts(), vec![2, 2]);
        assert_eq!(m.row_counts(), vec![2, 1, 1]);
    }

    #[test]
    fn nnz_sums_agree_between_views() {
        let m =
            SparseMatrix::from_triplets(4, 3, &[(0, 2, 1.0_f64), (3, 0, 1.0), (1, 1, 1.0)]).unwrap();
        let row_sum: usize = m.row_counts().iter().sum();
        let col_sum: usize = m.col_counts().iter().sum();
        assert_eq!(row_sum, m.nnz());
        assert_eq!(col_sum, m.nnz());
    }

    #[test]
    fn rejects_duplicates() {
        let err = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0_f64), (0, 0, 2.0)]).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(SparseMatrix::from_triplets(2, 2, &[(2, 0, 1.0_f64)]).is_err());
        assert!(SparseMatrix::from_triplets(2, 2, &[(0, 2, 1.0_f64)]).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(SparseMatrix::from_triplets(1, 1, &[(0, 0, f64::NAN)]).is_err());
    }

    #[test]
    fn empty_matrix_is_valid() {
        let m = SparseMatrix::<f64>::from_triplets(3, 4, &[]).unwrap();
        assert_eq!(m.nnz(), 0);
        assert_eq!(m.row(2), (&[][..], &[][..]));
    }
}
