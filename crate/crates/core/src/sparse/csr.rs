use crate::error::{Error, Result};

use super::DenseMatrix;

/// Compressed sparse row matrix in canonical form.
///
/// Column indices are strictly increasing within each row and there are no
/// duplicate entries. Every constructor enforces this, so kernels can rely on
/// sorted rows (binary search lookup, linear merges in `add_scaled`).
///
/// Explicit zeros are allowed and are kept when they arise from cancellation.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from raw CSR arrays, validating canonical form.
    pub fn new(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let m = CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        };
        m.check_structure()?;
        Ok(m)
    }

    fn from_parts(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        let m = CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        };
        debug_assert!(m.check_structure().is_ok());
        m
    }

    /// Checks the structural invariants: consistent `row_ptr`, sorted and
    /// deduplicated in-range column indices.
    pub fn check_structure(&self) -> Result<()> {
        if self.row_ptr.len() != self.nrows + 1 {
            return Err(Error::InvalidCsr(format!(
                "row_ptr has length {}, expected {}",
                self.row_ptr.len(),
                self.nrows + 1
            )));
        }
        if self.row_ptr[0] != 0 {
            return Err(Error::InvalidCsr("row_ptr[0] must be 0".into()));
        }
        if self.col_idx.len() != self.values.len() {
            return Err(Error::InvalidCsr(format!(
                "{} column indices but {} values",
                self.col_idx.len(),
                self.values.len()
            )));
        }
        if self.row_ptr[self.nrows] != self.col_idx.len() {
            return Err(Error::InvalidCsr(format!(
                "row_ptr[nrows] = {} but {} entries stored",
                self.row_ptr[self.nrows],
                self.col_idx.len()
            )));
        }
        for i in 0..self.nrows {
            let (start, end) = (self.row_ptr[i], self.row_ptr[i + 1]);
            if start > end {
                return Err(Error::InvalidCsr(format!("row_ptr decreases at row {i}")));
            }
            let cols = &self.col_idx[start..end];
            for (k, &c) in cols.iter().enumerate() {
                if c >= self.ncols {
                    return Err(Error::InvalidCsr(format!(
                        "column {c} out of range in row {i} (ncols = {})",
                        self.ncols
                    )));
                }
                if k > 0 && cols[k - 1] >= c {
                    return Err(Error::InvalidCsr(format!(
                        "columns not strictly increasing in row {i}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, j, _) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::InvalidCsr(format!(
                    "triplet ({i}, {j}) outside {nrows}x{ncols}"
                )));
            }
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut entries = vec![(0usize, 0.0f64); triplets.len()];
        for &(i, j, v) in triplets {
            entries[next[i]] = (j, v);
            next[i] += 1;
        }

        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for i in 0..nrows {
            let row = &mut entries[counts[i]..counts[i + 1]];
            row.sort_by_key(|e| e.0);
            for &(j, v) in row.iter() {
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self::from_parts(nrows, ncols, row_ptr, col_idx, values))
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_parts(nrows, ncols, vec![0; nrows + 1], Vec::new(), Vec::new())
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_parts(n, n, (0..=n).collect(), (0..n).collect(), diag.to_vec())
    }

    /// Converts a dense matrix, storing every entry with `|a_ij| > drop_tol`.
    pub fn from_dense(dense: &DenseMatrix, drop_tol: f64) -> Self {
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..dense.nrows() {
            for j in 0..dense.ncols() {
                let v = dense[(i, j)];
                if v.abs() > drop_tol {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self::from_parts(dense.nrows(), dense.ncols(), row_ptr, col_idx, values)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.values[s..e])
    }

    /// Entry `(i, j)`, zero if not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    /// `y = A x`.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch {
                op: "spmv",
                expected: self.ncols,
                found: x.len(),
            });
        }
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x` without shape checks beyond debug assertions.
    #[inline]
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    /// `y -= A x`.
    #[inline]
    pub(crate) fn spmv_sub_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi -= cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum::<f64>();
        }
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // Rows are visited in increasing order, so each output row comes out sorted.
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                col_idx[next[j]] = i;
                values[next[j]] = v;
                next[j] += 1;
            }
        }
        Self::from_parts(self.ncols, self.nrows, counts, col_idx, values)
    }

    /// Diagonal entries; rows without a stored diagonal give zero.
    pub fn extract_diagonal(&self) -> Result<Vec<f64>> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                op: "extract_diagonal",
                nrows: self.nrows,
                ncols: self.ncols,
            });
        }
        Ok((0..self.nrows).map(|i| self.get(i, i)).collect())
    }

    /// `A + alpha * B`. The union pattern is kept even where values cancel.
    pub fn add_scaled(&self, other: &CsrMatrix, alpha: f64) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                op: "csr_add",
                expected: self.nrows * self.ncols,
                found: other.nrows * other.ncols,
            });
        }
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        row_ptr.push(0);
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let take_a = q == cb.len() || (p < ca.len() && ca[p] < cb[q]);
                let take_b = p == ca.len() || (q < cb.len() && cb[q] < ca[p]);
                if take_a {
                    col_idx.push(ca[p]);
                    values.push(va[p]);
                    p += 1;
                } else if take_b {
                    col_idx.push(cb[q]);
                    values.push(alpha * vb[q]);
                    q += 1;
                } else {
                    col_idx.push(ca[p]);
                    values.push(va[p] + alpha * vb[q]);
                    p += 1;
                    q += 1;
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self::from_parts(
            self.nrows, self.ncols, row_ptr, col_idx, values,
        ))
    }

    /// Sparse product `A B`.
    pub fn matmul(&self, other: &CsrMatrix) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(Error::DimensionMismatch {
                op: "matmul",
                expected: self.ncols,
                found: other.nrows,
            });
        }
        Ok(gustavson(self, None, other))
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= alpha);
        m
    }

    /// Scales row `i` by `d[i]`.
    pub fn scale_rows(&self, d: &[f64]) -> Result<Self> {
        if d.len() != self.nrows {
            return Err(Error::DimensionMismatch {
                op: "scale_rows",
                expected: self.nrows,
                found: d.len(),
            });
        }
        let mut m = self.clone();
        for (i, &di) in d.iter().enumerate() {
            let (s, e) = (m.row_ptr[i], m.row_ptr[i + 1]);
            m.values[s..e].iter_mut().for_each(|v| *v *= di);
        }
        Ok(m)
    }

    /// True when every stored off-diagonal value is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        self.triplets().all(|(i, j, v)| i == j || v == 0.0)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let t = self.transpose();
        self.triplets()
            .all(|(i, j, v)| (v - t.get(i, j)).abs() <= tol)
            && t.triplets()
                .all(|(i, j, v)| (v - self.get(i, j)).abs() <= tol)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] = v;
        }
        d
    }

    /// Frobenius norm of the stored values.
    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `B diag(dinv) C`, the Schur-complement correction term.
///
/// Requires `ncols(B) = len(dinv) = nrows(C)` and finite `dinv`.
pub fn triple_product_diag_scaled(b: &CsrMatrix, dinv: &[f64], c: &CsrMatrix) -> Result<CsrMatrix> {
    if b.ncols() != dinv.len() {
        return Err(Error::DimensionMismatch {
            op: "triple_product_diag_scaled",
            expected: b.ncols(),
            found: dinv.len(),
        });
    }
    if c.nrows() != dinv.len() {
        return Err(Error::DimensionMismatch {
            op: "triple_product_diag_scaled",
            expected: dinv.len(),
            found: c.nrows(),
        });
    }
    if dinv.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("triple_product_diag_scaled"));
    }
    Ok(gustavson(b, Some(dinv), c))
}

/// Row-by-row sparse product with a dense accumulator, optionally scaling the
/// inner index by `mid`.
fn gustavson(a: &CsrMatrix, mid: Option<&[f64]>, b: &CsrMatrix) -> CsrMatrix {
    let ncols = b.ncols();
    let mut acc = vec![0.0; ncols];
    let mut marker = vec![usize::MAX; ncols];
    let mut row_cols: Vec<usize> = Vec::new();

    let mut row_ptr = Vec::with_capacity(a.nrows() + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    for i in 0..a.nrows() {
        row_cols.clear();
        let (acols, avals) = a.row(i);
        for (&k, &av) in acols.iter().zip(avals) {
            let scale = mid.map_or(av, |d| av * d[k]);
            let (bcols, bvals) = b.row(k);
            for (&j, &bv) in bcols.iter().zip(bvals) {
                if marker[j] != i {
                    marker[j] = i;
                    acc[j] = 0.0;
                    row_cols.push(j);
                }
                acc[j] += scale * bv;
            }
        }
        row_cols.sort_unstable();
        for &j in &row_cols {
            col_idx.push(j);
            values.push(acc[j]);
        }
        row_ptr.push(col_idx.len());
    }
    CsrMatrix::from_parts(a.nrows(), ncols, row_ptr, col_idx, values)
}
