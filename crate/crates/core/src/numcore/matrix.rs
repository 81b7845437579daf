use alloc::vec;
use alloc::vec::Vec;

use crate::error::{dim_err, Error, Result};

/// Row-major dense matrix of `f64`.
///
/// Every product below accumulates in a fixed order (ascending inner index),
/// so results are bitwise reproducible for identical inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from row-major data, rejecting wrong lengths and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(dim_err!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix data"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(dim_err!("ragged rows: expected {cols} columns, got {}", r.len()));
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    /// Unchecked constructor for internal results whose shape is known.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Gathers the given rows into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self::from_raw(indices.len(), self.cols, data)
    }

    /// Squared Frobenius norm.
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other, "dot")?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "sub")?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self::from_raw(self.rows, self.cols, data))
    }

    pub(crate) fn check_same_shape(&self, other: &Self, op: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(dim_err!(
                "{op}: {}x{} vs {}x{}",
                self.rows,
                self.cols,
                other.rows,
                other.cols
            ));
        }
        Ok(())
    }
}

/// `out = a · w + bias`, where `a` is `n×k`, `w` is a row-major `k×m` slice
/// and `bias` (optional) has length `m`.
pub(crate) fn affine(a: &DenseMatrix, w: &[f64], bias: Option<&[f64]>, m: usize) -> DenseMatrix {
    let (n, k) = a.shape();
    debug_assert_eq!(w.len(), k * m);
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let orow = &mut out[i * m..(i + 1) * m];
        if let Some(b) = bias {
            orow.copy_from_slice(b);
        }
        let arow = a.row(i);
        for (p, &av) in arow.iter().enumerate() {
            let wrow = &w[p * m..(p + 1) * m];
            for (o, &wv) in orow.iter_mut().zip(wrow) {
                *o += av * wv;
            }
        }
    }
    DenseMatrix::from_raw(n, m, out)
}

/// `out = d · wᵀ` for `d` of shape `n×m` and a row-major `k×m` weight `w`.
pub(crate) fn times_transpose(d: &DenseMatrix, w: &[f64], k: usize) -> DenseMatrix {
    let (n, m) = d.shape();
    debug_assert_eq!(w.len(), k * m);
    let mut out = vec![0.0; n * k];
    for i in 0..n {
        let drow = d.row(i);
        for p in 0..k {
            let wrow = &w[p * m..(p + 1) * m];
            let mut acc = 0.0;
            for (dv, wv) in drow.iter().zip(wrow) {
                acc += dv * wv;
            }
            out[i * k + p] = acc;
        }
    }
    DenseMatrix::from_raw(n, k, out)
}

/// Accumulates `aᵀ · d` into the row-major `k×m` buffer `out`.
pub(crate) fn accumulate_transpose_times(a: &DenseMatrix, d: &DenseMatrix, out: &mut [f64]) {
    let (n, k) = a.shape();
    let m = d.cols();
    debug_assert_eq!(d.rows(), n);
    debug_assert_eq!(out.len(), k * m);
    for i in 0..n {
        let arow = a.row(i);
        let drow = d.row(i);
        for (p, &av) in arow.iter().enumerate() {
            let orow = &mut out[p * m..(p + 1) * m];
            for (o, &dv) in orow.iter_mut().zip(drow) {
                *o += av * dv;
            }
        }
    }
}

/// Accumulates column sums of `d` into `out`.
pub(crate) fn accumulate_col_sums(d: &DenseMatrix, out: &mut [f64]) {
    for i in 0..d.rows() {
        for (o, &v) in out.iter_mut().zip(d.row(i)) {
            *o += v;
        }
    }
}
