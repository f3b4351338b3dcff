//! Compressed-sparse-row operators over real or complex entries.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::{Debug, Write};
use core::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::{Error, Result};

/// Entry type of a [`SparseOperator`]: `f64` or [`Complex64`].
pub trait Scalar:
    Copy
    + Debug
    + Default
    + PartialEq
    + Add<Output = Self>
    + AddAssign
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Mul<f64, Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    fn conj(self) -> Self;
    fn modulus(self) -> f64;
    fn from_real(x: f64) -> Self;
    fn real(self) -> f64;
    fn to_complex(self) -> Complex64;
}

impl Scalar for f64 {
    #[inline]
    fn conj(self) -> Self {
        self
    }
    #[inline]
    fn modulus(self) -> f64 {
        self.abs()
    }
    #[inline]
    fn from_real(x: f64) -> Self {
        x
    }
    #[inline]
    fn real(self) -> f64 {
        self
    }
    #[inline]
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl Scalar for Complex64 {
    #[inline]
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    #[inline]
    fn modulus(self) -> f64 {
        self.norm()
    }
    #[inline]
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    #[inline]
    fn real(self) -> f64 {
        self.re
    }
    #[inline]
    fn to_complex(self) -> Complex64 {
        self
    }
}

/// Hermiticity tolerance enforced on construction.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
/// Above this dimension the hermiticity check visits a strided sample of rows.
pub const FULL_CHECK_DIMENSION: usize = 4096;

/// Square operator in CSR form; column indices within a row are ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator<T> {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<T>,
    hermitian: bool,
}

impl<T: Scalar> SparseOperator<T> {
    /// Assembles an operator row by row. Each row's entries may arrive in any
    /// order; duplicates are summed and exact zeros dropped.
    ///
    /// With `hermitian` set, the operator is checked against its adjoint
    /// (exhaustively up to [`FULL_CHECK_DIMENSION`], on a strided row sample
    /// beyond).
    pub fn from_rows<I>(dim: usize, rows: I, hermitian: bool) -> Result<Self>
    where
        I: IntoIterator<Item = Vec<(usize, T)>>,
    {
        if dim > u32::MAX as usize {
            return Err(Error::Capacity { requested: dim, max: u32::MAX as usize });
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut count = 0;
        for mut row in rows {
            if count == dim {
                return Err(Error::DimensionMismatch { expected: dim, found: dim + 1 });
            }
            row.sort_by_key(|&(c, _)| c);
            let start = cols.len();
            for (c, v) in row {
                if c >= dim {
                    return Err(Error::IndexOutOfRange { index: c, sites: dim });
                }
                if cols.len() > start && *cols.last().unwrap() == c as u32 {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c as u32);
                    vals.push(v);
                }
            }
            // drop entries that cancelled or were pushed as zero
            let mut w = start;
            for r in start..cols.len() {
                if vals[r] != T::default() {
                    cols[w] = cols[r];
                    vals[w] = vals[r];
                    w += 1;
                }
            }
            cols.truncate(w);
            vals.truncate(w);
            row_ptr.push(cols.len());
            count += 1;
        }
        if count != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: count });
        }
        let op = Self { dim, row_ptr, cols, vals, hermitian };
        if hermitian {
            let deviation = op.hermitian_deviation();
            if deviation > HERMITIAN_TOLERANCE {
                return Err(Error::NotHermitian { deviation });
            }
        }
        Ok(op)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[u32], &[T]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    /// Entry `(r, c)`, zero when not stored.
    pub fn get(&self, r: usize, c: usize) -> T {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&(c as u32)) {
            Ok(k) => vals[k],
            Err(_) => T::default(),
        }
    }

    /// Largest `|H_rc - conj(H_cr)|`, over all rows up to
    /// [`FULL_CHECK_DIMENSION`] and over every `ceil(dim / 4096)`-th row above.
    pub fn hermitian_deviation(&self) -> f64 {
        let stride = self.dim.div_ceil(FULL_CHECK_DIMENSION).max(1);
        let mut worst = 0.0f64;
        for r in (0..self.dim).step_by(stride) {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let dev = (v - self.get(c as usize, r).conj()).modulus();
                worst = worst.max(dev);
            }
        }
        worst
    }

    /// `y = H x`.
    pub fn apply<V>(&self, x: &[V], y: &mut [V])
    where
        V: Scalar + Mul<T, Output = V>,
    {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for (r, out) in y.iter_mut().enumerate() {
            let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let mut acc = V::default();
            for k in a..b {
                acc += x[self.cols[k] as usize] * self.vals[k];
            }
            *out = acc;
        }
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::default(); self.dim * self.dim];
        for r in 0..self.dim {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out[r * self.dim + c as usize] = v;
            }
        }
        out
    }

    /// Largest absolute row sum, an upper bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.row(r).1.iter().map(|v| v.modulus()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_complex(&self) -> SparseOperator<Complex64> {
        SparseOperator {
            dim: self.dim,
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            vals: self.vals.iter().map(|v| v.to_complex()).collect(),
            hermitian: self.hermitian,
        }
    }

    /// One `row col value` line per stored entry (complex values as `re im`).
    pub fn to_coordinate_text(&self) -> String {
        let mut out = String::new();
        for r in 0..self.dim {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let z = v.to_complex();
                let _ = writeln!(out, "{r} {c} {} {}", z.re, z.im);
            }
        }
        out
    }
}
