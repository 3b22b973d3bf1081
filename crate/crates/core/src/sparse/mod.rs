//! Sparse matrix storage (CSR), deterministic triplet assembly, fill-reducing
//! orderings, and direct factorizations: LDLᴴ for Hermitian matrices
//! (positive definite or indefinite) and a column LU with partial pivoting
//! for the general kind. Everything is generic over real (`f64`) and
//! complex ([`crate::C64`]) scalars and is bit-deterministic: identical
//! inputs produce identical factors and solutions regardless of thread
//! count (nothing here is threaded).

mod factor;
mod ordering;

pub use factor::{factorize, factorize_with, FactorKind, FactorStats, Factorization};
pub use ordering::{compute_ordering, Ordering};

use crate::{Error, Result, C64};
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

/// Scalar abstraction: the factorizations and matrix ops run unchanged for
/// real symmetric and complex Hermitian data.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + PartialEq
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn conj(self) -> Self;
    /// Modulus.
    fn abs(self) -> f64;
    /// Real part.
    fn re(self) -> f64;
    fn from_f64(x: f64) -> Self;
    fn scale(self, x: f64) -> Self;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn conj(self) -> Self {
        self
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    fn re(self) -> f64 {
        self
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn scale(self, x: f64) -> Self {
        self * x
    }
}

impl Scalar for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn one() -> Self {
        C64::new(1.0, 0.0)
    }
    fn conj(self) -> Self {
        C64::conj(&self)
    }
    fn abs(self) -> f64 {
        C64::norm(self)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn from_f64(x: f64) -> Self {
        C64::new(x, 0.0)
    }
    fn scale(self, x: f64) -> Self {
        C64::new(self.re * x, self.im * x)
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    /// Build from (row, col, value) triplets. Duplicates are summed in
    /// triplet order, so the result is bit-identical for a given triplet
    /// sequence independent of how the triplets were produced upstream.
    ///
    /// Assembly produces millions of triplets, so instead of one global
    /// comparison sort the entries are bucketed by row in a counting pass
    /// (stable, O(nnz)) and only the short per-row runs are sorted by
    /// column (stable, so equal keys keep insertion order).
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, T)],
    ) -> Result<Self> {
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::SparseConstruction(format!(
                    "triplet ({r}, {c}) outside {nrows} x {ncols}"
                )));
            }
        }
        // Counting pass: bucket offsets per row.
        let mut start = vec![0usize; nrows + 2];
        for &(r, _, _) in triplets {
            start[r + 2] += 1;
        }
        for r in 2..start.len() {
            start[r] += start[r - 1];
        }
        // Stable scatter into row buckets (start[r + 1] walks across row r).
        let mut bucket: Vec<(usize, T)> = vec![(0, T::zero()); triplets.len()];
        for &(r, c, v) in triplets {
            bucket[start[r + 1]] = (c, v);
            start[r + 1] += 1;
        }

        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut vals: Vec<T> = Vec::with_capacity(triplets.len());
        for r in 0..nrows {
            let run = &mut bucket[start[r]..start[r + 1]];
            run.sort_by_key(|&(c, _)| c);
            for &(c, v) in run.iter() {
                if col_idx.len() > row_ptr[r] && *col_idx.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    vals.push(v);
                }
            }
            row_ptr[r + 1] = col_idx.len();
        }
        Ok(SparseMatrix { nrows, ncols, row_ptr, col_idx, vals })
    }

    /// Identity matrix.
    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            vals: vec![T::one(); n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Sorted column indices of row `r`.
    pub fn row_indices(&self, r: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    /// Values of row `r`, aligned with [`Self::row_indices`].
    pub fn row_values(&self, r: usize) -> &[T] {
        &self.vals[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    /// Entry accessor (binary search within the row); zero if absent.
    pub fn get(&self, r: usize, c: usize) -> T {
        let cols = self.row_indices(r);
        match cols.binary_search(&c) {
            Ok(k) => self.vals[self.row_ptr[r] + k],
            Err(_) => T::zero(),
        }
    }

    /// y = A x (row-oriented accumulation).
    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let mut acc = T::zero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
    }

    /// y = Aᴴ x (column-oriented scatter). For Hermitian matrices this
    /// computes the same product as [`Self::matvec`] through an independent
    /// accumulation path, which the residual report uses as a cross-check.
    pub fn conj_transpose_matvec(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        y.fill(T::zero());
        for r in 0..self.nrows {
            let xr = x[r];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[k]] += self.vals[k].conj() * xr;
            }
        }
    }

    /// Largest entry modulus (0 for an empty matrix).
    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Dense copy, row-major; for tests and the dense eigenvalue oracle.
    pub fn to_dense(&self) -> Vec<T> {
        let mut dense = vec![T::zero(); self.nrows * self.ncols];
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                dense[r * self.ncols + self.col_idx[k]] = self.vals[k];
            }
        }
        dense
    }

    /// Iterate all stored entries as (row, col, value).
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.vals[k]))
        })
    }

    /// Maximum Hermitian asymmetry `max |A - Aᴴ|`; 0 for exactly Hermitian.
    pub fn hermitian_defect(&self) -> f64 {
        let mut defect: f64 = 0.0;
        for (r, c, v) in self.iter() {
            defect = defect.max((v - self.get(c, r).conj()).abs());
        }
        defect
    }
}

impl SparseMatrix<f64> {
    /// y = A x for a real matrix applied to a complex vector (the mass
    /// matrix is real while eigenvectors are complex).
    pub fn matvec_complex(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = self.vals[k];
                let xv = x[self.col_idx[k]];
                acc.re += v * xv.re;
                acc.im += v * xv.im;
            }
            y[r] = acc;
        }
    }

    /// Promote to a complex matrix with the same pattern.
    pub fn to_complex(&self) -> SparseMatrix<C64> {
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            vals: self.vals.iter().map(|&v| C64::new(v, 0.0)).collect(),
        }
    }
}

impl SparseMatrix<C64> {
    /// `self + scale * B` for a real matrix `B`; used to form the
    /// shift-invert pencil `K - σM`. Patterns are merged.
    pub fn add_scaled_real(&self, b: &SparseMatrix<f64>, scale: f64) -> Result<SparseMatrix<C64>> {
        if self.nrows != b.nrows || self.ncols != b.ncols {
            return Err(Error::SparseConstruction(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.nrows, self.ncols, b.nrows, b.ncols
            )));
        }
        let mut triplets: Vec<(usize, usize, C64)> =
            Vec::with_capacity(self.nnz() + b.nnz());
        triplets.extend(self.iter());
        triplets.extend(b.iter().map(|(r, c, v)| (r, c, C64::new(v * scale, 0.0))));
        SparseMatrix::from_triplets(self.nrows, self.ncols, &triplets)
    }
}
