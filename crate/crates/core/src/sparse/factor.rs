//! Direct factorizations.
//!
//! Hermitian kinds use an up-looking simplicial LDLᴴ over the elimination
//! tree (no interchanges; diagonal 1×1 pivots). Pivots are accepted by a
//! threshold test against the matrix scale: any |pivot| ≤ 1e-14·max|A|
//! aborts with a singularity error, which is what the eigensolver's shift
//! retry reacts to. For saddle systems with a dense constraint row the
//! [`Ordering::AmdWithLateColumn`] placement keeps every leading minor
//! nonsingular, so 1×1 pivoting suffices there as well. The `general`
//! kind is a left-looking sparse LU with partial pivoting.
//!
//! Factorize-then-solve is deterministic: identical inputs give bit
//! identical factors and solutions, and one factorization may serve
//! concurrent solves (`solve` takes `&self`).

use super::{compute_ordering, Ordering, Scalar, SparseMatrix};
use crate::{Error, Result};

/// What structure the factorization may assume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    /// Hermitian positive definite: LDLᴴ, every pivot must be positive.
    SymmetricPositive,
    /// Hermitian with mixed-sign pivots: LDLᴴ with the threshold test only.
    HermitianIndefinite,
    /// No structure assumed: sparse LU with partial pivoting.
    General,
}

/// Size, fill, and pivot diagnostics of a completed factorization.
#[derive(Debug, Clone)]
pub struct FactorStats {
    pub n: usize,
    /// Stored entries of the factor(s), excluding unit diagonals.
    pub nnz_factor: usize,
    /// Singularity threshold used: 1e-14 · max|entry of A|.
    pub pivot_threshold: f64,
    /// Smallest |pivot| accepted.
    pub smallest_pivot: f64,
    /// Number of negative pivots (Hermitian kinds; inertia diagnostic).
    pub negative_pivots: usize,
}

enum FactorData<T> {
    Ldl {
        /// Strictly lower triangular L by columns, row indices ascending.
        colptr: Vec<usize>,
        rowidx: Vec<u32>,
        vals: Vec<T>,
        /// Real diagonal of D.
        d: Vec<f64>,
    },
    Lu {
        /// Strictly-lower unit L by columns; row ids are pre-pivot indices.
        lcols: Vec<Vec<(u32, T)>>,
        /// Strictly-upper U by columns; row ids are pivot positions.
        ucols: Vec<Vec<(u32, T)>>,
        udiag: Vec<T>,
        /// pinv[pre-pivot row] = pivot position.
        pinv: Vec<u32>,
    },
}

/// A factored matrix ready for repeated solves.
pub struct Factorization<T> {
    kind: FactorKind,
    /// Fill-reducing permutation, `perm[new] = old`.
    perm: Vec<usize>,
    data: FactorData<T>,
    pub stats: FactorStats,
}

/// Factor with the default fill-reducing ordering (AMD).
pub fn factorize<T: Scalar>(a: &SparseMatrix<T>, kind: FactorKind) -> Result<Factorization<T>> {
    factorize_with(a, kind, Ordering::Amd)
}

/// Factor with an explicit ordering choice.
///
/// Hermitian kinds require `a` to be stored with both triangles (assembled
/// matrices are); the values of the upper triangle are taken as the
/// conjugates of the lower.
pub fn factorize_with<T: Scalar>(
    a: &SparseMatrix<T>,
    kind: FactorKind,
    ordering: Ordering,
) -> Result<Factorization<T>> {
    if a.nrows() != a.ncols() {
        return Err(Error::SparseConstruction(format!(
            "cannot factor non-square {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    let perm = compute_ordering(a, ordering);
    match kind {
        FactorKind::SymmetricPositive | FactorKind::HermitianIndefinite => {
            ldl_factor(a, kind, perm)
        }
        FactorKind::General => lu_factor(a, perm),
    }
}

impl<T: Scalar> Factorization<T> {
    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.perm.len();
        assert_eq!(b.len(), n);
        match &self.data {
            FactorData::Ldl { colptr, rowidx, vals, d } => {
                let mut x: Vec<T> = (0..n).map(|k| b[self.perm[k]]).collect();
                // L y = Pb, unit forward, column scatter.
                for j in 0..n {
                    let xj = x[j];
                    let (lo, hi) = (colptr[j], colptr[j + 1]);
                    for (&r, &v) in rowidx[lo..hi].iter().zip(&vals[lo..hi]) {
                        x[r as usize] -= v * xj;
                    }
                }
                for j in 0..n {
                    x[j] = x[j].scale(1.0 / d[j]);
                }
                // Lᴴ z = y, backward, column gather.
                for j in (0..n).rev() {
                    let mut acc = x[j];
                    let (lo, hi) = (colptr[j], colptr[j + 1]);
                    for (&r, &v) in rowidx[lo..hi].iter().zip(&vals[lo..hi]) {
                        acc -= v.conj() * x[r as usize];
                    }
                    x[j] = acc;
                }
                let mut out = vec![T::zero(); n];
                for k in 0..n {
                    out[self.perm[k]] = x[k];
                }
                out
            }
            FactorData::Lu { lcols, ucols, udiag, pinv } => {
                // Row pivot applied to the fill-permuted rhs.
                let mut z = vec![T::zero(); n];
                for (pre, &piv) in pinv.iter().enumerate() {
                    z[piv as usize] = b[self.perm[pre]];
                }
                for j in 0..n {
                    let zj = z[j];
                    for &(r, lv) in &lcols[j] {
                        z[pinv[r as usize] as usize] -= lv * zj;
                    }
                }
                for k in (0..n).rev() {
                    let xk = z[k] / udiag[k];
                    z[k] = xk;
                    for &(i, uv) in &ucols[k] {
                        z[i as usize] -= uv * xk;
                    }
                }
                let mut out = vec![T::zero(); n];
                for j in 0..n {
                    out[self.perm[j]] = z[j];
                }
                out
            }
        }
    }
}

fn ldl_factor<T: Scalar>(
    a: &SparseMatrix<T>,
    kind: FactorKind,
    perm: Vec<usize>,
) -> Result<Factorization<T>> {
    let n = a.nrows();
    let mut iperm = vec![0u32; n];
    for (newi, &old) in perm.iter().enumerate() {
        iperm[old] = newi as u32;
    }

    // Permuted strictly-lower rows of PAPᵀ in CSR form, plus the real diagonal.
    let mut diag = vec![0.0f64; n];
    let mut had_diag = vec![false; n];
    let mut rowcount = vec![0usize; n];
    for (i, j, _) in a.iter() {
        let (ni, nj) = (iperm[i] as usize, iperm[j] as usize);
        if nj < ni {
            rowcount[ni] += 1;
        }
    }
    let mut lrow_ptr = vec![0usize; n + 1];
    for k in 0..n {
        lrow_ptr[k + 1] = lrow_ptr[k] + rowcount[k];
    }
    let mut lrow_col = vec![0u32; lrow_ptr[n]];
    let mut lrow_val = vec![T::zero(); lrow_ptr[n]];
    let mut cursor = lrow_ptr.clone();
    for (i, j, v) in a.iter() {
        let (ni, nj) = (iperm[i] as usize, iperm[j] as usize);
        if nj < ni {
            lrow_col[cursor[ni]] = nj as u32;
            lrow_val[cursor[ni]] = v;
            cursor[ni] += 1;
        } else if nj == ni {
            diag[ni] += v.re();
            had_diag[ni] = true;
        }
    }

    // Symbolic pass: elimination tree and column counts in one sweep.
    let mut parent = vec![u32::MAX; n];
    let mut flag = vec![u32::MAX; n];
    let mut lnz = vec![0usize; n];
    for k in 0..n {
        flag[k] = k as u32;
        for q in lrow_ptr[k]..lrow_ptr[k + 1] {
            let mut j = lrow_col[q] as usize;
            while flag[j] != k as u32 {
                if parent[j] == u32::MAX {
                    parent[j] = k as u32;
                }
                lnz[j] += 1;
                flag[j] = k as u32;
                j = parent[j] as usize;
            }
        }
    }
    let mut colptr = vec![0usize; n + 1];
    for j in 0..n {
        colptr[j + 1] = colptr[j] + lnz[j];
    }
    let nnz_l = colptr[n];
    let mut rowidx = vec![0u32; nnz_l];
    let mut vals = vec![T::zero(); nnz_l];
    let mut fill_cursor = colptr.clone();

    // Numeric pass (up-looking rows).
    let threshold = 1e-14 * a.max_abs();
    let mut d = vec![0.0f64; n];
    let mut dinv = vec![0.0f64; n];
    let mut y = vec![T::zero(); n];
    let mut pattern = vec![0u32; n];
    let mut scratch = vec![0u32; n];
    let mut flag2 = vec![u32::MAX; n];
    let mut smallest = f64::INFINITY;
    let mut negative_pivots = 0usize;
    for k in 0..n {
        let mut top = n;
        flag2[k] = k as u32;
        let mut dk = diag[k];
        for q in lrow_ptr[k]..lrow_ptr[k + 1] {
            let j0 = lrow_col[q] as usize;
            // The up-looking solve runs against the column above the
            // diagonal, i.e. the conjugates of the stored lower row.
            y[j0] += lrow_val[q].conj();
            let mut len = 0usize;
            let mut j = j0;
            while flag2[j] != k as u32 {
                scratch[len] = j as u32;
                len += 1;
                flag2[j] = k as u32;
                j = parent[j] as usize;
            }
            while len > 0 {
                len -= 1;
                top -= 1;
                pattern[top] = scratch[len];
            }
        }
        for t in top..n {
            let j = pattern[t] as usize;
            let cj = y[j];
            y[j] = T::zero();
            let (lo, hi) = (colptr[j], fill_cursor[j]);
            for (&r, &v) in rowidx[lo..hi].iter().zip(&vals[lo..hi]) {
                y[r as usize] -= v * cj;
            }
            let dj = dinv[j];
            let lkj = cj.conj().scale(dj);
            dk -= (cj * cj.conj()).re() * dj;
            rowidx[hi] = k as u32;
            vals[hi] = lkj;
            fill_cursor[j] = hi + 1;
        }
        let apiv = dk.abs();
        if apiv <= threshold || !apiv.is_finite() {
            if !had_diag[k] && lrow_ptr[k] == lrow_ptr[k + 1] && top == n {
                return Err(Error::StructurallySingular(perm[k]));
            }
            return Err(Error::SingularPivot { index: k, pivot: dk, threshold });
        }
        if kind == FactorKind::SymmetricPositive && dk < 0.0 {
            return Err(Error::SingularPivot { index: k, pivot: dk, threshold });
        }
        if dk < 0.0 {
            negative_pivots += 1;
        }
        smallest = smallest.min(apiv);
        d[k] = dk;
        dinv[k] = 1.0 / dk;
    }
    debug_assert!((0..n).all(|j| fill_cursor[j] == colptr[j + 1]));

    Ok(Factorization {
        kind,
        perm,
        data: FactorData::Ldl { colptr, rowidx, vals, d },
        stats: FactorStats {
            n,
            nnz_factor: nnz_l,
            pivot_threshold: threshold,
            smallest_pivot: smallest,
            negative_pivots,
        },
    })
}

fn lu_factor<T: Scalar>(a: &SparseMatrix<T>, perm: Vec<usize>) -> Result<Factorization<T>> {
    let n = a.nrows();
    let mut iperm = vec![0u32; n];
    for (newi, &old) in perm.iter().enumerate() {
        iperm[old] = newi as u32;
    }
    // Permuted columns of A(p, p).
    let mut cols: Vec<Vec<(u32, T)>> = vec![Vec::new(); n];
    for (i, j, v) in a.iter() {
        cols[iperm[j] as usize].push((iperm[i], v));
    }
    for c in &mut cols {
        c.sort_unstable_by_key(|&(r, _)| r);
    }

    let threshold = 1e-14 * a.max_abs();
    const UNPIVOTED: u32 = u32::MAX;
    let mut pinv = vec![UNPIVOTED; n];
    let mut lcols: Vec<Vec<(u32, T)>> = Vec::with_capacity(n);
    let mut ucols: Vec<Vec<(u32, T)>> = Vec::with_capacity(n);
    let mut udiag: Vec<T> = Vec::with_capacity(n);
    let mut x = vec![T::zero(); n];
    let mut marked = vec![u32::MAX; n];
    let mut topo: Vec<u32> = Vec::new();
    // DFS work stack of (node, next child index to visit).
    let mut dfs: Vec<(u32, usize)> = Vec::new();
    let mut smallest = f64::INFINITY;

    for k in 0..n {
        // Reach of the column pattern over the directed graph of L.
        topo.clear();
        for &(r0, _) in &cols[k] {
            if marked[r0 as usize] == k as u32 {
                continue;
            }
            dfs.push((r0, 0));
            marked[r0 as usize] = k as u32;
            while let Some(&mut (v, ref mut ci)) = dfs.last_mut() {
                let piv = pinv[v as usize];
                let children: &[(u32, T)] =
                    if piv == UNPIVOTED { &[] } else { &lcols[piv as usize] };
                if *ci < children.len() {
                    let child = children[*ci].0;
                    *ci += 1;
                    if marked[child as usize] != k as u32 {
                        marked[child as usize] = k as u32;
                        dfs.push((child, 0));
                    }
                } else {
                    topo.push(v);
                    dfs.pop();
                }
            }
        }
        // Sparse triangular solve in reverse post-order.
        for &(r, v) in &cols[k] {
            x[r as usize] += v;
        }
        for &v in topo.iter().rev() {
            let piv = pinv[v as usize];
            if piv == UNPIVOTED {
                continue;
            }
            let xv = x[v as usize];
            for &(r, lv) in &lcols[piv as usize] {
                x[r as usize] -= lv * xv;
            }
        }
        // Partial pivot: largest modulus among unpivoted pattern rows.
        let mut pivot_row = UNPIVOTED;
        let mut pivot_abs = -1.0f64;
        for &v in topo.iter().rev() {
            if pinv[v as usize] == UNPIVOTED {
                let m = x[v as usize].abs();
                if m > pivot_abs {
                    pivot_abs = m;
                    pivot_row = v;
                }
            }
        }
        if pivot_row == UNPIVOTED {
            return Err(Error::StructurallySingular(perm[k]));
        }
        if pivot_abs <= threshold || !pivot_abs.is_finite() {
            return Err(Error::SingularPivot {
                index: k,
                pivot: pivot_abs,
                threshold,
            });
        }
        smallest = smallest.min(pivot_abs);
        let ukk = x[pivot_row as usize];
        let mut lcol: Vec<(u32, T)> = Vec::new();
        let mut ucol: Vec<(u32, T)> = Vec::new();
        for &v in topo.iter().rev() {
            let piv = pinv[v as usize];
            let xv = x[v as usize];
            x[v as usize] = T::zero();
            if piv != UNPIVOTED {
                ucol.push((piv, xv));
            } else if v != pivot_row {
                lcol.push((v, xv / ukk));
            }
        }
        ucol.sort_unstable_by_key(|&(i, _)| i);
        pinv[pivot_row as usize] = k as u32;
        lcols.push(lcol);
        ucols.push(ucol);
        udiag.push(ukk);
    }

    let nnz_factor =
        lcols.iter().map(Vec::len).sum::<usize>() + ucols.iter().map(Vec::len).sum::<usize>() + n;
    Ok(Factorization {
        kind: FactorKind::General,
        perm,
        data: FactorData::Lu { lcols, ucols, udiag, pinv },
        stats: FactorStats {
            n,
            nnz_factor,
            pivot_threshold: threshold,
            smallest_pivot: smallest,
            negative_pivots: 0,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    fn laplacian_1d(n: usize, dirichlet: bool) -> SparseMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            let mut diag = 0.0;
            if i > 0 {
                t.push((i, i - 1, -1.0));
                diag += 1.0;
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                diag += 1.0;
            }
            if dirichlet {
                diag = 2.0;
            }
            t.push((i, i, diag));
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    fn residual_inf<T: Scalar>(a: &SparseMatrix<T>, x: &[T], b: &[T]) -> f64 {
        let mut ax = vec![T::zero(); b.len()];
        a.matvec(x, &mut ax);
        ax.iter().zip(b).map(|(p, q)| (*p - *q).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn identity_solves_exactly() {
        let a: SparseMatrix<f64> = SparseMatrix::identity(7);
        let f = factorize(&a, FactorKind::SymmetricPositive).unwrap();
        let b: Vec<f64> = (0..7).map(|i| i as f64 - 3.0).collect();
        assert_eq!(f.solve(&b), b);
    }

    #[test]
    fn spd_laplacian_solve_all_orderings() {
        let a = laplacian_1d(50, true);
        let xtrue: Vec<f64> = (0..50).map(|i| ((i as f64) * 0.17).sin()).collect();
        let mut b = vec![0.0; 50];
        a.matvec(&xtrue, &mut b);
        for ord in [Ordering::Natural, Ordering::Rcm, Ordering::Amd] {
            let f = factorize_with(&a, FactorKind::SymmetricPositive, ord).unwrap();
            let x = f.solve(&b);
            let err: f64 =
                x.iter().zip(&xtrue).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "ordering {ord:?}: error {err}");
        }
    }

    #[test]
    fn neumann_laplacian_reports_singularity() {
        // Constant nullvector: the free 1D Laplacian is singular.
        let a = laplacian_1d(30, false);
        match factorize(&a, FactorKind::SymmetricPositive) {
            Err(Error::SingularPivot { .. }) | Err(Error::StructurallySingular(_)) => {}
            other => panic!("expected singularity, got {:?}", other.map(|f| f.stats.clone())),
        }
    }

    #[test]
    fn spd_kind_rejects_indefinite_matrix() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, -1.0)]).unwrap();
        assert!(factorize(&a, FactorKind::SymmetricPositive).is_err());
        let f = factorize(&a, FactorKind::HermitianIndefinite).unwrap();
        assert_eq!(f.stats.negative_pivots, 1);
    }

    #[test]
    fn complex_hermitian_solve() {
        let n = 40;
        let mut t: Vec<(usize, usize, C64)> = Vec::new();
        for i in 0..n {
            t.push((i, i, C64::new(4.0 + 0.05 * i as f64, 0.0)));
            if i + 1 < n {
                let v = C64::new(-1.0, 0.4);
                t.push((i, i + 1, v));
                t.push((i + 1, i, v.conj()));
            }
            if i + 7 < n {
                let v = C64::new(0.2, -0.3);
                t.push((i, i + 7, v));
                t.push((i + 7, i, v.conj()));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &t).unwrap();
        let xtrue: Vec<C64> =
            (0..n).map(|i| C64::new((i as f64).cos(), (0.3 * i as f64).sin())).collect();
        let mut b = vec![C64::new(0.0, 0.0); n];
        a.matvec(&xtrue, &mut b);
        let f = factorize(&a, FactorKind::HermitianIndefinite).unwrap();
        let x = f.solve(&b);
        let err: f64 = x.iter().zip(&xtrue).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "error {err}");
        assert!(f.stats.smallest_pivot > 0.0);
        assert!(f.stats.pivot_threshold > 0.0);
    }

    #[test]
    fn interior_shift_is_indefinite_but_solvable() {
        // K - σI with σ inside the spectrum: mixed pivot signs.
        let k = laplacian_1d(60, true);
        let shifted = {
            let t: Vec<(usize, usize, f64)> = k
                .iter()
                .map(|(r, c, v)| (r, c, if r == c { v - 1.9 } else { v }))
                .collect();
            SparseMatrix::from_triplets(60, 60, &t).unwrap()
        };
        let f = factorize(&shifted, FactorKind::HermitianIndefinite).unwrap();
        assert!(f.stats.negative_pivots > 0);
        let xtrue: Vec<f64> = (0..60).map(|i| (i as f64 * 0.7).cos()).collect();
        let mut b = vec![0.0; 60];
        shifted.matvec(&xtrue, &mut b);
        let x = f.solve(&b);
        let err: f64 = x.iter().zip(&xtrue).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "error {err}");
    }

    #[test]
    fn bordered_mean_constraint_system() {
        // Singular Neumann stiffness bordered by a dense constraint row:
        // [K c; cᵀ 0], solvable with the late-column ordering.
        let n = 25;
        let k = laplacian_1d(n, false);
        let mut t: Vec<(usize, usize, f64)> = k.iter().collect();
        for i in 0..n {
            t.push((i, n, 1.0));
            t.push((n, i, 1.0));
        }
        let a = SparseMatrix::from_triplets(n + 1, n + 1, &t).unwrap();
        // Compatible rhs: b ⟂ nullvector of K, zero constraint value.
        let mut b = vec![0.0; n + 1];
        b[0] = 1.0;
        b[n - 1] = -1.0;
        let f = factorize_with(
            &a,
            FactorKind::HermitianIndefinite,
            Ordering::AmdWithLateColumn(n),
        )
        .unwrap();
        let x = f.solve(&b);
        assert!(residual_inf(&a, &x, &b) < 1e-10);
        assert!(f.stats.negative_pivots >= 1);
        // Mean-zero solution part.
        let mean: f64 = x[..n].iter().sum();
        assert!(mean.abs() < 1e-10);
    }

    #[test]
    fn general_lu_nonsymmetric() {
        let n = 30;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 3.0 + (i % 5) as f64));
            t.push((i, (i + 3) % n, 1.5));
            t.push(((i + 7) % n, i, -0.8));
        }
        let a = SparseMatrix::from_triplets(n, n, &t).unwrap();
        let xtrue: Vec<f64> = (0..n).map(|i| (i as f64 * 0.9).sin() + 0.1).collect();
        let mut b = vec![0.0; n];
        a.matvec(&xtrue, &mut b);
        let f = factorize(&a, FactorKind::General).unwrap();
        let x = f.solve(&b);
        let err: f64 = x.iter().zip(&xtrue).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "error {err}");
    }

    #[test]
    fn general_lu_requires_row_pivoting() {
        // Zero diagonal forces an interchange.
        let t = vec![
            (0usize, 1usize, 2.0),
            (1, 0, 3.0),
            (1, 1, 1.0),
            (2, 2, 1.0),
            (0, 2, 1.0),
        ];
        let a = SparseMatrix::from_triplets(3, 3, &t).unwrap();
        let f = factorize(&a, FactorKind::General).unwrap();
        let b = vec![5.0, 4.0, 1.0];
        let x = f.solve(&b);
        assert!(residual_inf(&a, &x, &b) < 1e-12);
    }

    #[test]
    fn general_lu_detects_singularity() {
        // Second column is a multiple of the first.
        let t = vec![
            (0usize, 0usize, 1.0),
            (0, 1, 2.0),
            (1, 0, 2.0),
            (1, 1, 4.0),
            (0, 2, 1.0),
            (1, 2, 1.0),
            (2, 0, 1.0),
            (2, 1, 2.0),
            (2, 2, 1.0),
        ];
        let a = SparseMatrix::from_triplets(3, 3, &t).unwrap();
        assert!(factorize(&a, FactorKind::General).is_err());
    }

    #[test]
    fn factorize_and_solve_are_deterministic() {
        let a = laplacian_1d(80, true);
        let b: Vec<f64> = (0..80).map(|i| ((i * i) as f64 * 0.01).sin()).collect();
        let f1 = factorize(&a, FactorKind::SymmetricPositive).unwrap();
        let f2 = factorize(&a, FactorKind::SymmetricPositive).unwrap();
        let x1 = f1.solve(&b);
        let x2 = f2.solve(&b);
        assert!(x1.iter().zip(&x2).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn ldl_matches_dense_gaussian_elimination() {
        // Cross-check the factored solve against a dense row-reduction on a
        // small random Hermitian positive definite matrix.
        let n = 12;
        let mut t: Vec<(usize, usize, C64)> = Vec::new();
        let mut state = 99u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut dense = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..i {
                let v = C64::new(rnd() * 0.4, rnd() * 0.4);
                dense[i * n + j] = v;
                dense[j * n + i] = v.conj();
            }
            dense[i * n + i] = C64::new(6.0 + rnd(), 0.0);
        }
        for i in 0..n {
            for j in 0..n {
                if dense[i * n + j].norm() > 0.0 {
                    t.push((i, j, dense[i * n + j]));
                }
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &t).unwrap();
        let b: Vec<C64> = (0..n).map(|i| C64::new(1.0, i as f64 * 0.1)).collect();
        let x = factorize(&a, FactorKind::SymmetricPositive).unwrap().solve(&b);

        // Dense Gaussian elimination with partial pivoting.
        let mut m = dense.clone();
        let mut rhs = b.clone();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&p, &q| {
                    m[p * n + col].norm().partial_cmp(&m[q * n + col].norm()).unwrap()
                })
                .unwrap();
            for j in 0..n {
                m.swap(col * n + j, piv * n + j);
            }
            rhs.swap(col, piv);
            for r in (col + 1)..n {
                let f = m[r * n + col] / m[col * n + col];
                for j in col..n {
                    let v = m[col * n + j];
                    m[r * n + j] -= f * v;
                }
                let v = rhs[col];
                rhs[r] -= f * v;
            }
        }
        let mut xd = vec![C64::new(0.0, 0.0); n];
        for r in (0..n).rev() {
            let mut acc = rhs[r];
            for j in (r + 1)..n {
                acc -= m[r * n + j] * xd[j];
            }
            xd[r] = acc / m[r * n + r];
        }
        for i in 0..n {
            assert!((x[i] - xd[i]).norm() < 1e-10, "entry {i}: {} vs {}", x[i], xd[i]);
        }
    }
}
