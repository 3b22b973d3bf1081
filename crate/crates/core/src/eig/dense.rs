//! Dense reference solver for generalized Hermitian eigenproblems.
//!
//! Exists so the iterative driver in this module's parent can be checked
//! against a path that shares none of its machinery: the pencil
//! `K x = λ M x` is reduced to a standard Hermitian problem with a dense
//! Cholesky factor of `M`, tridiagonalized with complex Householder
//! reflections, and the eigenvalues are extracted by implicit-shift QL
//! iteration. Eigenvectors are not computed.

use rayon::prelude::*;

use crate::sparse::SparseMatrix;
use crate::{C64, Error, Result};

/// Hard cap on the pencil dimension accepted by [`dense_eigenvalues`].
pub const MAX_DENSE_DIM: usize = 2000;

/// Lowest `count` eigenvalues of `K x = λ M x` by dense reduction.
///
/// `k` must be Hermitian and `m` symmetric positive definite; both are
/// expanded to dense storage, so this is intended for cross-checks and
/// small reference computations only. Dimensions above [`MAX_DENSE_DIM`]
/// are rejected with [`Error::DenseOracleTooLarge`].
pub fn dense_eigenvalues(
    k: &SparseMatrix<C64>,
    m: &SparseMatrix<f64>,
    count: usize,
) -> Result<Vec<f64>> {
    let n = k.nrows();
    if k.ncols() != n || m.nrows() != n || m.ncols() != n {
        return Err(Error::EigRequest(format!(
            "pencil blocks must be square and matching ({}x{} vs {}x{})",
            k.nrows(),
            k.ncols(),
            m.nrows(),
            m.ncols()
        )));
    }
    if n > MAX_DENSE_DIM {
        return Err(Error::DenseOracleTooLarge { n, max: MAX_DENSE_DIM });
    }
    if count > n {
        return Err(Error::EigRequest(format!(
            "requested {count} eigenvalues from a dimension-{n} pencil"
        )));
    }
    if count == 0 {
        return Ok(Vec::new());
    }

    let l = dense_cholesky(n, &m.to_dense())?;

    // W = L⁻¹ K, computed column by column. Columns are stored as rows of
    // the transposed array so each forward substitution runs on contiguous
    // memory.
    let mut wt = transpose(n, &k.to_dense());
    wt.par_chunks_mut(n).for_each(|col| forward_solve(n, &l, col));

    // C = W L⁻ᵀ is Hermitian, so C = (L⁻¹ Wᴴ)ᴴ. Column c of Wᴴ is the
    // conjugate of row c of W, i.e. the conjugate of column c of the `wt`
    // array; transposing and conjugating lines those columns up as rows.
    let mut y = transpose(n, &wt);
    drop(wt);
    for v in y.iter_mut() {
        *v = v.conj();
    }
    y.par_chunks_mut(n).for_each(|col| forward_solve(n, &l, col));
    // Row c of `y` now holds column c of Cᴴ, so C is the elementwise
    // conjugate of `y` read as a row-major matrix.
    for v in y.iter_mut() {
        *v = v.conj();
    }

    let (mut d, mut e) = tridiagonalize(n, &mut y);
    ql_implicit(&mut d, &mut e)?;
    d.sort_by(f64::total_cmp);
    d.truncate(count);
    Ok(d)
}

/// In-place lower Cholesky factor of a dense symmetric matrix.
fn dense_cholesky(n: usize, a: &[f64]) -> Result<Vec<f64>> {
    let mut l = vec![0.0_f64; n * n];
    for j in 0..n {
        let mut diag = a[j * n + j];
        for p in 0..j {
            diag -= l[j * n + p] * l[j * n + p];
        }
        if diag <= 0.0 {
            return Err(Error::EigNonConvergence(format!(
                "mass matrix is not positive definite (pivot {diag:.3e} at row {j})"
            )));
        }
        let dj = diag.sqrt();
        l[j * n + j] = dj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for p in 0..j {
                s -= l[i * n + p] * l[j * n + p];
            }
            l[i * n + j] = s / dj;
        }
    }
    Ok(l)
}

fn transpose(n: usize, a: &[C64]) -> Vec<C64> {
    let mut t = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = a[i * n + j];
        }
    }
    t
}

/// Solves `L y = b` in place for a dense lower-triangular `L`.
fn forward_solve(n: usize, l: &[f64], b: &mut [C64]) {
    for i in 0..n {
        let mut s = b[i];
        let lrow = &l[i * n..i * n + i];
        for (p, &lip) in lrow.iter().enumerate() {
            s -= b[p].scale(lip);
        }
        b[i] = s.scale(1.0 / l[i * n + i]);
    }
}

/// Householder reduction of a dense Hermitian matrix to real tridiagonal
/// form; returns the diagonal and the subdiagonal moduli. The input buffer
/// is consumed as workspace.
fn tridiagonalize(n: usize, a: &mut [C64]) -> (Vec<f64>, Vec<f64>) {
    let mut e = vec![0.0_f64; n];
    for kk in 0..n.saturating_sub(1) {
        let m = n - kk - 1; // trailing block dimension
        // x = A[kk+1.., kk], the column to eliminate below the subdiagonal.
        let mut x = vec![C64::new(0.0, 0.0); m];
        for (t, xt) in x.iter_mut().enumerate() {
            *xt = a[(kk + 1 + t) * n + kk];
        }
        let norm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        e[kk] = norm;
        if norm == 0.0 {
            continue;
        }
        // Householder vector v = (x − α e₀)/‖·‖ with α phased to avoid
        // cancellation; then H x = α e₀ for H = I − 2vvᴴ.
        let x0 = x[0];
        let alpha = if x0.norm() > 0.0 {
            -(x0 / x0.norm()).scale(norm)
        } else {
            C64::new(-norm, 0.0)
        };
        x[0] -= alpha;
        let vn = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        for v in x.iter_mut() {
            *v = v.scale(1.0 / vn);
        }
        // Rank-2 update of the trailing block: A ← A − q vᴴ − v qᴴ with
        // w = A v, κ = Re(vᴴ w), q = 2(w − κ v).
        let base = kk + 1;
        let mut w = vec![C64::new(0.0, 0.0); m];
        for i in 0..m {
            let row = &a[(base + i) * n + base..(base + i) * n + base + m];
            let mut s = C64::new(0.0, 0.0);
            for (j, &aij) in row.iter().enumerate() {
                s += aij * x[j];
            }
            w[i] = s;
        }
        let kappa: f64 = x.iter().zip(w.iter()).map(|(v, wi)| (v.conj() * wi).re).sum();
        let q: Vec<C64> = w
            .iter()
            .zip(x.iter())
            .map(|(wi, vi)| (wi - vi.scale(kappa)).scale(2.0))
            .collect();
        for i in 0..m {
            let qi = q[i];
            let vi = x[i];
            let row = &mut a[(base + i) * n + base..(base + i) * n + base + m];
            for j in 0..m {
                row[j] -= qi * x[j].conj() + vi * q[j].conj();
            }
        }
    }
    let d: Vec<f64> = (0..n).map(|i| a[i * n + i].re).collect();
    (d, e)
}

/// Implicit-shift QL iteration on a real symmetric tridiagonal matrix,
/// eigenvalues only. `e[i]` couples `d[i]` and `d[i+1]`; `e[n-1]` is
/// workspace.
fn ql_implicit(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(Error::EigNonConvergence(format!(
                    "QL iteration stalled at index {l}"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0_f64, 1.0_f64);
            let mut p = 0.0_f64;
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    // Deflate without finishing the sweep.
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{splitmix64_at, unit_f64};
    use crate::smalleig::symmetric_eigen;

    fn sparse_from_dense_c64(n: usize, a: &[C64]) -> SparseMatrix<C64> {
        let mut trip = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = a[i * n + j];
                if v.norm() != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        SparseMatrix::from_triplets(n, n, &trip).unwrap()
    }

    fn sparse_from_dense_f64(n: usize, a: &[f64]) -> SparseMatrix<f64> {
        let mut trip = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if a[i * n + j] != 0.0 {
                    trip.push((i, j, a[i * n + j]));
                }
            }
        }
        SparseMatrix::from_triplets(n, n, &trip).unwrap()
    }

    fn random_hermitian(n: usize, seed: u64) -> Vec<C64> {
        let mut a = vec![C64::new(0.0, 0.0); n * n];
        let mut ctr = 0;
        for i in 0..n {
            for j in i..n {
                let re = unit_f64(splitmix64_at(seed, ctr)) - 0.5;
                let im = unit_f64(splitmix64_at(seed, ctr + 1)) - 0.5;
                ctr += 2;
                let v = if i == j { C64::new(re, 0.0) } else { C64::new(re, im) };
                a[i * n + j] = v;
                a[j * n + i] = v.conj();
            }
        }
        a
    }

    #[test]
    fn toeplitz_tridiagonal_matches_closed_form() {
        // Second-difference matrix: eigenvalues 2 − 2 cos(jπ/(n+1)).
        let n = 30;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, C64::new(2.0, 0.0)));
            if i + 1 < n {
                trip.push((i, i + 1, C64::new(-1.0, 0.0)));
                trip.push((i + 1, i, C64::new(-1.0, 0.0)));
            }
        }
        let k = SparseMatrix::from_triplets(n, n, &trip).unwrap();
        let m = SparseMatrix::<f64>::identity(n);
        let vals = dense_eigenvalues(&k, &m, n).unwrap();
        for (j, &v) in vals.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((j + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-12, "λ_{j} = {v}, want {exact}");
        }
    }

    #[test]
    fn complex_hermitian_matches_real_embedding() {
        // A = X + iY Hermitian has the same spectrum (doubled) as the real
        // symmetric embedding [[X, −Y], [Y, X]], which the Jacobi helper can
        // digest — two fully independent code paths.
        let n = 14;
        let a = random_hermitian(n, 0xD1CE);
        let mut emb = vec![0.0_f64; 4 * n * n];
        for i in 0..n {
            for j in 0..n {
                let v = a[i * n + j];
                emb[i * 2 * n + j] = v.re;
                emb[i * 2 * n + (n + j)] = -v.im;
                emb[(n + i) * 2 * n + j] = v.im;
                emb[(n + i) * 2 * n + (n + j)] = v.re;
            }
        }
        let (jac, _) = symmetric_eigen(2 * n, &emb);
        let k = sparse_from_dense_c64(n, &a);
        let m = SparseMatrix::<f64>::identity(n);
        let vals = dense_eigenvalues(&k, &m, n).unwrap();
        for (i, &v) in vals.iter().enumerate() {
            assert!(
                (v - jac[2 * i]).abs() < 1e-9,
                "eigenvalue {i}: householder/QL {v} vs embedded jacobi {}",
                jac[2 * i]
            );
        }
    }

    #[test]
    fn generalized_pencil_recovers_planted_spectrum() {
        // With M = LLᵀ and K = L diag(d) Lᵀ the pencil eigenvalues are d.
        let n = 12;
        let mut l = vec![0.0_f64; n * n];
        for i in 0..n {
            for j in 0..=i {
                l[i * n + j] = if i == j {
                    1.0 + unit_f64(splitmix64_at(7, (i * n + j) as u64))
                } else {
                    unit_f64(splitmix64_at(7, (i * n + j) as u64)) - 0.5
                };
            }
        }
        let mut planted: Vec<f64> = (0..n).map(|i| (i as f64 - 3.0) * 1.7 + 0.3).collect();
        let mut mdense = vec![0.0_f64; n * n];
        let mut kdense = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut sm = 0.0;
                let mut sk = 0.0;
                for p in 0..n {
                    sm += l[i * n + p] * l[j * n + p];
                    sk += l[i * n + p] * planted[p] * l[j * n + p];
                }
                mdense[i * n + j] = sm;
                kdense[i * n + j] = C64::new(sk, 0.0);
            }
        }
        let k = sparse_from_dense_c64(n, &kdense);
        let m = sparse_from_dense_f64(n, &mdense);
        let vals = dense_eigenvalues(&k, &m, n).unwrap();
        planted.sort_by(f64::total_cmp);
        for (i, (&got, &want)) in vals.iter().zip(planted.iter()).enumerate() {
            assert!((got - want).abs() < 1e-9, "pair {i}: {got} vs planted {want}");
        }
    }

    #[test]
    fn rejects_oversized_and_bad_requests() {
        let n = MAX_DENSE_DIM + 1;
        let k = SparseMatrix::<C64>::identity(n);
        let m = SparseMatrix::<f64>::identity(n);
        match dense_eigenvalues(&k, &m, 1) {
            Err(Error::DenseOracleTooLarge { n: got, max }) => {
                assert_eq!(got, n);
                assert_eq!(max, MAX_DENSE_DIM);
            }
            other => panic!("expected size rejection, got {other:?}"),
        }
        let k = SparseMatrix::<C64>::identity(4);
        let m = SparseMatrix::<f64>::identity(4);
        assert!(matches!(dense_eigenvalues(&k, &m, 5), Err(Error::EigRequest(_))));
    }
}
