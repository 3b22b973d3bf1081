//! Assembly of the discrete forms.
//!
//! For the magnetic Schrödinger operator `H(A,V) = (−i∇−A)·(−i∇−A) + V`
//! the sesquilinear form on real Lagrange basis functions is
//!
//! ```text
//! K[i][j] = ∫ ∇φ_j·∇φ_i + i A·(φ_i ∇φ_j − φ_j ∇φ_i) + (|A|² + V) φ_j φ_i
//! ```
//!
//! (row = test function, column = trial function), which is Hermitian with
//! a real symmetric part and an antisymmetric imaginary part; the mass
//! matrix `M[i][j] = ∫ φ_j φ_i` is real symmetric positive definite. Local
//! matrices are computed cell-parallel with only the lower triangle
//! evaluated and mirrored, so the assembled `K` is Hermitian to the bit.
//!
//! Dirichlet conditions are imposed by eliminating the essential rows and
//! columns (the eigenproblem has homogeneous boundary data), so the pencil
//! lives on the free DOFs of the space.

use crate::fe::{cell_geometry, quad_rule, tabulate_basis, FeSpace};
use crate::mesh::Mesh;
use crate::potentials::{ScalarPotential, VectorPotential};
use crate::sparse::{Scalar, SparseMatrix};
use crate::{C64, Result};
use rayon::prelude::*;

/// Quadrature exactness selection for assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadChoice {
    /// `max(2p, 8)` when both potentials are polynomial, 10 otherwise.
    Auto,
    /// A fixed exactness degree.
    Degree(usize),
}

impl QuadChoice {
    /// Resolve to a concrete degree for polynomial/non-polynomial data.
    pub fn resolve(self, p: usize, all_polynomial: bool) -> usize {
        match self {
            QuadChoice::Auto => {
                if all_polynomial {
                    (2 * p).max(8)
                } else {
                    10
                }
            }
            QuadChoice::Degree(d) => d,
        }
    }
}

/// The generalized Hermitian eigenvalue pencil `(K, M)` on free DOFs.
pub struct HermitianPencil {
    /// Hermitian form of the operator.
    pub k: SparseMatrix<C64>,
    /// Real SPD mass matrix.
    pub m: SparseMatrix<f64>,
    /// Full DOF index of each pencil row (copy of the space's free list).
    pub free_dofs: Vec<usize>,
    /// Size of the underlying full space.
    pub num_full: usize,
    /// Quadrature exactness actually used.
    pub quad_degree: usize,
}

/// Assemble stiffness-like and mass forms of `H(A,V)` on the free DOFs of
/// `space`.
pub fn assemble_magnetic_forms(
    space: &FeSpace,
    a: &dyn VectorPotential,
    v: &dyn ScalarPotential,
    quad: QuadChoice,
) -> Result<HermitianPencil> {
    let p = space.degree;
    let all_poly = a.polynomial_degree().is_some() && v.polynomial_degree().is_some();
    let degree = quad.resolve(p, all_poly);
    let rule = quad_rule(degree)?;
    let table = tabulate_basis(p, &rule)?;
    let nd = table.ndof;
    let nq = table.nq;
    let mesh = &space.mesh;

    // Per-cell local matrices, computed in parallel; indexed collect keeps
    // the output order independent of the thread count.
    let locals: Vec<(Vec<C64>, Vec<f64>)> = (0..mesh.triangles.len())
        .into_par_iter()
        .map(|t| {
            let geo = cell_geometry(mesh, t);
            let mut kloc = vec![C64::new(0.0, 0.0); nd * nd];
            let mut mloc = vec![0.0f64; nd * nd];
            let mut grads = [[0.0f64; 2]; 10];
            for q in 0..nq {
                let w = rule.weights[q] * geo.det;
                let x = geo.map(rule.points[q]);
                let av = a.eval_on_cell(t, x[0], x[1]);
                let vv = v.eval(x[0], x[1]);
                let a2v = av[0] * av[0] + av[1] * av[1] + vv;
                let vals = &table.values[q * nd..(q + 1) * nd];
                for i in 0..nd {
                    grads[i] = geo.grad(table.grads[q * nd + i]);
                }
                for i in 0..nd {
                    let (gi, fi) = (grads[i], vals[i]);
                    for j in 0..=i {
                        let (gj, fj) = (grads[j], vals[j]);
                        let sym = gj[0] * gi[0] + gj[1] * gi[1] + a2v * fj * fi;
                        let skew = av[0] * (fi * gj[0] - fj * gi[0])
                            + av[1] * (fi * gj[1] - fj * gi[1]);
                        kloc[i * nd + j] += C64::new(w * sym, w * skew);
                        mloc[i * nd + j] += w * fj * fi;
                    }
                }
            }
            // Mirror the lower triangle: Hermitian K, symmetric M.
            for i in 0..nd {
                for j in 0..i {
                    kloc[j * nd + i] = kloc[i * nd + j].conj();
                    mloc[j * nd + i] = mloc[i * nd + j];
                }
            }
            (kloc, mloc)
        })
        .collect();

    let mut kt: Vec<(usize, usize, C64)> = Vec::with_capacity(locals.len() * nd * nd);
    let mut mt: Vec<(usize, usize, f64)> = Vec::with_capacity(locals.len() * nd * nd);
    for (t, (kloc, mloc)) in locals.iter().enumerate() {
        let dofs = space.cell_dofs(t);
        for i in 0..nd {
            let fi = space.full_to_free[dofs[i]];
            if fi == usize::MAX {
                continue;
            }
            for j in 0..nd {
                let fj = space.full_to_free[dofs[j]];
                if fj == usize::MAX {
                    continue;
                }
                kt.push((fi, fj, kloc[i * nd + j]));
                mt.push((fi, fj, mloc[i * nd + j]));
            }
        }
    }
    let nfree = space.num_free();
    Ok(HermitianPencil {
        k: SparseMatrix::from_triplets(nfree, nfree, &kt)?,
        m: SparseMatrix::from_triplets(nfree, nfree, &mt)?,
        free_dofs: space.free_dofs.clone(),
        num_full: space.num_dofs,
        quad_degree: degree,
    })
}

/// The scalar Neumann problem whose solution is the gauge function:
/// minimize `‖A − ∇a‖` over `a ∈ H¹` with zero mean, i.e.
/// `∫ ∇a·∇φ = ∫ A·∇φ` for all test functions, plus a mean-value Lagrange
/// multiplier row/column bordering the (otherwise singular) stiffness.
pub struct PoissonSystem {
    /// `(n+1) × (n+1)` bordered matrix `[[K, c], [cᵀ, 0]]` over all DOFs,
    /// `c_i = ∫ φ_i`.
    pub matrix: SparseMatrix<f64>,
    /// `(b, 0)` with `b_i = ∫ A·∇φ_i`.
    pub rhs: Vec<f64>,
    /// Index of the multiplier column (= number of DOFs).
    pub border: usize,
    pub quad_degree: usize,
}

/// Assemble the bordered Neumann system for the gauge of `a`. The gauge
/// problem is posed on the whole space regardless of the eigenproblem's
/// boundary conditions, so essential DOFs are not eliminated here.
pub fn assemble_neumann_poisson(
    space: &FeSpace,
    a: &dyn VectorPotential,
    quad: QuadChoice,
) -> Result<PoissonSystem> {
    let p = space.degree;
    let degree = quad.resolve(p, a.polynomial_degree().is_some());
    // The stiffness and mean-weight integrands are polynomials of degree
    // 2(p−1) and p whatever the field is, so the smallest rule exact for
    // them already integrates without error; only the right-hand side
    // ∫ A·∇φ carries the policy-resolved degree.
    let rule_k = quad_rule((2 * (p - 1)).max(p))?;
    let table_k = tabulate_basis(p, &rule_k)?;
    let rule_b = quad_rule(degree)?;
    let table_b = tabulate_basis(p, &rule_b)?;
    let nd = table_k.ndof;
    let mesh = &space.mesh;
    let n = space.num_dofs;

    let locals: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..mesh.triangles.len())
        .into_par_iter()
        .map(|t| {
            let geo = cell_geometry(mesh, t);
            let mut kloc = vec![0.0f64; nd * nd];
            let mut bloc = vec![0.0f64; nd];
            let mut cloc = vec![0.0f64; nd];
            let mut grads = [[0.0f64; 2]; 10];
            for q in 0..table_k.nq {
                let w = rule_k.weights[q] * geo.det;
                let vals = &table_k.values[q * nd..(q + 1) * nd];
                for i in 0..nd {
                    grads[i] = geo.grad(table_k.grads[q * nd + i]);
                }
                for i in 0..nd {
                    let gi = grads[i];
                    cloc[i] += w * vals[i];
                    for j in 0..=i {
                        let gj = grads[j];
                        kloc[i * nd + j] += w * (gj[0] * gi[0] + gj[1] * gi[1]);
                    }
                }
            }
            for q in 0..table_b.nq {
                let w = rule_b.weights[q] * geo.det;
                let x = geo.map(rule_b.points[q]);
                let av = a.eval_on_cell(t, x[0], x[1]);
                for i in 0..nd {
                    let g = geo.grad(table_b.grads[q * nd + i]);
                    bloc[i] += w * (av[0] * g[0] + av[1] * g[1]);
                }
            }
            for i in 0..nd {
                for j in 0..i {
                    kloc[j * nd + i] = kloc[i * nd + j];
                }
            }
            (kloc, bloc, cloc)
        })
        .collect();

    let mut kt: Vec<(usize, usize, f64)> =
        Vec::with_capacity(mesh.triangles.len() * nd * (nd + 2));
    let mut rhs = vec![0.0f64; n + 1];
    for (t, (kloc, bloc, cloc)) in locals.iter().enumerate() {
        let dofs = space.cell_dofs(t);
        for i in 0..nd {
            let gi = dofs[i];
            rhs[gi] += bloc[i];
            kt.push((gi, n, cloc[i]));
            kt.push((n, gi, cloc[i]));
            for j in 0..nd {
                kt.push((gi, dofs[j], kloc[i * nd + j]));
            }
        }
    }
    Ok(PoissonSystem {
        matrix: SparseMatrix::from_triplets(n + 1, n + 1, &kt)?,
        rhs,
        border: n,
        quad_degree: degree,
    })
}

/// `‖A‖ = (∫_Ω |A|²)^{1/2}` by quadrature of the requested degree.
pub fn field_l2_norm(mesh: &Mesh, a: &dyn VectorPotential, degree: usize) -> Result<f64> {
    let rule = quad_rule(degree)?;
    // Indexed collect + ordered fold so the sum is independent of the
    // thread count.
    let cells: Vec<f64> = (0..mesh.triangles.len())
        .into_par_iter()
        .map(|t| {
            let geo = cell_geometry(mesh, t);
            let mut acc = 0.0;
            for q in 0..rule.points.len() {
                let x = geo.map(rule.points[q]);
                let av = a.eval_on_cell(t, x[0], x[1]);
                acc += rule.weights[q] * geo.det * (av[0] * av[0] + av[1] * av[1]);
            }
            acc
        })
        .collect();
    Ok(cells.iter().sum::<f64>().sqrt())
}

/// `(‖u‖, ‖∇u‖)` of an FE function given by full-DOF coefficients.
pub fn fe_function_norms<T: Scalar>(
    space: &FeSpace,
    u: &[T],
    degree: usize,
) -> Result<(f64, f64)> {
    assert_eq!(u.len(), space.num_dofs);
    let rule = quad_rule(degree)?;
    let table = tabulate_basis(space.degree, &rule)?;
    let nd = table.ndof;
    let mesh = &space.mesh;
    let mut l2 = 0.0f64;
    let mut h1 = 0.0f64;
    for t in 0..mesh.triangles.len() {
        let geo = cell_geometry(mesh, t);
        let dofs = space.cell_dofs(t);
        for q in 0..table.nq {
            let w = rule.weights[q] * geo.det;
            let mut val = T::zero();
            let mut gx = T::zero();
            let mut gy = T::zero();
            for i in 0..nd {
                let ci = u[dofs[i]];
                let g = geo.grad(table.grads[q * nd + i]);
                val += ci.scale(table.values[q * nd + i]);
                gx += ci.scale(g[0]);
                gy += ci.scale(g[1]);
            }
            l2 += w * val.abs() * val.abs();
            h1 += w * (gx.abs() * gx.abs() + gy.abs() * gy.abs());
        }
    }
    Ok((l2.sqrt(), h1.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe::build_space;
    use crate::mesh::{DomainKind, DomainSpec};
    use crate::potentials::{FieldKind, ZeroScalar};

    fn square_space(h: f64, p: usize, dirichlet: bool) -> FeSpace {
        let spec = if dirichlet {
            DomainSpec::dirichlet(DomainKind::Square)
        } else {
            DomainSpec::neumann(DomainKind::Square)
        };
        build_space(spec.build_mesh(h).unwrap(), p, &spec.bc).unwrap()
    }

    #[test]
    fn zero_field_gives_real_matrices() {
        let space = square_space(0.5, 2, true);
        let pencil =
            assemble_magnetic_forms(&space, &FieldKind::Zero, &ZeroScalar, QuadChoice::Auto)
                .unwrap();
        assert_eq!(pencil.quad_degree, 8);
        for (_, _, v) in pencil.k.iter() {
            assert_eq!(v.im, 0.0);
        }
        assert_eq!(pencil.k.hermitian_defect(), 0.0);
    }

    #[test]
    fn mass_row_sums_equal_domain_area() {
        // With no eliminated DOFs, Σ_ij M_ij = ∫ (Σφ)² = |Ω|.
        for p in 1..=3 {
            let space = square_space(0.7, p, false);
            let pencil =
                assemble_magnetic_forms(&space, &FieldKind::Zero, &ZeroScalar, QuadChoice::Auto)
                    .unwrap();
            let total: f64 = pencil.m.iter().map(|(_, _, v)| v).sum();
            assert!((total - 4.0).abs() < 1e-12, "p = {p}: {total}");
        }
    }

    #[test]
    fn hermitian_to_the_bit_with_oscillatory_field() {
        let space = square_space(0.4, 3, true);
        let pencil =
            assemble_magnetic_forms(&space, &FieldKind::Ex2, &ZeroScalar, QuadChoice::Auto)
                .unwrap();
        assert_eq!(pencil.quad_degree, 10);
        assert_eq!(pencil.k.hermitian_defect(), 0.0);
        assert_eq!(pencil.m.hermitian_defect(), 0.0);
    }

    #[test]
    fn constant_field_decomposes_term_by_term() {
        // K(c) = K(0) + i c·(D − Dᵀ) + |c|² M with D_ij = ∫ φ_i ∂φ_j.
        let space = square_space(0.6, 2, false);
        let (cx, cy) = (0.8, -1.7);
        let kc = assemble_magnetic_forms(
            &space,
            &FieldKind::Constant(cx, cy),
            &ZeroScalar,
            QuadChoice::Auto,
        )
        .unwrap();
        let k0 =
            assemble_magnetic_forms(&space, &FieldKind::Zero, &ZeroScalar, QuadChoice::Auto)
                .unwrap();

        // Independent assembly of D by straight quadrature.
        let rule = quad_rule(8).unwrap();
        let table = tabulate_basis(2, &rule).unwrap();
        let n = space.num_dofs;
        let mut dx = vec![0.0; n * n];
        let mut dy = vec![0.0; n * n];
        for t in 0..space.mesh.triangles.len() {
            let geo = cell_geometry(&space.mesh, t);
            let dofs = space.cell_dofs(t);
            for q in 0..table.nq {
                let w = rule.weights[q] * geo.det;
                for i in 0..table.ndof {
                    for j in 0..table.ndof {
                        let g = geo.grad(table.grads[q * table.ndof + j]);
                        dx[dofs[i] * n + dofs[j]] += w * table.values[q * table.ndof + i] * g[0];
                        dy[dofs[i] * n + dofs[j]] += w * table.values[q * table.ndof + i] * g[1];
                    }
                }
            }
        }
        let c2 = cx * cx + cy * cy;
        let kc_dense = kc.k.to_dense();
        let k0_dense = k0.k.to_dense();
        let m_dense = k0.m.to_dense();
        for i in 0..n {
            for j in 0..n {
                let skew =
                    cx * (dx[i * n + j] - dx[j * n + i]) + cy * (dy[i * n + j] - dy[j * n + i]);
                let expect = k0_dense[i * n + j] + C64::new(c2 * m_dense[i * n + j], skew);
                let got = kc_dense[i * n + j];
                assert!(
                    (got - expect).norm() < 1e-12,
                    "entry ({i},{j}): {got} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn gauge_field_norms_match_closed_forms() {
        // ∫ |(−y/2, x/2)|² over (−1,1)² = 2/3; ∫ |(−y, 0)|² = 4/3.
        let mesh = DomainSpec::neumann(DomainKind::Square).build_mesh(0.2).unwrap();
        let n1 = field_l2_norm(&mesh, &FieldKind::A1, 8).unwrap();
        let n2 = field_l2_norm(&mesh, &FieldKind::A2, 8).unwrap();
        assert!((n1 - (2.0f64 / 3.0).sqrt()).abs() < 1e-13, "{n1}");
        assert!((n2 - (4.0f64 / 3.0).sqrt()).abs() < 1e-13, "{n2}");
    }

    #[test]
    fn elimination_drops_essential_rows() {
        let space = square_space(1.0, 1, true);
        let pencil =
            assemble_magnetic_forms(&space, &FieldKind::A1, &ZeroScalar, QuadChoice::Auto)
                .unwrap();
        assert_eq!(pencil.k.nrows(), 5);
        assert_eq!(pencil.m.nrows(), 5);
        assert_eq!(pencil.free_dofs.len(), 5);
        assert_eq!(pencil.num_full, 13);
    }

    #[test]
    fn poisson_system_structure() {
        let space = square_space(0.5, 1, true);
        let n = space.num_dofs;
        let sys =
            assemble_neumann_poisson(&space, &FieldKind::Ex1, QuadChoice::Auto).unwrap();
        assert_eq!(sys.matrix.nrows(), n + 1);
        assert_eq!(sys.border, n);
        assert_eq!(sys.rhs.len(), n + 1);
        assert_eq!(sys.rhs[n], 0.0);
        // The border column holds ∫φ_i: total = area.
        let mut csum = 0.0;
        for (r, c, v) in sys.matrix.iter() {
            if c == n && r < n {
                csum += v;
            }
        }
        assert!((csum - 4.0).abs() < 1e-12);
        // Stiffness rows sum to zero (constants in the kernel), so the full
        // row sum equals the border entry.
        assert_eq!(sys.matrix.hermitian_defect(), 0.0);
        // Constant fields are pure gradients of linear functions; for
        // A = ∇(αx + βy), b_i = ∫ A·∇φ_i = stiffness action on αx + βy.
        let sys_c =
            assemble_neumann_poisson(&space, &FieldKind::Constant(1.25, -0.5), QuadChoice::Auto)
                .unwrap();
        let mut lin = vec![0.0; n + 1];
        for (d, c) in space.dof_coords.iter().enumerate() {
            lin[d] = 1.25 * c[0] - 0.5 * c[1];
        }
        let mut klin = vec![0.0; n + 1];
        sys_c.matrix.matvec(&lin, &mut klin);
        for i in 0..n {
            assert!(
                (klin[i] - sys_c.rhs[i]).abs() < 1e-12,
                "row {i}: {} vs {}",
                klin[i],
                sys_c.rhs[i]
            );
        }
    }

    #[test]
    fn fe_norms_reproduce_polynomials() {
        // u = x on (−1,1)²: ‖u‖² = 4/3, ‖∇u‖² = 4.
        let space = square_space(0.5, 2, false);
        let u: Vec<f64> = space.dof_coords.iter().map(|c| c[0]).collect();
        let (l2, h1) = fe_function_norms(&space, &u, 8).unwrap();
        assert!((l2 * l2 - 4.0 / 3.0).abs() < 1e-12);
        assert!((h1 * h1 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn assembly_is_deterministic_across_runs() {
        let space = square_space(0.4, 2, true);
        let p1 = assemble_magnetic_forms(&space, &FieldKind::Ex2, &ZeroScalar, QuadChoice::Auto)
            .unwrap();
        let p2 = assemble_magnetic_forms(&space, &FieldKind::Ex2, &ZeroScalar, QuadChoice::Auto)
            .unwrap();
        let (d1, d2) = (p1.k.to_dense(), p2.k.to_dense());
        assert!(d1
            .iter()
            .zip(&d2)
            .all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));
    }
}
