//! Post-solve validation artifacts.
//!
//! Three consumers of a computed [`EigenResult`] live here:
//!
//! * [`heuristic_table`] reports, per eigenpair, the norms `‖∇u_j‖`,
//!   `‖G·u_j‖`, `‖u_j‖` together with the flux-form value
//!   `‖∇u_j − iGu_j‖² + ∫V|u_j|²`. The latter reproduces the eigenvalue
//!   exactly in the discrete setting, which makes the table a strong
//!   self-check as well as the vehicle for observing how the canonical
//!   gauge shrinks `‖∇u‖` relative to the original potential.
//! * [`gauge_pair_compare`] quantifies the unitary equivalence of the two
//!   gauges pair by pair: eigenvalue agreement, equality of moduli, and
//!   the phase relation `ψ ≈ c·e^{ia_h}φ` up to a unit scalar.
//! * [`sample_eigenvector`] evaluates a coefficient vector on a uniform
//!   grid over the mesh bounding box for plotting, with the phase
//!   computed as `arcsin(Im z/|z|)` (the quadrant-folding convention is
//!   deliberate; see [`SampleGrid::phase`]).
//!
//! Everything here is pure post-processing over immutable inputs.

use crate::assemble::{HermitianPencil, QuadChoice};
use crate::eig::EigenResult;
use crate::fe::{cell_geometry, eval_reference_basis, quad_rule, tabulate_basis, FeSpace};
use crate::gauge::{piecewise_field_norm, GaugeField};
use crate::mesh::PointLocator;
use crate::potentials::{ScalarPotential, VectorPotential};
use crate::{C64, Result};

/// Per-eigenpair norms of [`heuristic_table`], plus the field norm of the
/// potential the pairs were computed with.
#[derive(Debug, Clone)]
pub struct HeuristicTable {
    /// `λ_j`, copied from the eigensolve.
    pub eigenvalues: Vec<f64>,
    /// `‖∇u_j‖`.
    pub grad_norms: Vec<f64>,
    /// `‖G·u_j‖` for the vector potential `G` the operator used.
    pub field_norms: Vec<f64>,
    /// `‖u_j‖`; 1 for M-normalized eigenvectors.
    pub l2_norms: Vec<f64>,
    /// `‖∇u_j − iGu_j‖² + ∫V|u_j|²`; coincides with `λ_j` to quadrature
    /// and solver precision.
    pub form_values: Vec<f64>,
    /// `‖G‖` over the domain.
    pub field_norm: f64,
}

/// Norm table of a computed eigenresult under the vector potential `field`
/// and scalar potential `potential` that defined its operator.
///
/// One quadrature pass per cell covers all eigenvectors at once; the rule
/// follows the same exactness policy as assembly, so `form_values`
/// reproduces the discrete eigenvalues rather than merely approximating
/// the continuum identity.
pub fn heuristic_table(
    space: &FeSpace,
    result: &EigenResult,
    field: &dyn VectorPotential,
    potential: &dyn ScalarPotential,
    quad: QuadChoice,
) -> Result<HeuristicTable> {
    let all_polynomial =
        field.polynomial_degree().is_some() && potential.polynomial_degree().is_some();
    let degree = quad.resolve(space.degree, all_polynomial);
    let rule = quad_rule(degree)?;
    let table = tabulate_basis(space.degree, &rule)?;
    let nd = table.ndof;
    let mesh = &space.mesh;
    let k = result.vectors.len();

    // Per vector: ‖u‖², ‖∇u‖², ‖Gu‖², form value.
    let mut acc = vec![[0.0f64; 4]; k];
    let mut grads = vec![[0.0f64; 2]; nd];
    for t in 0..mesh.triangles.len() {
        let geo = cell_geometry(mesh, t);
        let dofs = space.cell_dofs(t);
        for q in 0..table.nq {
            let w = rule.weights[q] * geo.det;
            let x = geo.map(rule.points[q]);
            let g = field.eval_on_cell(t, x[0], x[1]);
            let v = potential.eval(x[0], x[1]);
            for i in 0..nd {
                grads[i] = geo.grad(table.grads[q * nd + i]);
            }
            for (j, a) in acc.iter_mut().enumerate() {
                let coeffs = &result.vectors[j];
                let mut u = C64::new(0.0, 0.0);
                let mut ux = C64::new(0.0, 0.0);
                let mut uy = C64::new(0.0, 0.0);
                for i in 0..nd {
                    let c = coeffs[dofs[i]];
                    u += c.scale(table.values[q * nd + i]);
                    ux += c.scale(grads[i][0]);
                    uy += c.scale(grads[i][1]);
                }
                let u2 = u.norm_sqr();
                a[0] += w * u2;
                a[1] += w * (ux.norm_sqr() + uy.norm_sqr());
                a[2] += w * (g[0] * g[0] + g[1] * g[1]) * u2;
                // (∇ - iG)u componentwise.
                let fx = ux - (C64::i() * u).scale(g[0]);
                let fy = uy - (C64::i() * u).scale(g[1]);
                a[3] += w * (fx.norm_sqr() + fy.norm_sqr() + v * u2);
            }
        }
    }

    Ok(HeuristicTable {
        eigenvalues: result.values.clone(),
        grad_norms: acc.iter().map(|a| a[1].sqrt()).collect(),
        field_norms: acc.iter().map(|a| a[2].sqrt()).collect(),
        l2_norms: acc.iter().map(|a| a[0].sqrt()).collect(),
        form_values: acc.iter().map(|a| a[3]).collect(),
        field_norm: piecewise_field_norm(space, field, degree)?,
    })
}

/// Algebraic Rayleigh quotients `xᴴKx / xᴴMx` of every computed pair.
///
/// These agree with the reported eigenvalues to machine precision
/// (`≤ 1e-12·|λ|`); any larger defect indicates a solver or assembly bug,
/// not discretization error.
pub fn rayleigh_quotients(pencil: &HermitianPencil, result: &EigenResult) -> Vec<f64> {
    let n = pencil.k.nrows();
    let mut kx = vec![C64::new(0.0, 0.0); n];
    let mut mx = vec![C64::new(0.0, 0.0); n];
    result
        .vectors
        .iter()
        .map(|full| {
            let x: Vec<C64> = pencil.free_dofs.iter().map(|&d| full[d]).collect();
            pencil.k.matvec(&x, &mut kx);
            pencil.m.matvec_complex(&x, &mut mx);
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..n {
                num += (x[i].conj() * kx[i]).re;
                den += (x[i].conj() * mx[i]).re;
            }
            num / den
        })
        .collect()
}

/// Pairwise comparison of the two gauges produced by [`gauge_pair_compare`].
#[derive(Debug, Clone)]
pub struct GaugePairReport {
    /// Indices of the eigenpairs isolated enough to compare one-to-one.
    pub compared: Vec<usize>,
    /// `|λ_j^A − λ_j^F|` per compared pair.
    pub value_gaps: Vec<f64>,
    /// `‖ |ψ_j| − |φ_j| ‖` per compared pair (0 in the continuum).
    pub modulus_deviations: Vec<f64>,
    /// `min_{|c|=1} ‖ψ_j − c·e^{ia_h}φ_j‖` per compared pair.
    pub phase_residuals: Vec<f64>,
}

/// Compare eigenpairs of `H(A,V)` against those of `H(F,V)` through the
/// gauge relation `ψ = c·e^{ia_h}φ`.
///
/// Only pairs whose distance to the neighboring eigenvalues exceeds
/// `1e-4·|λ_j|` in **both** results are compared: inside a numerically
/// degenerate cluster the individual vectors are arbitrary rotations of
/// the eigenspace basis, and only subspace angles (out of scope here)
/// would be meaningful.
pub fn gauge_pair_compare<P: VectorPotential>(
    space: &FeSpace,
    result_a: &EigenResult,
    result_f: &EigenResult,
    gauge: &GaugeField<P>,
) -> Result<GaugePairReport> {
    let k = result_a.values.len().min(result_f.values.len());
    let isolated = |vals: &[f64], j: usize| -> bool {
        let tol = 1e-4 * vals[j].abs().max(f64::MIN_POSITIVE);
        let below = j == 0 || (vals[j] - vals[j - 1]).abs() > tol;
        let above = j + 1 >= vals.len() || (vals[j + 1] - vals[j]).abs() > tol;
        below && above
    };
    let compared: Vec<usize> = (0..k)
        .filter(|&j| isolated(&result_a.values, j) && isolated(&result_f.values, j))
        .collect();

    let rule = quad_rule(gauge.quad_degree)?;
    let table = tabulate_basis(space.degree, &rule)?;
    let nd = table.ndof;
    let mesh = &space.mesh;

    // Per compared pair: ∫(|ψ|−|φ|)², ⟨ψ, e^{ia}φ⟩, ‖ψ‖², ‖φ‖².
    let mut mod2 = vec![0.0f64; compared.len()];
    let mut inner = vec![C64::new(0.0, 0.0); compared.len()];
    let mut npsi2 = vec![0.0f64; compared.len()];
    let mut nphi2 = vec![0.0f64; compared.len()];
    for t in 0..mesh.triangles.len() {
        let geo = cell_geometry(mesh, t);
        let dofs = space.cell_dofs(t);
        let gdofs = gauge.space.cell_dofs(t);
        for q in 0..table.nq {
            let w = rule.weights[q] * geo.det;
            let mut a_h = 0.0;
            for i in 0..nd {
                a_h += gauge.gauge_fn[gdofs[i]] * table.values[q * nd + i];
            }
            let phase = C64::from_polar(1.0, a_h);
            for (s, &j) in compared.iter().enumerate() {
                let mut psi = C64::new(0.0, 0.0);
                let mut phi = C64::new(0.0, 0.0);
                for i in 0..nd {
                    let b = table.values[q * nd + i];
                    psi += result_a.vectors[j][dofs[i]].scale(b);
                    phi += result_f.vectors[j][dofs[i]].scale(b);
                }
                let d = psi.norm() - phi.norm();
                mod2[s] += w * d * d;
                inner[s] += (psi * (phase * phi).conj()).scale(w);
                npsi2[s] += w * psi.norm_sqr();
                nphi2[s] += w * phi.norm_sqr();
            }
        }
    }

    let value_gaps =
        compared.iter().map(|&j| (result_a.values[j] - result_f.values[j]).abs()).collect();
    let modulus_deviations = mod2.iter().map(|v| v.sqrt()).collect();
    let phase_residuals = (0..compared.len())
        .map(|s| (npsi2[s] + nphi2[s] - 2.0 * inner[s].norm()).max(0.0).sqrt())
        .collect();
    Ok(GaugePairReport { compared, value_gaps, modulus_deviations, phase_residuals })
}

/// Uniform-grid samples of a single eigenvector, produced by
/// [`sample_eigenvector`]. Arrays are row-major (`iy * nx + ix`); entries
/// at grid points outside the mesh are `NaN` and flagged in `inside`.
#[derive(Debug, Clone)]
pub struct SampleGrid {
    pub nx: usize,
    pub ny: usize,
    /// Grid abscissae over the bounding box, length `nx`.
    pub xs: Vec<f64>,
    /// Grid ordinates over the bounding box, length `ny`.
    pub ys: Vec<f64>,
    /// Whether the grid point lies in some mesh cell.
    pub inside: Vec<bool>,
    /// `|u|` samples.
    pub modulus: Vec<f64>,
    /// `Re u` samples.
    pub re: Vec<f64>,
    /// `Im u` samples.
    pub im: Vec<f64>,
    /// `arcsin(Im u/|u|)` samples — the quadrant-folding convention used
    /// by the plots this feeds; `|u| < 1e-14` maps to phase 0.
    pub phase: Vec<f64>,
}

/// Evaluate the FE function with coefficients `vector` on an `n×n` grid
/// over the mesh bounding box.
pub fn sample_eigenvector(space: &FeSpace, vector: &[C64], n: usize) -> Result<SampleGrid> {
    assert_eq!(vector.len(), space.num_dofs);
    assert!(n >= 2, "grid needs at least 2 points per side");
    let mesh = &space.mesh;
    let (mut xmin, mut ymin) = (f64::INFINITY, f64::INFINITY);
    let (mut xmax, mut ymax) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for v in &mesh.vertices {
        xmin = xmin.min(v[0]);
        xmax = xmax.max(v[0]);
        ymin = ymin.min(v[1]);
        ymax = ymax.max(v[1]);
    }
    let lin = |a: f64, b: f64, i: usize| a + (b - a) * i as f64 / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| lin(xmin, xmax, i)).collect();
    let ys: Vec<f64> = (0..n).map(|i| lin(ymin, ymax, i)).collect();

    let locator = PointLocator::new(mesh);
    let mut inside = vec![false; n * n];
    let mut modulus = vec![f64::NAN; n * n];
    let mut re = vec![f64::NAN; n * n];
    let mut im = vec![f64::NAN; n * n];
    let mut phase = vec![f64::NAN; n * n];
    for (iy, &y) in ys.iter().enumerate() {
        for (ix, &x) in xs.iter().enumerate() {
            let Some(t) = locator.locate(mesh, x, y) else { continue };
            let geo = cell_geometry(mesh, t);
            let (vals, _) = eval_reference_basis(space.degree, geo.inverse_map([x, y]))?;
            let dofs = space.cell_dofs(t);
            let mut u = C64::new(0.0, 0.0);
            for (i, &d) in dofs.iter().enumerate() {
                u += vector[d].scale(vals[i]);
            }
            let g = iy * n + ix;
            inside[g] = true;
            modulus[g] = u.norm();
            re[g] = u.re;
            im[g] = u.im;
            phase[g] = if u.norm() < 1e-14 { 0.0 } else { (u.im / u.norm()).clamp(-1.0, 1.0).asin() };
        }
    }
    Ok(SampleGrid { nx: n, ny: n, xs, ys, inside, modulus, re, im, phase })
}
