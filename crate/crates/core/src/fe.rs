//! Lagrange finite elements of degree 1–3 on triangles, numerical
//! quadrature, and global degree-of-freedom management.
//!
//! Reference element: the unit triangle `{x ≥ 0, y ≥ 0, x + y ≤ 1}` with
//! barycentric coordinates `λ = (1 − x − y, x, y)`. Local DOF order is
//! vertices `0,1,2`, then the interior nodes of the local edges
//! `(1,2), (2,0), (0,1)` (for cubics two per edge, the first being the node
//! nearer the edge's first vertex), then the interior bubble node.
//!
//! Quadrature rules up to degree 5 are compact symmetric point sets; higher
//! degrees use a conical-product construction (Gauss–Jacobi × Gauss–Legendre)
//! whose nodes come from the Golub–Welsch eigenvalue procedure, so every
//! supported degree is generated rather than transcribed. All weights are
//! positive and sum to the reference area 1/2.

use crate::mesh::{Bc, Mesh};
use crate::smalleig::symmetric_eigen;
use crate::{Error, Result};
use std::collections::BTreeMap;

/// Highest quadrature degree served by [`quad_rule`].
pub const MAX_QUAD_DEGREE: usize = 12;

/// A quadrature rule on the reference triangle.
#[derive(Debug, Clone)]
pub struct QuadRule {
    /// Polynomial degree integrated exactly.
    pub degree: usize,
    /// Points in reference coordinates.
    pub points: Vec<[f64; 2]>,
    /// Positive weights summing to 1/2.
    pub weights: Vec<f64>,
}

/// Quadrature rule on the reference triangle, exact for polynomials of the
/// requested total degree.
pub fn quad_rule(degree: usize) -> Result<QuadRule> {
    if degree == 0 {
        return Err(Error::Quadrature("quadrature degree must be at least 1".into()));
    }
    if degree > MAX_QUAD_DEGREE {
        return Err(Error::Quadrature(format!(
            "quadrature degree {degree} exceeds the supported maximum of {MAX_QUAD_DEGREE}"
        )));
    }
    let mut points: Vec<[f64; 2]> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    // Push the three points with barycentric coordinates (b, a, a) and its
    // cyclic relabelings, each carrying weight w.
    let push_sym3 = |a: f64, b: f64, w: f64, points: &mut Vec<[f64; 2]>, weights: &mut Vec<f64>| {
        points.push([a, a]);
        points.push([b, a]);
        points.push([a, b]);
        weights.extend_from_slice(&[w, w, w]);
    };
    match degree {
        1 => {
            points.push([1.0 / 3.0, 1.0 / 3.0]);
            weights.push(0.5);
        }
        2 => {
            push_sym3(1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0, &mut points, &mut weights);
        }
        3 | 4 => {
            push_sym3(
                0.445948490915965,
                0.108103018168070,
                0.223381589678011 / 2.0,
                &mut points,
                &mut weights,
            );
            push_sym3(
                0.091576213509771,
                0.816847572980459,
                0.109951743655322 / 2.0,
                &mut points,
                &mut weights,
            );
        }
        5 => {
            points.push([1.0 / 3.0, 1.0 / 3.0]);
            weights.push(9.0 / 80.0);
            push_sym3(
                0.470142064105115,
                0.059715871789770,
                0.132394152788506 / 2.0,
                &mut points,
                &mut weights,
            );
            push_sym3(
                0.101286507323456,
                0.797426985353087,
                0.125939180544827 / 2.0,
                &mut points,
                &mut weights,
            );
        }
        _ => {
            // Conical product: ∫∫_T f = ∫₀¹ (1−ξ) ∫₀¹ f(ξ, (1−ξ)η) dη dξ,
            // Gauss–Jacobi (weight 1−ξ) in ξ times Gauss–Legendre in η.
            let n = degree / 2 + 1;
            let (xi, wi) = gauss_jacobi_unit(n, 1, 0);
            let (eta, wj) = gauss_jacobi_unit(n, 0, 0);
            for i in 0..n {
                for j in 0..n {
                    points.push([xi[i], (1.0 - xi[i]) * eta[j]]);
                    weights.push(wi[i] * wj[j]);
                }
            }
        }
    }
    Ok(QuadRule { degree, points, weights })
}

/// Gauss rule with `n` points on `[0, 1]` for the weight `(1−x)^α x^β`
/// (integer exponents), exact for polynomial degree `2n − 1`. Nodes and
/// weights come from the Golub–Welsch eigenproblem of the Jacobi-polynomial
/// recurrence.
fn gauss_jacobi_unit(n: usize, alpha: usize, beta: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let (af, bf) = (alpha as f64, beta as f64);
    // Symmetric tridiagonal Jacobi matrix of the orthonormal recurrence
    // on [−1, 1] with weight (1−x)^α (1+x)^β.
    let mut jm = vec![0.0; n * n];
    for k in 0..n {
        let kk = k as f64;
        let den = (2.0 * kk + af + bf) * (2.0 * kk + af + bf + 2.0);
        jm[k * n + k] = if den == 0.0 { 0.0 } else { (bf * bf - af * af) / den };
    }
    for k in 1..n {
        let kk = k as f64;
        let num = kk * (kk + af) * (kk + bf) * (kk + af + bf);
        let den = (2.0 * kk + af + bf + 1.0) * (2.0 * kk + af + bf - 1.0);
        let off = 2.0 / (2.0 * kk + af + bf) * (num / den).sqrt();
        jm[k * n + (k - 1)] = off;
        jm[(k - 1) * n + k] = off;
    }
    let (nodes, vecs) = symmetric_eigen(n, &jm);
    // Total mass ∫₋₁¹ (1−x)^α (1+x)^β dx = 2^{α+β+1} α! β! / (α+β+1)!.
    let fact = |m: usize| (1..=m).map(|v| v as f64).product::<f64>().max(1.0);
    let mu0 = 2f64.powi((alpha + beta + 1) as i32) * fact(alpha) * fact(beta)
        / fact(alpha + beta + 1);
    // Map x ∈ [−1,1] to ξ = (x+1)/2 ∈ [0,1]; the weight transforms by
    // (1−x)^α (1+x)^β dx = 2^{α+β+1} (1−ξ)^α ξ^β dξ.
    let scale = 2f64.powi(-((alpha + beta + 1) as i32));
    let xs: Vec<f64> = nodes.iter().map(|x| (x + 1.0) / 2.0).collect();
    let ws: Vec<f64> =
        (0..n).map(|i| mu0 * vecs[i] * vecs[i] * scale).collect();
    (xs, ws)
}

/// Gauss–Legendre rule with positive weights on `[0, 1]`, exact for the
/// requested polynomial degree. Used for line integrals along edges.
pub fn edge_quad_rule(degree: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if degree == 0 || degree > 40 {
        return Err(Error::Quadrature(format!(
            "edge quadrature degree {degree} outside the supported range 1..=40"
        )));
    }
    Ok(gauss_jacobi_unit(degree / 2 + 1, 0, 0))
}

/// Number of local basis functions of a degree-`p` triangle.
pub fn dofs_per_cell(p: usize) -> usize {
    (p + 1) * (p + 2) / 2
}

/// Values and reference gradients of all local basis functions of degree
/// `p` at a reference point. Local ordering is described in the module
/// docs.
pub fn eval_reference_basis(p: usize, point: [f64; 2]) -> Result<(Vec<f64>, Vec<[f64; 2]>)> {
    let [x, y] = point;
    let l = [1.0 - x - y, x, y];
    // ∇λ = ((−1,−1), (1,0), (0,1)): a barycentric partial vector d maps to
    // the reference gradient (d₁ − d₀, d₂ − d₀).
    let g = |d: [f64; 3]| [d[1] - d[0], d[2] - d[0]];
    let mut values = Vec::with_capacity(dofs_per_cell(p));
    let mut grads = Vec::with_capacity(dofs_per_cell(p));
    match p {
        1 => {
            for i in 0..3 {
                values.push(l[i]);
                let mut d = [0.0; 3];
                d[i] = 1.0;
                grads.push(g(d));
            }
        }
        2 => {
            for i in 0..3 {
                values.push(l[i] * (2.0 * l[i] - 1.0));
                let mut d = [0.0; 3];
                d[i] = 4.0 * l[i] - 1.0;
                grads.push(g(d));
            }
            for (i, j) in [(1, 2), (2, 0), (0, 1)] {
                values.push(4.0 * l[i] * l[j]);
                let mut d = [0.0; 3];
                d[i] = 4.0 * l[j];
                d[j] = 4.0 * l[i];
                grads.push(g(d));
            }
        }
        3 => {
            for i in 0..3 {
                let li = l[i];
                values.push(0.5 * li * (3.0 * li - 1.0) * (3.0 * li - 2.0));
                let mut d = [0.0; 3];
                d[i] = (27.0 * li * li - 18.0 * li + 2.0) / 2.0;
                grads.push(g(d));
            }
            for (i, j) in [(1, 2), (2, 0), (0, 1)] {
                // Node nearer vertex i, then nearer vertex j.
                for (a, b) in [(i, j), (j, i)] {
                    values.push(4.5 * l[i] * l[j] * (3.0 * l[a] - 1.0));
                    let mut d = [0.0; 3];
                    d[a] = 4.5 * l[b] * (6.0 * l[a] - 1.0);
                    d[b] = 4.5 * l[a] * (3.0 * l[a] - 1.0);
                    grads.push(g(d));
                }
            }
            values.push(27.0 * l[0] * l[1] * l[2]);
            grads.push(g([27.0 * l[1] * l[2], 27.0 * l[0] * l[2], 27.0 * l[0] * l[1]]));
        }
        _ => {
            return Err(Error::Space(format!(
                "polynomial degree {p} not supported (1, 2, or 3)"
            )))
        }
    }
    Ok((values, grads))
}

/// Reference coordinates of the local nodes, matching the basis ordering.
pub fn reference_nodes(p: usize) -> Result<Vec<[f64; 2]>> {
    let verts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let mut nodes: Vec<[f64; 2]> = verts.to_vec();
    match p {
        1 => {}
        2 => {
            for (i, j) in [(1usize, 2usize), (2, 0), (0, 1)] {
                nodes.push([
                    (verts[i][0] + verts[j][0]) / 2.0,
                    (verts[i][1] + verts[j][1]) / 2.0,
                ]);
            }
        }
        3 => {
            for (i, j) in [(1usize, 2usize), (2, 0), (0, 1)] {
                for (a, b) in [(i, j), (j, i)] {
                    nodes.push([
                        (2.0 * verts[a][0] + verts[b][0]) / 3.0,
                        (2.0 * verts[a][1] + verts[b][1]) / 3.0,
                    ]);
                }
            }
            nodes.push([1.0 / 3.0, 1.0 / 3.0]);
        }
        _ => {
            return Err(Error::Space(format!(
                "polynomial degree {p} not supported (1, 2, or 3)"
            )))
        }
    }
    Ok(nodes)
}

/// Basis values and reference gradients pre-evaluated at every point of a
/// quadrature rule, laid out as `[q * ndof + i]`.
#[derive(Debug, Clone)]
pub struct BasisTable {
    pub ndof: usize,
    pub nq: usize,
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
}

/// Evaluate all degree-`p` basis functions at the points of `rule`.
pub fn tabulate_basis(p: usize, rule: &QuadRule) -> Result<BasisTable> {
    let ndof = dofs_per_cell(p);
    let nq = rule.points.len();
    let mut values = Vec::with_capacity(nq * ndof);
    let mut grads = Vec::with_capacity(nq * ndof);
    for &pt in &rule.points {
        let (v, g) = eval_reference_basis(p, pt)?;
        values.extend_from_slice(&v);
        grads.extend_from_slice(&g);
    }
    Ok(BasisTable { ndof, nq, values, grads })
}

/// Affine map data of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    /// Image of the reference origin (first vertex).
    pub origin: [f64; 2],
    /// Jacobian, row-major; columns are the edge vectors v1−v0 and v2−v0.
    pub jac: [[f64; 2]; 2],
    /// Jacobian determinant (twice the area; positive for CCW cells).
    pub det: f64,
    /// Inverse transpose of the Jacobian (gradient pushforward).
    pub inv_t: [[f64; 2]; 2],
}

impl CellGeometry {
    /// Map a reference point to physical coordinates.
    pub fn map(&self, xi: [f64; 2]) -> [f64; 2] {
        [
            self.origin[0] + self.jac[0][0] * xi[0] + self.jac[0][1] * xi[1],
            self.origin[1] + self.jac[1][0] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }

    /// Push a reference gradient forward to physical coordinates.
    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv_t[0][0] * g[0] + self.inv_t[0][1] * g[1],
            self.inv_t[1][0] * g[0] + self.inv_t[1][1] * g[1],
        ]
    }

    /// Pull a physical point back to reference coordinates.
    pub fn inverse_map(&self, x: [f64; 2]) -> [f64; 2] {
        let dx = x[0] - self.origin[0];
        let dy = x[1] - self.origin[1];
        [
            (self.jac[1][1] * dx - self.jac[0][1] * dy) / self.det,
            (-self.jac[1][0] * dx + self.jac[0][0] * dy) / self.det,
        ]
    }

    pub fn area(&self) -> f64 {
        self.det / 2.0
    }
}

/// Geometry of triangle `t` of `mesh`.
pub fn cell_geometry(mesh: &Mesh, t: usize) -> CellGeometry {
    let [a, b, c] = mesh.triangles[t];
    let (pa, pb, pc) = (mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
    let jac = [[pb[0] - pa[0], pc[0] - pa[0]], [pb[1] - pa[1], pc[1] - pa[1]]];
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    let inv_t = [
        [jac[1][1] / det, -jac[1][0] / det],
        [-jac[0][1] / det, jac[0][0] / det],
    ];
    CellGeometry { origin: pa, jac, det, inv_t }
}

/// A global continuous Lagrange space with its Dirichlet constraints.
#[derive(Debug, Clone)]
pub struct FeSpace {
    pub mesh: Mesh,
    pub degree: usize,
    /// Flattened cell connectivity: `dofs_per_cell` global indices per cell.
    pub cell_dofs: Vec<usize>,
    pub dofs_per_cell: usize,
    pub num_dofs: usize,
    /// Location of every global DOF.
    pub dof_coords: Vec<[f64; 2]>,
    /// Sorted list of edges as ascending vertex pairs (empty for p = 1).
    pub edges: Vec<[usize; 2]>,
    /// Sorted global indices of Dirichlet-constrained DOFs.
    pub essential_dofs: Vec<usize>,
    /// Global index of each unconstrained DOF, ascending.
    pub free_dofs: Vec<usize>,
    /// Inverse of `free_dofs`; `usize::MAX` marks an essential DOF.
    pub full_to_free: Vec<usize>,
    /// Per boundary edge (aligned with `mesh.boundary_edges`): adjacent
    /// triangle and the local vertex indices of the edge endpoints.
    pub boundary_adjacency: Vec<(usize, [u8; 2])>,
}

impl FeSpace {
    /// Global DOF indices of cell `t` in local basis order.
    pub fn cell_dofs(&self, t: usize) -> &[usize] {
        &self.cell_dofs[t * self.dofs_per_cell..(t + 1) * self.dofs_per_cell]
    }

    pub fn num_free(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn is_essential(&self, dof: usize) -> bool {
        self.full_to_free[dof] == usize::MAX
    }
}

/// Build a degree-`p` space on `mesh`, marking DOFs on boundary parts
/// mapped to [`Bc::Dirichlet`] as essential. Every marker appearing in the
/// mesh must have an assigned condition.
pub fn build_space(mesh: Mesh, p: usize, bc: &BTreeMap<i32, Bc>) -> Result<FeSpace> {
    if !(1..=3).contains(&p) {
        return Err(Error::Space(format!(
            "polynomial degree {p} not supported (1, 2, or 3)"
        )));
    }
    for &(_, marker) in &mesh.boundary_edges {
        if !bc.contains_key(&marker) {
            return Err(Error::Space(format!(
                "boundary marker {marker} has no boundary condition assigned"
            )));
        }
    }

    let nv = mesh.vertices.len();
    let nt = mesh.triangles.len();
    let sorted2 = |a: usize, b: usize| if a < b { [a, b] } else { [b, a] };

    let mut edges: Vec<[usize; 2]> = Vec::with_capacity(3 * nt);
    for t in &mesh.triangles {
        edges.push(sorted2(t[1], t[2]));
        edges.push(sorted2(t[2], t[0]));
        edges.push(sorted2(t[0], t[1]));
    }
    edges.sort_unstable();
    edges.dedup();
    let ne = edges.len();
    let edge_of = |a: usize, b: usize| edges.binary_search(&sorted2(a, b)).unwrap();

    let per_edge = p - 1;
    let num_dofs = match p {
        1 => nv,
        2 => nv + ne,
        _ => nv + 2 * ne + nt,
    };

    let dpc = dofs_per_cell(p);
    let mut cell_dofs = Vec::with_capacity(nt * dpc);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        cell_dofs.extend_from_slice(tri);
        if p >= 2 {
            for (i, j) in [(1usize, 2usize), (2, 0), (0, 1)] {
                let (gi, gj) = (tri[i], tri[j]);
                let e = edge_of(gi, gj);
                match p {
                    2 => cell_dofs.push(nv + e),
                    _ => {
                        // Slot 0 of the edge belongs to the node nearer the
                        // globally smaller vertex.
                        if gi < gj {
                            cell_dofs.push(nv + 2 * e);
                            cell_dofs.push(nv + 2 * e + 1);
                        } else {
                            cell_dofs.push(nv + 2 * e + 1);
                            cell_dofs.push(nv + 2 * e);
                        }
                    }
                }
            }
        }
        if p == 3 {
            cell_dofs.push(nv + 2 * ne + t);
        }
    }

    let mut dof_coords = mesh.vertices.clone();
    dof_coords.reserve(num_dofs - nv);
    if p == 2 {
        for &[a, b] in &edges {
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            dof_coords.push([(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0]);
        }
    } else if p == 3 {
        for &[a, b] in &edges {
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            dof_coords.push([(2.0 * pa[0] + pb[0]) / 3.0, (2.0 * pa[1] + pb[1]) / 3.0]);
            dof_coords.push([(pa[0] + 2.0 * pb[0]) / 3.0, (pa[1] + 2.0 * pb[1]) / 3.0]);
        }
        for t in 0..nt {
            let [a, b, c] = mesh.triangles[t];
            let (pa, pb, pc) = (mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
            dof_coords.push([
                (pa[0] + pb[0] + pc[0]) / 3.0,
                (pa[1] + pb[1] + pc[1]) / 3.0,
            ]);
        }
    }

    // Edge → (triangle, local edge index); boundary edges are incident to
    // exactly one triangle on a valid mesh.
    let mut edge_tri: BTreeMap<[usize; 2], (usize, usize)> = BTreeMap::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for (k, (i, j)) in [(1usize, 2usize), (2, 0), (0, 1)].into_iter().enumerate() {
            edge_tri.entry(sorted2(tri[i], tri[j])).or_insert((t, k));
        }
    }
    let mut boundary_adjacency = Vec::with_capacity(mesh.boundary_edges.len());
    for &([a, b], _) in &mesh.boundary_edges {
        let &(t, _) = edge_tri.get(&sorted2(a, b)).ok_or_else(|| {
            Error::Space(format!("boundary edge ({a}, {b}) is not an edge of any triangle"))
        })?;
        let tri = mesh.triangles[t];
        let local = |v: usize| tri.iter().position(|&w| w == v).unwrap() as u8;
        boundary_adjacency.push((t, [local(a), local(b)]));
    }

    let mut essential: Vec<usize> = Vec::new();
    for &([a, b], marker) in &mesh.boundary_edges {
        if bc[&marker] != Bc::Dirichlet {
            continue;
        }
        essential.push(a);
        essential.push(b);
        if p >= 2 {
            let e = edge_of(a, b);
            for s in 0..per_edge {
                essential.push(nv + per_edge * e + s);
            }
        }
    }
    essential.sort_unstable();
    essential.dedup();

    let mut full_to_free = vec![usize::MAX; num_dofs];
    for &d in &essential {
        full_to_free[d] = usize::MAX - 1; // temporary tag
    }
    let mut free_dofs = Vec::with_capacity(num_dofs - essential.len());
    for d in 0..num_dofs {
        if full_to_free[d] == usize::MAX {
            full_to_free[d] = free_dofs.len();
            free_dofs.push(d);
        } else {
            full_to_free[d] = usize::MAX;
        }
    }

    Ok(FeSpace {
        mesh,
        degree: p,
        cell_dofs,
        dofs_per_cell: dpc,
        num_dofs,
        dof_coords,
        edges,
        essential_dofs: essential,
        free_dofs,
        full_to_free,
        boundary_adjacency,
    })
}
