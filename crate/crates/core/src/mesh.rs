//! Triangle meshes of polygonal domains: structured generators for the
//! square `(-1,1)²` and the L-shape `(0,3)² \ [2,3]²`, an ASCII exchange
//! format for externally generated meshes (holes, graded refinements),
//! structural validation, and uniform nested refinement.
//!
//! Conventions: triangles are counterclockwise, boundary edges carry an
//! integer marker (`1` = outer boundary, `2 + k` = k-th hole), and `h_max`
//! is the longest edge length in the mesh.

use crate::{Error, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

/// Boundary condition attached to a boundary marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bc {
    Dirichlet,
    Neumann,
}

/// How to obtain the computational domain.
#[derive(Debug, Clone)]
pub enum DomainKind {
    /// The square `(-1,1)²`, crossed-diagonal structured triangulation.
    Square,
    /// The L-shape `(0,3)² \ [2,3]²`, crossed-diagonal structured
    /// triangulation aligned with the reentrant corner at `(2,2)`.
    LShape,
    /// A mesh file in the ASCII format of [`load_mesh`]. Domains with
    /// holes enter this way; the hole boundary markers (`2`, `3`, ...)
    /// come from the file.
    File(PathBuf),
}

/// Domain description plus the boundary-condition assignment per marker.
#[derive(Debug, Clone)]
pub struct DomainSpec {
    pub kind: DomainKind,
    /// Marker → boundary condition. Every marker present in the mesh must
    /// be assigned; [`crate::fe::build_space`] rejects unassigned markers.
    pub bc: BTreeMap<i32, Bc>,
}

impl DomainSpec {
    /// All-markers-Dirichlet spec for a generated domain.
    pub fn dirichlet(kind: DomainKind) -> Self {
        let mut bc = BTreeMap::new();
        bc.insert(1, Bc::Dirichlet);
        DomainSpec { kind, bc }
    }

    /// All-markers-Neumann spec for a generated domain.
    pub fn neumann(kind: DomainKind) -> Self {
        let mut bc = BTreeMap::new();
        bc.insert(1, Bc::Neumann);
        DomainSpec { kind, bc }
    }

    /// Build the mesh at target edge length `h` (ignored for file domains).
    pub fn build_mesh(&self, h: f64) -> Result<Mesh> {
        match &self.kind {
            DomainKind::Square => generate_square(h),
            DomainKind::LShape => generate_lshape(h),
            DomainKind::File(path) => {
                let text = std::fs::read_to_string(path)?;
                let (mesh, _) = load_mesh(&text)?;
                Ok(mesh)
            }
        }
    }
}

/// A conforming triangulation.
#[derive(Debug, Clone)]
pub struct Mesh {
    /// Vertex coordinates.
    pub vertices: Vec<[f64; 2]>,
    /// Counterclockwise vertex index triples.
    pub triangles: Vec<[usize; 3]>,
    /// Boundary edges as (vertex pair, marker). Exactly the edges incident
    /// to a single triangle.
    pub boundary_edges: Vec<([usize; 2], i32)>,
    /// Longest edge length over all triangles.
    pub h_max: f64,
}

/// Findings of [`validate_mesh`]; also handy for `mesh-info` style output.
#[derive(Debug, Clone)]
pub struct MeshReport {
    pub num_vertices: usize,
    pub num_triangles: usize,
    pub num_edges: usize,
    pub num_boundary_edges: usize,
    /// Boundary connected components (outer boundary counts as one).
    pub boundary_components: usize,
    /// Holes inferred from the Euler characteristic `V - E + T = 1 - holes`.
    pub holes: usize,
    pub area: f64,
    pub h_max: f64,
    /// Distinct boundary markers, sorted.
    pub markers: Vec<i32>,
}

/// Parse outcome details from [`load_mesh`].
#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    /// Number of triangles that were stored clockwise in the file and have
    /// been reoriented.
    pub reoriented: usize,
}

fn tri_signed_area(v: &[[f64; 2]], t: &[usize; 3]) -> f64 {
    let a = v[t[0]];
    let b = v[t[1]];
    let c = v[t[2]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn longest_edge(v: &[[f64; 2]], triangles: &[[usize; 3]]) -> f64 {
    let mut h: f64 = 0.0;
    for t in triangles {
        for k in 0..3 {
            let a = v[t[k]];
            let b = v[t[(k + 1) % 3]];
            h = h.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
        }
    }
    h
}

/// Structured crossed-diagonal triangulation of the square `(-1,1)²` with
/// `n = ceil(2/h)` cells per side; each cell is split into 4 triangles
/// about its center, so the longest edge is the cell side `2/n ≤ h`.
pub fn generate_square(h: f64) -> Result<Mesh> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::MeshGeneration(format!("h must be positive, got {h}")));
    }
    if h >= 2.0 {
        return Err(Error::MeshGeneration(format!(
            "h = {h} yields a degenerate single-cell mesh of (-1,1)²; need h < 2"
        )));
    }
    generate_square_n((2.0 / h).ceil() as usize)
}

/// [`generate_square`] with the cell count per side given directly, for
/// callers that must align the mesh with an external grid.
pub fn generate_square_n(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::MeshGeneration("cell count must be at least 1".into()));
    }
    let np = n + 1;
    let coord = |i: usize| -1.0 + 2.0 * i as f64 / n as f64;

    let mut vertices = Vec::with_capacity(np * np + n * n);
    for j in 0..np {
        for i in 0..np {
            vertices.push([coord(i), coord(j)]);
        }
    }
    // Cell centers follow the grid vertices in the numbering.
    for j in 0..n {
        for i in 0..n {
            vertices.push([0.5 * (coord(i) + coord(i + 1)), 0.5 * (coord(j) + coord(j + 1))]);
        }
    }

    let g = |i: usize, j: usize| j * np + i;
    let center = |i: usize, j: usize| np * np + j * n + i;
    let mut triangles = Vec::with_capacity(4 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (sw, se, ne, nw) = (g(i, j), g(i + 1, j), g(i + 1, j + 1), g(i, j + 1));
            let c = center(i, j);
            triangles.push([sw, se, c]);
            triangles.push([se, ne, c]);
            triangles.push([ne, nw, c]);
            triangles.push([nw, sw, c]);
        }
    }

    let mut boundary_edges = Vec::with_capacity(4 * n);
    for i in 0..n {
        boundary_edges.push(([g(i, 0), g(i + 1, 0)], 1)); // bottom
    }
    for j in 0..n {
        boundary_edges.push(([g(np - 1, j), g(np - 1, j + 1)], 1)); // right
    }
    for i in (0..n).rev() {
        boundary_edges.push(([g(i + 1, np - 1), g(i, np - 1)], 1)); // top
    }
    for j in (0..n).rev() {
        boundary_edges.push(([g(0, j + 1), g(0, j)], 1)); // left
    }

    let h_max = longest_edge(&vertices, &triangles);
    Ok(Mesh { vertices, triangles, boundary_edges, h_max })
}

/// Structured crossed-diagonal triangulation of the L-shape
/// `(0,3)² \ [2,3]²` (area 8, reentrant corner at `(2,2)`) with
/// `m = ceil(1/h)` cells per unit length.
pub fn generate_lshape(h: f64) -> Result<Mesh> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::MeshGeneration(format!("h must be positive, got {h}")));
    }
    if h > 1.0 {
        return Err(Error::MeshGeneration(format!(
            "h = {h} cannot resolve the reentrant corner of the L-shape; need h ≤ 1"
        )));
    }
    let m = (1.0 / h).ceil() as usize;
    let n = 3 * m; // grid cells per full side of the bounding square
    let np = n + 1;
    let coord = |i: usize| i as f64 / m as f64;
    let in_domain = |ci: usize, cj: usize| !(ci >= 2 * m && cj >= 2 * m);

    // Grid vertices outside the open hole, in row-major order; a dense
    // index map keeps cell → vertex lookups O(1).
    let mut grid_id = vec![usize::MAX; np * np];
    let mut vertices = Vec::new();
    for j in 0..np {
        for i in 0..np {
            if i > 2 * m && j > 2 * m {
                continue; // strictly inside the hole
            }
            grid_id[j * np + i] = vertices.len();
            vertices.push([coord(i), coord(j)]);
        }
    }
    let mut center_id = vec![usize::MAX; n * n];
    for cj in 0..n {
        for ci in 0..n {
            if in_domain(ci, cj) {
                center_id[cj * n + ci] = vertices.len();
                vertices.push([
                    0.5 * (coord(ci) + coord(ci + 1)),
                    0.5 * (coord(cj) + coord(cj + 1)),
                ]);
            }
        }
    }

    let g = |i: usize, j: usize| grid_id[j * np + i];
    let mut triangles = Vec::new();
    let mut boundary_edges = Vec::new();
    for cj in 0..n {
        for ci in 0..n {
            if !in_domain(ci, cj) {
                continue;
            }
            let (sw, se, ne, nw) = (g(ci, cj), g(ci + 1, cj), g(ci + 1, cj + 1), g(ci, cj + 1));
            let c = center_id[cj * n + ci];
            triangles.push([sw, se, c]);
            triangles.push([se, ne, c]);
            triangles.push([ne, nw, c]);
            triangles.push([nw, sw, c]);
            // Sides not shared with another in-domain cell are boundary.
            if cj == 0 || !in_domain(ci, cj - 1) {
                boundary_edges.push(([sw, se], 1));
            }
            if ci + 1 == n || !in_domain(ci + 1, cj) {
                boundary_edges.push(([se, ne], 1));
            }
            if cj + 1 == n || !in_domain(ci, cj + 1) {
                boundary_edges.push(([ne, nw], 1));
            }
            if ci == 0 || !in_domain(ci - 1, cj) {
                boundary_edges.push(([nw, sw], 1));
            }
        }
    }

    let h_max = longest_edge(&vertices, &triangles);
    Ok(Mesh { vertices, triangles, boundary_edges, h_max })
}

/// Uniform nested refinement: each triangle splits into 4 via edge
/// midpoints, boundary edges split in two and inherit their marker. The
/// refined vertex set contains the parent's, so FE spaces on the refined
/// mesh contain those on the parent (used by the monotonicity checks on
/// nested meshes).
pub fn refine_uniform(mesh: &Mesh) -> Mesh {
    let mut vertices = mesh.vertices.clone();
    let mut midpoint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut mid = |a: usize, b: usize, vertices: &mut Vec<[f64; 2]>| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoint.entry(key).or_insert_with(|| {
            let p = [
                0.5 * (vertices[a][0] + vertices[b][0]),
                0.5 * (vertices[a][1] + vertices[b][1]),
            ];
            vertices.push(p);
            vertices.len() - 1
        })
    };

    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    for t in &mesh.triangles {
        let m01 = mid(t[0], t[1], &mut vertices);
        let m12 = mid(t[1], t[2], &mut vertices);
        let m20 = mid(t[2], t[0], &mut vertices);
        triangles.push([t[0], m01, m20]);
        triangles.push([t[1], m12, m01]);
        triangles.push([t[2], m20, m12]);
        triangles.push([m01, m12, m20]);
    }

    let mut boundary_edges = Vec::with_capacity(2 * mesh.boundary_edges.len());
    for &([a, b], marker) in &mesh.boundary_edges {
        let m = mid(a, b, &mut vertices);
        boundary_edges.push(([a, m], marker));
        boundary_edges.push(([m, b], marker));
    }

    let h_max = longest_edge(&vertices, &triangles);
    Mesh { vertices, triangles, boundary_edges, h_max }
}

/// Parse the ASCII mesh format:
///
/// ```text
/// # comment lines and blank lines are ignored anywhere
/// nv nt nb
/// x y            (nv vertex lines)
/// i j k          (nt triangle lines, 0-based vertex indices)
/// i j marker     (nb boundary edge lines)
/// ```
///
/// Clockwise triangles are accepted and silently reoriented; the count is
/// reported. The parsed mesh must pass [`validate_mesh`].
pub fn load_mesh(text: &str) -> Result<(Mesh, LoadReport)> {
    // Token stream with line tracking for error messages.
    let mut tokens: Vec<(usize, &str)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("");
        for tok in content.split_whitespace() {
            tokens.push((lineno + 1, tok));
        }
    }
    struct Cursor<'a> {
        tokens: Vec<(usize, &'a str)>,
        pos: usize,
    }
    impl<'a> Cursor<'a> {
        fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
            if self.pos >= self.tokens.len() {
                let line = self.tokens.last().map_or(1, |t| t.0);
                return Err(Error::MeshParse {
                    line,
                    msg: format!("unexpected end of file, expected {what}"),
                });
            }
            self.pos += 1;
            Ok(self.tokens[self.pos - 1])
        }
        fn next_usize(&mut self, what: &str) -> Result<usize> {
            let (line, tok) = self.next(what)?;
            tok.parse::<usize>().map_err(|_| Error::MeshParse {
                line,
                msg: format!("expected {what} (non-negative integer), got '{tok}'"),
            })
        }
        fn next_f64(&mut self, what: &str) -> Result<f64> {
            let (line, tok) = self.next(what)?;
            tok.parse::<f64>().map_err(|_| Error::MeshParse {
                line,
                msg: format!("expected {what} (number), got '{tok}'"),
            })
        }
        fn next_index(&mut self, what: &str, nv: usize) -> Result<(usize, usize)> {
            let (line, tok) = self.next(what)?;
            let v = tok.parse::<usize>().map_err(|_| Error::MeshParse {
                line,
                msg: format!("expected {what} (0-based index), got '{tok}'"),
            })?;
            if v >= nv {
                return Err(Error::MeshParse {
                    line,
                    msg: format!("{what} {v} out of range (nv = {nv})"),
                });
            }
            Ok((line, v))
        }
    }
    let mut cur = Cursor { tokens, pos: 0 };

    let nv = cur.next_usize("vertex count")?;
    let nt = cur.next_usize("triangle count")?;
    let nb = cur.next_usize("boundary edge count")?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let x = cur.next_f64("vertex x")?;
        let y = cur.next_f64("vertex y")?;
        vertices.push([x, y]);
    }

    let mut triangles = Vec::with_capacity(nt);
    let mut reoriented = 0usize;
    for _ in 0..nt {
        let (line, i) = cur.next_index("triangle vertex", nv)?;
        let (_, j) = cur.next_index("triangle vertex", nv)?;
        let (_, k) = cur.next_index("triangle vertex", nv)?;
        let mut t = [i, j, k];
        let area = tri_signed_area(&vertices, &t);
        if area < 0.0 {
            t.swap(1, 2);
            reoriented += 1;
        } else if area == 0.0 {
            return Err(Error::MeshParse {
                line,
                msg: format!("degenerate (zero-area) triangle ({i}, {j}, {k})"),
            });
        }
        triangles.push(t);
    }

    let mut boundary_edges = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (_, i) = cur.next_index("boundary edge vertex", nv)?;
        let (_, j) = cur.next_index("boundary edge vertex", nv)?;
        let (line, tok) = cur.next("boundary marker")?;
        let marker = tok.parse::<i32>().map_err(|_| Error::MeshParse {
            line,
            msg: format!("expected boundary marker (integer), got '{tok}'"),
        })?;
        boundary_edges.push(([i, j], marker));
    }
    if cur.pos != cur.tokens.len() {
        let (line, tok) = cur.tokens[cur.pos];
        return Err(Error::MeshParse { line, msg: format!("trailing data starting at '{tok}'") });
    }

    let h_max = longest_edge(&vertices, &triangles);
    let mesh = Mesh { vertices, triangles, boundary_edges, h_max };
    validate_mesh(&mesh)?;
    Ok((mesh, LoadReport { reoriented }))
}

/// Serialize a mesh in the format accepted by [`load_mesh`]; `load ∘ write`
/// is the identity on valid meshes.
pub fn write_mesh(mesh: &Mesh) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {} {}",
        mesh.vertices.len(),
        mesh.triangles.len(),
        mesh.boundary_edges.len()
    );
    for v in &mesh.vertices {
        let _ = writeln!(out, "{:.17e} {:.17e}", v[0], v[1]);
    }
    for t in &mesh.triangles {
        let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
    }
    for ([i, j], m) in &mesh.boundary_edges {
        let _ = writeln!(out, "{i} {j} {m}");
    }
    out
}

/// Structural validation: positive triangle areas, conforming edges (each
/// shared by at most two triangles, no hanging vertices on the boundary),
/// boundary list consistency, marker sanity, h_max consistency, and the
/// Euler relation `V - E + T = 1 - holes`.
pub fn validate_mesh(mesh: &Mesh) -> Result<MeshReport> {
    let nv = mesh.vertices.len();
    if nv == 0 || mesh.triangles.is_empty() {
        return Err(Error::InvalidMesh("mesh has no vertices or no triangles".into()));
    }
    let mut referenced = vec![false; nv];
    let mut area = 0.0;
    for (ti, t) in mesh.triangles.iter().enumerate() {
        if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
            return Err(Error::InvalidMesh(format!("triangle {ti} has repeated vertices")));
        }
        for &v in t {
            if v >= nv {
                return Err(Error::InvalidMesh(format!(
                    "triangle {ti} references vertex {v} (nv = {nv})"
                )));
            }
            referenced[v] = true;
        }
        let a = tri_signed_area(&mesh.vertices, t);
        if a <= 0.0 {
            return Err(Error::InvalidMesh(format!(
                "triangle {ti} is not counterclockwise (signed area {a:.3e})"
            )));
        }
        area += a;
    }
    if let Some(v) = referenced.iter().position(|r| !r) {
        return Err(Error::InvalidMesh(format!("vertex {v} is not referenced by any triangle")));
    }

    // Undirected edge incidence counts.
    let mut incidence: BTreeMap<(usize, usize), u32> = BTreeMap::new();
    for t in &mesh.triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            *incidence.entry(key).or_insert(0) += 1;
        }
    }
    let num_edges = incidence.len();
    let mut computed_boundary: Vec<(usize, usize)> = Vec::new();
    for (&e, &count) in &incidence {
        match count {
            1 => computed_boundary.push(e),
            2 => {}
            _ => {
                return Err(Error::InvalidMesh(format!(
                    "non-manifold edge ({}, {}) shared by {count} triangles",
                    e.0, e.1
                )))
            }
        }
    }

    // The stored boundary list must be exactly the single-incidence edges,
    // each listed once.
    let mut stored: Vec<(usize, usize)> = mesh
        .boundary_edges
        .iter()
        .map(|&([a, b], _)| (a.min(b), a.max(b)))
        .collect();
    stored.sort_unstable();
    if stored.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidMesh("duplicate entry in boundary edge list".into()));
    }
    if stored != computed_boundary {
        return Err(Error::InvalidMesh(format!(
            "boundary edge list has {} entries but the mesh has {} boundary edges (or they differ)",
            stored.len(),
            computed_boundary.len()
        )));
    }
    for &(_, marker) in &mesh.boundary_edges {
        if marker < 1 {
            return Err(Error::InvalidMesh(format!("boundary marker {marker} < 1")));
        }
    }

    // Hanging vertices: a vertex lying strictly inside a boundary edge
    // means a neighbor triangle was refined without this one following.
    let tol = 1e-12 * mesh.h_max.max(1.0);
    for &(a, b) in &computed_boundary {
        let pa = mesh.vertices[a];
        let pb = mesh.vertices[b];
        let len2 = (pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2);
        for (v, p) in mesh.vertices.iter().enumerate() {
            if v == a || v == b {
                continue;
            }
            // Distance from p to segment a-b, with strict interior projection.
            let t = ((p[0] - pa[0]) * (pb[0] - pa[0]) + (p[1] - pa[1]) * (pb[1] - pa[1])) / len2;
            if t <= 1e-9 || t >= 1.0 - 1e-9 {
                continue;
            }
            let qx = pa[0] + t * (pb[0] - pa[0]);
            let qy = pa[1] + t * (pb[1] - pa[1]);
            let d = ((p[0] - qx).powi(2) + (p[1] - qy).powi(2)).sqrt();
            if d < tol {
                return Err(Error::InvalidMesh(format!(
                    "hanging vertex {v} lies inside boundary edge ({a}, {b}); mesh is non-conforming"
                )));
            }
        }
    }

    // Boundary components via union-find over boundary edge endpoints.
    let mut parent: BTreeMap<usize, usize> = BTreeMap::new();
    for &(a, b) in &computed_boundary {
        parent.entry(a).or_insert(a);
        parent.entry(b).or_insert(b);
    }
    fn find(parent: &mut BTreeMap<usize, usize>, mut x: usize) -> usize {
        while parent[&x] != x {
            let g = parent[&parent[&x]];
            parent.insert(x, g);
            x = g;
        }
        x
    }
    for &(a, b) in &computed_boundary {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent.insert(ra, rb);
        }
    }
    let keys: Vec<usize> = parent.keys().copied().collect();
    let mut roots: Vec<usize> = keys.into_iter().map(|k| find(&mut parent, k)).collect();
    roots.sort_unstable();
    roots.dedup();
    let boundary_components = roots.len();
    let holes = boundary_components.saturating_sub(1);

    // Euler characteristic of a triangulated planar domain with `holes` holes.
    let euler = nv as i64 - num_edges as i64 + mesh.triangles.len() as i64;
    if euler != 1 - holes as i64 {
        return Err(Error::InvalidMesh(format!(
            "Euler check failed: V - E + T = {euler}, expected {} for {holes} hole(s)",
            1 - holes as i64
        )));
    }

    let h_computed = longest_edge(&mesh.vertices, &mesh.triangles);
    if (h_computed - mesh.h_max).abs() > 1e-12 * h_computed.max(1.0) {
        return Err(Error::InvalidMesh(format!(
            "stored h_max = {} but longest edge is {}",
            mesh.h_max, h_computed
        )));
    }

    let mut markers: Vec<i32> = mesh.boundary_edges.iter().map(|&(_, m)| m).collect();
    markers.sort_unstable();
    markers.dedup();

    Ok(MeshReport {
        num_vertices: nv,
        num_triangles: mesh.triangles.len(),
        num_edges,
        num_boundary_edges: computed_boundary.len(),
        boundary_components,
        holes,
        area,
        h_max: mesh.h_max,
        markers,
    })
}

/// Uniform-bucket point location over a mesh. Build once, then `locate`
/// in O(1) per query for quasi-uniform meshes.
#[derive(Debug, Clone)]
pub struct PointLocator {
    bbox: [f64; 4],
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl PointLocator {
    pub fn new(mesh: &Mesh) -> Self {
        let mut bbox = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for v in &mesh.vertices {
            bbox[0] = bbox[0].min(v[0]);
            bbox[1] = bbox[1].min(v[1]);
            bbox[2] = bbox[2].max(v[0]);
            bbox[3] = bbox[3].max(v[1]);
        }
        let nt = mesh.triangles.len();
        let n = ((nt as f64 / 2.0).sqrt().ceil() as usize).max(1);
        let (nx, ny) = (n, n);
        let mut buckets = vec![Vec::new(); nx * ny];
        let to_ix = |x: f64| {
            (((x - bbox[0]) / (bbox[2] - bbox[0]) * nx as f64).floor() as i64)
                .clamp(0, nx as i64 - 1) as usize
        };
        let to_iy = |y: f64| {
            (((y - bbox[1]) / (bbox[3] - bbox[1]) * ny as f64).floor() as i64)
                .clamp(0, ny as i64 - 1) as usize
        };
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let xs = tri.map(|v| mesh.vertices[v][0]);
            let ys = tri.map(|v| mesh.vertices[v][1]);
            let (x0, x1) = (xs.iter().cloned().fold(f64::INFINITY, f64::min),
                            xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
            let (y0, y1) = (ys.iter().cloned().fold(f64::INFINITY, f64::min),
                            ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
            for iy in to_iy(y0)..=to_iy(y1) {
                for ix in to_ix(x0)..=to_ix(x1) {
                    buckets[iy * nx + ix].push(t as u32);
                }
            }
        }
        PointLocator { bbox, nx, ny, buckets }
    }

    /// Find a triangle containing `(x, y)`, with a small tolerance so that
    /// points on shared edges resolve to the lowest-index candidate. `None`
    /// for points outside the mesh.
    pub fn locate(&self, mesh: &Mesh, x: f64, y: f64) -> Option<usize> {
        let [x0, y0, x1, y1] = self.bbox;
        let tol = 1e-12 * ((x1 - x0).abs() + (y1 - y0).abs());
        if x < x0 - tol || x > x1 + tol || y < y0 - tol || y > y1 + tol {
            return None;
        }
        let ix = (((x - x0) / (x1 - x0) * self.nx as f64).floor() as i64)
            .clamp(0, self.nx as i64 - 1) as usize;
        let iy = (((y - y0) / (y1 - y0) * self.ny as f64).floor() as i64)
            .clamp(0, self.ny as i64 - 1) as usize;
        for &t in &self.buckets[iy * self.nx + ix] {
            let tri = mesh.triangles[t as usize];
            let [a, b, c] =
                [mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]];
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            let l1 = ((x - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (y - a[1])) / det;
            let l2 = ((b[0] - a[0]) * (y - a[1]) - (x - a[0]) * (b[1] - a[1])) / det;
            let eps = 1e-10;
            if l1 >= -eps && l2 >= -eps && l1 + l2 <= 1.0 + eps {
                return Some(t as usize);
            }
        }
        None
    }
}
