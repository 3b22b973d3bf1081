//! Fill-reducing orderings for the direct factorizations.
//!
//! [`Ordering::Amd`] is an approximate minimum degree ordering on the
//! quotient graph with supervariable merging and aggressive element
//! absorption; it is the default and gives near-nested-dissection fill on
//! the 2D mesh graphs this crate produces. [`Ordering::Rcm`] (reverse
//! Cuthill–McKee) and [`Ordering::Natural`] are kept for comparison and
//! for small systems. All orderings are deterministic: ties break by node
//! index.

use super::{Scalar, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering {
    /// Identity permutation.
    Natural,
    /// Reverse Cuthill–McKee (bandwidth-oriented).
    Rcm,
    /// Approximate minimum degree (default).
    Amd,
    /// AMD on the graph without the named column, which is then inserted
    /// a few positions before the end. Used for bordered saddle systems
    /// (e.g. a Neumann stiffness matrix plus one dense mean-value
    /// constraint row): the constraint must be eliminated after almost all
    /// stiffness columns (so every leading minor stays nonsingular for
    /// 1×1 diagonal pivoting) but before the last few (so the singular
    /// stiffness direction is grounded before its pivot is reached).
    AmdWithLateColumn(usize),
}

/// Compute `perm` with `perm[new] = old` for the symmetrized pattern of `a`.
pub fn compute_ordering<T: Scalar>(a: &SparseMatrix<T>, ordering: Ordering) -> Vec<usize> {
    let n = a.nrows();
    match ordering {
        Ordering::Natural => (0..n).collect(),
        Ordering::Rcm => rcm(&symmetric_adjacency(a, None)),
        Ordering::Amd => amd(symmetric_adjacency(a, None)),
        Ordering::AmdWithLateColumn(c) => {
            assert!(c < n, "late column {c} out of range");
            assert!(n >= 3, "late-column ordering needs at least 3 unknowns");
            // Order the subgraph without c, then splice c back in before
            // the final few columns.
            let sub = symmetric_adjacency(a, Some(c));
            let sub_perm = amd(sub); // indices in 0..n-1 (c skipped)
            let unmap = |v: usize| if v < c { v } else { v + 1 };
            let t = 8.min(n - 2);
            let cut = (n - 1) - t;
            let mut perm = Vec::with_capacity(n);
            perm.extend(sub_perm[..cut].iter().map(|&v| unmap(v)));
            perm.push(c);
            perm.extend(sub_perm[cut..].iter().map(|&v| unmap(v)));
            perm
        }
    }
}

/// Undirected adjacency lists (sorted, deduplicated, no self loops) of the
/// pattern of `a + aᵀ`, optionally with one node removed and the remaining
/// indices compacted.
fn symmetric_adjacency<T: Scalar>(a: &SparseMatrix<T>, skip: Option<usize>) -> Vec<Vec<u32>> {
    let n = a.nrows();
    let remap = |v: usize| -> Option<u32> {
        match skip {
            Some(s) if v == s => None,
            Some(s) if v > s => Some((v - 1) as u32),
            _ => Some(v as u32),
        }
    };
    let m = if skip.is_some() { n - 1 } else { n };
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); m];
    for (r, c, _) in a.iter() {
        if r == c {
            continue;
        }
        if let (Some(rr), Some(cc)) = (remap(r), remap(c)) {
            adj[rr as usize].push(cc);
            adj[cc as usize].push(rr);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// Reverse Cuthill–McKee from a pseudo-peripheral start in each component.
fn rcm(adj: &[Vec<u32>]) -> Vec<usize> {
    let n = adj.len();
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    let deg = |v: usize| adj[v].len();

    let bfs = |start: usize, visited: &mut Vec<bool>, out: &mut Vec<usize>| {
        let base = out.len();
        out.push(start);
        visited[start] = true;
        let mut head = base;
        while head < out.len() {
            let v = out[head];
            head += 1;
            let mut nbrs: Vec<u32> = adj[v].iter().copied().filter(|&u| !visited[u as usize]).collect();
            nbrs.sort_unstable_by_key(|&u| (deg(u as usize), u));
            for u in nbrs {
                if !visited[u as usize] {
                    visited[u as usize] = true;
                    out.push(u as usize);
                }
            }
        }
    };

    let mut starts: Vec<usize> = (0..n).collect();
    starts.sort_unstable_by_key(|&v| (deg(v), v));
    for &s0 in &starts {
        if visited[s0] {
            continue;
        }
        // Pseudo-peripheral node: hop to the far end of a BFS once.
        let mut scratch_visited = visited.clone();
        let mut scratch = Vec::new();
        bfs(s0, &mut scratch_visited, &mut scratch);
        let far = *scratch.last().unwrap();
        let start = if deg(far) <= deg(s0) { far } else { s0 };
        bfs(start, &mut visited, &mut order);
    }
    order.reverse();
    order
}

const LIVE: u8 = 0;
const ELEMENT: u8 = 1;
const DEAD: u8 = 2;

/// Approximate minimum degree on the quotient graph.
///
/// Nodes start as variables; an eliminated pivot becomes an *element*
/// whose boundary list stands in for the clique the elimination would
/// create. Variable degrees are approximated by the standard AMD bound
/// `d̂ = min(live, d_old + |Lp\i|, |Lp\i| + Σ_e |Le\Lp| + |plain
/// neighbors|)`, elements entirely inside the new boundary are absorbed,
/// and indistinguishable variables merge into supervariables.
fn amd(mut vars: Vec<Vec<u32>>) -> Vec<usize> {
    let n = vars.len();
    if n == 0 {
        return Vec::new();
    }
    let mut status = vec![LIVE; n];
    let mut nv: Vec<i64> = vec![1; n]; // supervariable weights
    let mut elems: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut esize: Vec<i64> = vec![0; n]; // weighted |Le| for elements
    let mut degree: Vec<usize> = vars.iter().map(|l| l.len()).collect();
    let mut children: Vec<Vec<u32>> = vec![Vec::new(); n];

    // Degree buckets (doubly linked lists threaded through next/prev).
    const NIL: u32 = u32::MAX;
    let mut head = vec![NIL; n + 1];
    let mut next = vec![NIL; n];
    let mut prev = vec![NIL; n];
    let mut bucket = vec![0usize; n];
    let insert = |v: usize,
                      d: usize,
                      head: &mut Vec<u32>,
                      next: &mut Vec<u32>,
                      prev: &mut Vec<u32>,
                      bucket: &mut Vec<usize>| {
        let d = d.min(n - 1);
        bucket[v] = d;
        next[v] = head[d];
        prev[v] = NIL;
        if head[d] != NIL {
            prev[head[d] as usize] = v as u32;
        }
        head[d] = v as u32;
    };
    let remove = |v: usize,
                  head: &mut Vec<u32>,
                  next: &mut Vec<u32>,
                  prev: &mut Vec<u32>,
                  bucket: &Vec<usize>| {
        let (p, nx) = (prev[v], next[v]);
        if p != NIL {
            next[p as usize] = nx;
        } else {
            head[bucket[v]] = nx;
        }
        if nx != NIL {
            prev[nx as usize] = p;
        }
    };
    for v in 0..n {
        let d = degree[v];
        insert(v, d, &mut head, &mut next, &mut prev, &mut bucket);
    }

    let mut mark = vec![0u64; n];
    let mut markstamp = 0u64;
    let mut w = vec![0i64; n];
    let mut wstamp = vec![0u64; n];
    let mut elim_order: Vec<u32> = Vec::with_capacity(n);
    let mut remaining: i64 = n as i64;
    let mut mindeg = 0usize;

    while remaining > 0 {
        while head[mindeg] == NIL {
            mindeg += 1;
        }
        let p = head[mindeg] as usize;
        remove(p, &mut head, &mut next, &mut prev, &bucket);

        // Boundary Lp of the new element: live variable neighbors of p plus
        // the boundaries of p's elements, which p's elimination absorbs.
        markstamp += 1;
        mark[p] = markstamp;
        let mut lp: Vec<u32> = Vec::new();
        for &v in &vars[p] {
            let v = v as usize;
            if status[v] == LIVE && mark[v] != markstamp {
                mark[v] = markstamp;
                lp.push(v as u32);
            }
        }
        for k in 0..elems[p].len() {
            let e = elems[p][k] as usize;
            if status[e] != ELEMENT {
                continue;
            }
            for idx in 0..vars[e].len() {
                let v = vars[e][idx] as usize;
                if status[v] == LIVE && v != p && mark[v] != markstamp {
                    mark[v] = markstamp;
                    lp.push(v as u32);
                }
            }
            status[e] = DEAD;
            vars[e] = Vec::new();
        }
        let lp_weight: i64 = lp.iter().map(|&v| nv[v as usize]).sum();
        status[p] = ELEMENT;
        elems[p] = Vec::new();
        esize[p] = lp_weight;
        remaining -= nv[p];
        elim_order.push(p as u32);
        vars[p] = lp.clone();

        if lp.is_empty() {
            continue;
        }

        // |Le \ Lp| for every live element adjacent to the boundary.
        let wround = markstamp; // reuse the round counter as the w stamp
        let mut touched: Vec<u32> = Vec::new();
        for &i in &lp {
            let i = i as usize;
            for &e in &elems[i] {
                let e = e as usize;
                if status[e] != ELEMENT {
                    continue;
                }
                if wstamp[e] != wround {
                    wstamp[e] = wround;
                    w[e] = esize[e];
                    touched.push(e as u32);
                }
                w[e] -= nv[i];
            }
        }
        // Aggressive absorption: elements contained in Lp die now.
        for &e in &touched {
            let e = e as usize;
            if w[e] <= 0 {
                status[e] = DEAD;
                vars[e] = Vec::new();
            }
        }

        // Prune adjacency, compute approximate degrees.
        for &i in &lp {
            let i = i as usize;
            remove(i, &mut head, &mut next, &mut prev, &bucket);
            vars[i].retain(|&v| {
                let v = v as usize;
                status[v] == LIVE && mark[v] != markstamp
            });
            elems[i].retain(|&e| status[e as usize] == ELEMENT);
            let plain: i64 = vars[i].iter().map(|&v| nv[v as usize]).sum();
            let elem_deg: i64 = elems[i].iter().map(|&e| w[e as usize].max(0)).sum();
            elems[i].push(p as u32);
            let boundary = lp_weight - nv[i];
            let d_new = boundary + plain + elem_deg;
            let d_bound = remaining - nv[i];
            let d_growth = degree[i] as i64 + boundary;
            let d = d_new.min(d_bound).min(d_growth).max(0) as usize;
            degree[i] = d;
        }

        // Supervariable merging: indistinguishable boundary nodes collapse.
        let mut hashes: Vec<(u64, u32)> = lp
            .iter()
            .filter(|&&i| status[i as usize] == LIVE)
            .map(|&i| {
                let iu = i as usize;
                let mut h: u64 = 0;
                for &v in &vars[iu] {
                    h = h.wrapping_add(v as u64 + 1);
                }
                for &e in &elems[iu] {
                    h = h.wrapping_add(((e as u64) + 1).wrapping_mul(0x9E37_79B9));
                }
                (h, i)
            })
            .collect();
        hashes.sort_unstable();
        for group in hashes.chunk_by(|a, b| a.0 == b.0) {
            for a in 0..group.len() {
                let i = group[a].1 as usize;
                if status[i] != LIVE {
                    continue;
                }
                for b in (a + 1)..group.len() {
                    let j = group[b].1 as usize;
                    if status[j] != LIVE {
                        continue;
                    }
                    if indistinguishable(i, j, &vars, &elems) {
                        nv[i] += nv[j];
                        status[j] = DEAD;
                        children[i].push(j as u32);
                        vars[i].retain(|&v| v as usize != j);
                    }
                }
            }
        }

        for &i in &lp {
            let i = i as usize;
            if status[i] != LIVE {
                continue;
            }
            let d = degree[i];
            insert(i, d, &mut head, &mut next, &mut prev, &mut bucket);
            mindeg = mindeg.min(d.min(n - 1));
        }
    }

    // Expand supervariables: a representative carries its merged members
    // right behind it, depth first (explicit stack; merge chains can be long).
    let mut perm = Vec::with_capacity(n);
    let mut stack: Vec<usize> = Vec::new();
    for &p in &elim_order {
        stack.push(p as usize);
        while let Some(v) = stack.pop() {
            perm.push(v);
            for &c in children[v].iter().rev() {
                stack.push(c as usize);
            }
        }
    }
    debug_assert_eq!(perm.len(), n);
    perm
}

/// Exact indistinguishability test: same live element lists and the same
/// live variable lists modulo each other.
fn indistinguishable(i: usize, j: usize, vars: &[Vec<u32>], elems: &[Vec<u32>]) -> bool {
    if elems[i].len() != elems[j].len() {
        return false;
    }
    let mut ei: Vec<u32> = elems[i].clone();
    let mut ej: Vec<u32> = elems[j].clone();
    ei.sort_unstable();
    ej.sort_unstable();
    if ei != ej {
        return false;
    }
    let mut vi: Vec<u32> = vars[i].iter().copied().filter(|&v| v as usize != j).collect();
    let mut vj: Vec<u32> = vars[j].iter().copied().filter(|&v| v as usize != i).collect();
    if vi.len() != vj.len() {
        return false;
    }
    vi.sort_unstable();
    vj.sort_unstable();
    vi == vj
}
