//! Shift-invert Lanczos iteration with thick restarts.
//!
//! The pencil `K x = λ M x` is attacked through `Op = (K − σM)⁻¹ M`, which
//! is self-adjoint in the M-inner product. The basis is kept M-orthonormal
//! with full two-pass reorthogonalization, so the projected operator stays
//! real symmetric and small enough to hand to the dense Jacobi helper at
//! every restart.
//!
//! Under [`ShiftPolicy::Auto`] the solver runs one pilot cycle at a safe
//! shift (zero, or below zero when nothing pins the constant mode), then
//! refactors at a shift inside the estimated target cluster, where the
//! spectral separation of the inverted operator is best. The LDLᴴ inertia
//! at the working shift counts the true eigenvalues below it, which lets
//! the solver certify that no cluster member was silently skipped.

use rayon::prelude::*;

use crate::assemble::HermitianPencil;
use crate::potentials::{splitmix64_at, unit_f64};
use crate::smalleig::symmetric_eigen;
use crate::sparse::{factorize_with, FactorKind, Factorization, Ordering};
use crate::{C64, Error, Result};

use super::EigenResult;

/// How the spectral shift is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShiftPolicy {
    /// Pilot cycle at a safe shift, then a refactorization inside the
    /// wanted cluster. The default.
    Auto,
    /// A pinned shift; no adaptive stage runs.
    Fixed(f64),
}

/// Tuning knobs for [`lowest_eigenpairs`].
#[derive(Debug, Clone)]
pub struct EigOptions {
    /// Number of lowest eigenpairs wanted.
    pub k: usize,
    /// Residual tolerance: a pair is converged once
    /// `‖Kx − λMx‖ ≤ tol·(|λ|·‖Mx‖ + ‖Kx‖)`.
    pub tol: f64,
    /// Shift selection policy.
    pub shift: ShiftPolicy,
    /// Maximum Lanczos basis size; 0 derives one from `k`.
    pub max_basis: usize,
    /// Thick-restart budget for the main stage.
    pub max_restarts: usize,
    /// Seed for the deterministic start vector.
    pub seed: u64,
}

impl Default for EigOptions {
    fn default() -> Self {
        EigOptions {
            k: 6,
            tol: 1e-8,
            shift: ShiftPolicy::Auto,
            max_basis: 0,
            max_restarts: 60,
            seed: 0x51AB_2E77_0C3D_94F1,
        }
    }
}

#[derive(Default, Clone, Copy)]
struct Counters {
    ops: usize,
    restarts: usize,
    factorizations: usize,
    factor_seconds: f64,
}

/// Converged free-DOF eigenpairs, before scattering to the full DOF set.
struct Extracted {
    values: Vec<f64>,
    vectors: Vec<Vec<C64>>,
    residuals: Vec<f64>,
    relative: Vec<f64>,
}

/// What a stage learned when it stopped short of convergence.
struct Estimates {
    /// Ritz estimates of the wanted eigenvalues, ascending.
    lambda: Vec<f64>,
    /// Sum of the wanted Ritz vectors, for warm-starting the next stage.
    warm: Option<Vec<C64>>,
    /// The inertia count showed more eigenvalues below the shift than
    /// requested pairs, so completeness there cannot be certified.
    need_lower: bool,
    /// Best relative residual seen, for diagnostics.
    best_rel: f64,
}

enum Outcome {
    Converged(Extracted),
    Estimates(Estimates),
}

struct RitzPair {
    x: Vec<C64>,
    lam: f64,
}

/// Computes the lowest `opts.k` eigenpairs of the pencil.
pub fn lowest_eigenpairs(pencil: &HermitianPencil, opts: &EigOptions) -> Result<EigenResult> {
    let n = pencil.k.nrows();
    if opts.k == 0 {
        return Err(Error::EigRequest("at least one eigenpair must be requested".into()));
    }
    if opts.k >= n {
        return Err(Error::EigRequest(format!(
            "{} eigenpairs requested from a pencil with {n} free DOFs; the iteration \
             needs k < n (the dense reference path can recover a full spectrum)",
            opts.k
        )));
    }
    if !(opts.tol > 0.0 && opts.tol.is_finite()) {
        return Err(Error::EigRequest(format!("tolerance must be positive, got {}", opts.tol)));
    }

    let mut counters = Counters::default();
    let rho = trace_ratio(pencil);

    match opts.shift {
        ShiftPolicy::Fixed(sigma) => {
            let (factor, sigma) = factor_with_retries(pencil, sigma, rho, &mut counters)?;
            let mut engine = Engine::new(pencil, opts, sigma, factor);
            match engine.run(opts.max_restarts, &mut counters)? {
                Outcome::Converged(sol) => Ok(assemble_result(pencil, sol, sigma, &counters)),
                Outcome::Estimates(est) => Err(non_convergence(&est, opts, &counters)),
            }
        }
        ShiftPolicy::Auto => {
            // No essential DOFs means nothing pins constants, so K may be
            // singular and the pilot shift has to stay strictly negative.
            let unpinned = pencil.free_dofs.len() == pencil.num_full;
            let sigma0 = if unpinned { -0.1 * rho } else { 0.0 };
            let (factor, sigma0) = factor_with_retries(pencil, sigma0, rho, &mut counters)?;
            let mut engine = Engine::new(pencil, opts, sigma0, factor);
            let est = match engine.run(1, &mut counters)? {
                Outcome::Converged(sol) => {
                    return Ok(assemble_result(pencil, sol, sigma0, &counters));
                }
                Outcome::Estimates(est) => est,
            };
            drop(engine);

            let mut sigma =
                if est.need_lower { floor_shift(&est, sigma0) } else { cluster_shift(&est, sigma0) };
            let mut warm = est.warm.clone();
            let mut best = est;
            for stage in 0..2 {
                let (factor, s) = factor_with_retries(pencil, sigma, rho, &mut counters)?;
                if factor.stats.negative_pivots > opts.k && stage == 0 {
                    // Too deep inside the spectrum: completeness below the
                    // shift could not be certified. Drop below the cluster.
                    sigma = floor_shift(&best, sigma0);
                    continue;
                }
                let mut engine = Engine::new(pencil, opts, s, factor);
                engine.warm_start(warm.take());
                match engine.run(opts.max_restarts, &mut counters)? {
                    Outcome::Converged(sol) => {
                        return Ok(assemble_result(pencil, sol, s, &counters));
                    }
                    Outcome::Estimates(est2) => {
                        let retry = est2.need_lower && stage == 0;
                        warm = est2.warm.clone();
                        sigma = floor_shift(&est2, sigma0);
                        best = est2;
                        if !retry {
                            return Err(non_convergence(&best, opts, &counters));
                        }
                    }
                }
            }
            Err(non_convergence(&best, opts, &counters))
        }
    }
}

/// trace(K)/trace(M): a crude spectral scale used for shift offsets.
fn trace_ratio(pencil: &HermitianPencil) -> f64 {
    let n = pencil.k.nrows();
    let tk: f64 = (0..n).map(|i| pencil.k.get(i, i).re).sum();
    let tm: f64 = (0..n).map(|i| pencil.m.get(i, i)).sum();
    if tm > 0.0 && tk.is_finite() {
        (tk / tm).abs().max(1.0)
    } else {
        1.0
    }
}

/// Factors `K − σM`, stepping the shift down on singular pivots.
fn factor_with_retries(
    pencil: &HermitianPencil,
    sigma0: f64,
    rho: f64,
    counters: &mut Counters,
) -> Result<(Factorization<C64>, f64)> {
    let mut sigma = sigma0;
    let mut last = None;
    for _attempt in 0..4 {
        let start = std::time::Instant::now();
        let shifted = pencil.k.add_scaled_real(&pencil.m, -sigma)?;
        counters.factorizations += 1;
        let outcome = factorize_with(&shifted, FactorKind::HermitianIndefinite, Ordering::Amd);
        counters.factor_seconds += start.elapsed().as_secs_f64();
        match outcome {
            Ok(f) => return Ok((f, sigma)),
            Err(e @ Error::SingularPivot { .. }) => {
                last = Some(e);
                sigma -= 0.01 * rho;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("retry loop ran"))
}

/// Shift in the middle of the estimated target cluster.
fn cluster_shift(est: &Estimates, fallback: f64) -> f64 {
    match (est.lambda.first(), est.lambda.last()) {
        (Some(&lo), Some(&hi)) => {
            let scale = lo.abs().max(1.0);
            if hi - lo <= 1e-6 * scale {
                lo - 1e-3 * scale
            } else {
                lo + 0.5 * (hi - lo)
            }
        }
        _ => fallback - 1.0,
    }
}

/// Shift safely below the estimated bottom of the spectrum window.
fn floor_shift(est: &Estimates, fallback: f64) -> f64 {
    match (est.lambda.first(), est.lambda.last()) {
        (Some(&lo), Some(&hi)) => lo - 0.1 * (hi - lo).max(0.0) - 1e-3 * (lo.abs() + 1.0),
        _ => fallback - 1.0,
    }
}

fn non_convergence(est: &Estimates, opts: &EigOptions, counters: &Counters) -> Error {
    Error::EigNonConvergence(format!(
        "{} pairs requested at tolerance {:.1e}; best relative residual {:.3e} after {} restarts \
         and {} operator applications",
        opts.k, opts.tol, est.best_rel, counters.restarts, counters.ops
    ))
}

fn assemble_result(
    pencil: &HermitianPencil,
    sol: Extracted,
    sigma: f64,
    counters: &Counters,
) -> EigenResult {
    let vectors = sol
        .vectors
        .into_iter()
        .map(|x| {
            let mut full = vec![C64::new(0.0, 0.0); pencil.num_full];
            for (slot, &dof) in pencil.free_dofs.iter().enumerate() {
                full[dof] = x[slot];
            }
            full
        })
        .collect();
    EigenResult {
        values: sol.values,
        vectors,
        residuals: sol.residuals,
        relative_residuals: sol.relative,
        shift: sigma,
        operator_applications: counters.ops,
        restarts: counters.restarts,
        factorizations: counters.factorizations,
        factorize_seconds: counters.factor_seconds,
    }
}

/// Chunk size for the deterministic parallel kernels; fixed so the
/// partition (and therefore the floating-point reduction order) does not
/// depend on the thread count.
const CHUNK: usize = 4096;

/// `Σ conj(a_i)·b_i` — the coefficient of `b` along `a` when `b` is an
/// M-product.
fn mdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// One classical Gram–Schmidt pass: returns `c_i = ⟨w, v_i⟩_M` (computed
/// from `y = M w`) and subtracts `Σ c_i v_i` from `w` in place.
fn reorth_pass(basis: &[Vec<C64>], y: &[C64], w: &mut [C64]) -> Vec<C64> {
    let coeffs: Vec<C64> = basis.par_iter().map(|v| mdot(v, y)).collect();
    if !basis.is_empty() {
        w.par_chunks_mut(CHUNK).enumerate().for_each(|(ci, chunk)| {
            let base = ci * CHUNK;
            for (i, &c) in coeffs.iter().enumerate() {
                if c.re != 0.0 || c.im != 0.0 {
                    let vs = &basis[i][base..base + chunk.len()];
                    for (t, wt) in chunk.iter_mut().enumerate() {
                        *wt -= c * vs[t];
                    }
                }
            }
        });
    }
    coeffs
}

/// `Σ s_i · v_i` over the given real coefficients.
fn combination(basis: &[Vec<C64>], coeffs: &[(usize, f64)], n: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); n];
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(ci, chunk)| {
        let base = ci * CHUNK;
        for &(i, s) in coeffs {
            if s != 0.0 {
                let vs = &basis[i][base..base + chunk.len()];
                for (t, ot) in chunk.iter_mut().enumerate() {
                    *ot += vs[t].scale(s);
                }
            }
        }
    });
    out
}

struct Engine<'a> {
    pencil: &'a HermitianPencil,
    factor: Factorization<C64>,
    sigma: f64,
    n: usize,
    k_want: usize,
    tol: f64,
    m_max: usize,
    seed: u64,
    rng_counter: u64,
    /// `max|K|` and `max|M|`, for the roundoff floor of the residual test.
    kmax: f64,
    mmax: f64,
    /// M-orthonormal basis vectors.
    v: Vec<Vec<C64>>,
    /// Projected operator, row-major with stride `m_max`; entry (i, j) is
    /// `⟨Op v_j, v_i⟩_M` for every column that has been stepped from.
    p: Vec<f64>,
    /// Running magnitude of projected couplings, for breakdown detection.
    coupling_scale: f64,
    /// Scratch for M-products.
    y: Vec<C64>,
    pending_start: Option<Vec<C64>>,
}

impl<'a> Engine<'a> {
    fn new(
        pencil: &'a HermitianPencil,
        opts: &EigOptions,
        sigma: f64,
        factor: Factorization<C64>,
    ) -> Self {
        let n = pencil.k.nrows();
        let mut m_max = (4 * opts.k + 40).clamp(48, 144);
        if opts.max_basis > 0 {
            m_max = opts.max_basis;
        }
        m_max = m_max.max(opts.k + 16).min(n);
        Engine {
            pencil,
            factor,
            sigma,
            n,
            k_want: opts.k,
            tol: opts.tol,
            m_max,
            seed: opts.seed,
            rng_counter: 0,
            kmax: pencil.k.max_abs(),
            mmax: pencil.m.max_abs(),
            v: Vec::new(),
            p: vec![0.0; m_max * m_max],
            coupling_scale: 0.0,
            y: vec![C64::new(0.0, 0.0); n],
            pending_start: None,
        }
    }

    fn warm_start(&mut self, w: Option<Vec<C64>>) {
        self.pending_start = w;
    }

    fn run(&mut self, budget: usize, counters: &mut Counters) -> Result<Outcome> {
        self.ensure_started()?;
        let mut best_rel = f64::INFINITY;
        for cycle in 0..budget.max(1) {
            while self.v.len() < self.m_max {
                self.expand(counters)?;
            }
            let carry = self.residual_vector(counters)?;
            counters.restarts += 1;

            let d = self.v.len();
            let mut pd = vec![0.0_f64; d * d];
            for i in 0..d {
                pd[i * d..i * d + d].copy_from_slice(&self.p[i * self.m_max..i * self.m_max + d]);
            }
            let (theta, svecs) = symmetric_eigen(d, &pd);

            // Ritz values below the shift all matter (their count is bounded
            // by the factorization inertia); above it, the largest θ come
            // first since θ = 1/(λ − σ) decreases in λ.
            let mut negs: Vec<usize> = (0..d).filter(|&i| theta[i] < 0.0).collect();
            negs.sort_by(|&a, &b| theta[b].abs().total_cmp(&theta[a].abs()));
            negs.truncate(self.k_want + 8);
            let mut poss: Vec<usize> = (0..d).filter(|&i| theta[i] >= 0.0).collect();
            poss.sort_by(|&a, &b| theta[b].total_cmp(&theta[a]));
            poss.truncate(self.k_want + 8);

            let mut cand: Vec<(f64, usize)> = Vec::new();
            for &idx in negs.iter().chain(poss.iter()) {
                if theta[idx].abs() > 1e-280 {
                    cand.push((self.sigma + 1.0 / theta[idx], idx));
                }
            }
            cand.sort_by(|a, b| a.0.total_cmp(&b.0));
            cand.truncate(self.k_want);

            let mut pairs = Vec::with_capacity(cand.len());
            let mut all_ok = cand.len() == self.k_want;
            let mut worst: f64 = 0.0;
            for &(lam, idx) in &cand {
                let coeffs: Vec<(usize, f64)> = (0..d).map(|i| (i, svecs[i * d + idx])).collect();
                let x = combination(&self.v, &coeffs, self.n);
                let (_res, rel, ok) = self.pencil_residual(&x, lam);
                worst = worst.max(rel);
                all_ok &= ok;
                pairs.push(RitzPair { x, lam });
            }
            best_rel = best_rel.min(worst);

            let m_minus = self.factor.stats.negative_pivots;
            if all_ok {
                if m_minus > self.k_want {
                    return Ok(Outcome::Estimates(self.estimates(pairs, best_rel, true)));
                }
                let below = pairs.iter().filter(|p| p.lam < self.sigma).count();
                if below == m_minus {
                    return Ok(Outcome::Converged(self.extract(pairs)));
                }
                // A pair below the shift is still missing; keep iterating.
            }
            if cycle + 1 == budget.max(1) {
                return Ok(Outcome::Estimates(self.estimates(pairs, best_rel, false)));
            }

            let mut kept: Vec<usize> = negs.clone();
            for &idx in &poss {
                if kept.len() >= self.k_want + 10 {
                    break;
                }
                kept.push(idx);
            }
            let cap = d.saturating_sub(2).max(1);
            kept.truncate(cap);
            self.thick_restart(d, &theta, &svecs, &kept, carry)?;
        }
        unreachable!("budget loop returns before falling through")
    }

    fn ensure_started(&mut self) -> Result<()> {
        if !self.v.is_empty() {
            return Ok(());
        }
        let mut w = match self.pending_start.take() {
            Some(w) if w.len() == self.n => w,
            _ => self.random_vector(),
        };
        self.pencil.m.matvec_complex(&w, &mut self.y);
        let nrm = mdot(&w, &self.y).re.max(0.0).sqrt();
        if nrm > 0.0 && nrm.is_finite() {
            for t in w.iter_mut() {
                *t = t.scale(1.0 / nrm);
            }
        } else {
            w = self.fresh_direction(&[])?;
        }
        self.v.push(w);
        Ok(())
    }

    /// One shift-invert application plus full reorthogonalization against
    /// the current basis. Records column `d−1` of the projected operator
    /// and returns the unnormalized residual with its M-norm.
    fn advance(&mut self, counters: &mut Counters) -> Result<(Vec<C64>, f64)> {
        let d = self.v.len();
        self.pencil.m.matvec_complex(&self.v[d - 1], &mut self.y);
        let mut w = self.factor.solve(&self.y);
        counters.ops += 1;

        let mut h = vec![C64::new(0.0, 0.0); d];
        for _pass in 0..2 {
            self.pencil.m.matvec_complex(&w, &mut self.y);
            let c = reorth_pass(&self.v, &self.y, &mut w);
            for (hi, ci) in h.iter_mut().zip(c.iter()) {
                *hi += *ci;
            }
        }
        for (i, hi) in h.iter().enumerate() {
            let val = hi.re;
            self.p[i * self.m_max + (d - 1)] = val;
            self.p[(d - 1) * self.m_max + i] = val;
        }
        self.coupling_scale = self.coupling_scale.max(h[d - 1].re.abs());

        self.pencil.m.matvec_complex(&w, &mut self.y);
        let beta = mdot(&w, &self.y).re.max(0.0).sqrt();
        Ok((w, beta))
    }

    /// Grows the basis by one vector (caller guarantees room).
    fn expand(&mut self, counters: &mut Counters) -> Result<()> {
        let d = self.v.len();
        let (mut w, beta) = self.advance(counters)?;
        if beta > self.breakdown_floor() {
            for t in w.iter_mut() {
                *t = t.scale(1.0 / beta);
            }
            self.p[d * self.m_max + (d - 1)] = beta;
            self.p[(d - 1) * self.m_max + d] = beta;
            self.coupling_scale = self.coupling_scale.max(beta);
            self.v.push(w);
        } else {
            // Invariant subspace hit: continue in a fresh direction. The
            // zero coupling in the projected matrix is exact.
            let fresh = self.fresh_direction_from_self()?;
            self.v.push(fresh);
        }
        Ok(())
    }

    /// Final step of a cycle: measures the last projected column and hands
    /// back the normalized residual as the restart carry vector. With the
    /// basis spanning the whole space there is no residual direction left,
    /// which is fine — the projected problem is then exact.
    fn residual_vector(&mut self, counters: &mut Counters) -> Result<Option<Vec<C64>>> {
        let (mut w, beta) = self.advance(counters)?;
        if beta > self.breakdown_floor() {
            for t in w.iter_mut() {
                *t = t.scale(1.0 / beta);
            }
            Ok(Some(w))
        } else if self.v.len() < self.n {
            Ok(Some(self.fresh_direction_from_self()?))
        } else {
            Ok(None)
        }
    }

    fn breakdown_floor(&self) -> f64 {
        1e-13 * self.coupling_scale
    }

    /// Residual test for a candidate pair: returns the absolute residual,
    /// the relative residual, and whether the pair counts as converged.
    /// The roundoff floor keeps exact null modes (λ ≈ 0 with K x ≈ 0, where
    /// the relative scale collapses) from stalling the iteration.
    fn pencil_residual(&self, x: &[C64], lam: f64) -> (f64, f64, bool) {
        let mut kx = vec![C64::new(0.0, 0.0); self.n];
        self.pencil.k.matvec(x, &mut kx);
        let mut mx = vec![C64::new(0.0, 0.0); self.n];
        self.pencil.m.matvec_complex(x, &mut mx);
        let res = kx
            .iter()
            .zip(mx.iter())
            .map(|(a, b)| (a - b.scale(lam)).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let knorm = kx.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let mnorm = mx.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let scale = lam.abs() * mnorm + knorm;
        let rel = if scale > 0.0 { res / scale } else { res };
        let xnorm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let floor =
            500.0 * f64::EPSILON * (self.kmax + (self.sigma.abs() + lam.abs()) * self.mmax) * xnorm;
        (res, rel, rel <= self.tol || res <= floor)
    }

    fn estimates(&self, pairs: Vec<RitzPair>, best_rel: f64, need_lower: bool) -> Estimates {
        let lambda: Vec<f64> = pairs.iter().map(|p| p.lam).collect();
        let warm = if pairs.is_empty() {
            None
        } else {
            let mut sum = vec![C64::new(0.0, 0.0); self.n];
            for p in &pairs {
                for (s, t) in sum.iter_mut().zip(p.x.iter()) {
                    *s += *t;
                }
            }
            Some(sum)
        };
        Estimates { lambda, warm, need_lower, best_rel }
    }

    /// Final polish of converged pairs: M-normalization, Rayleigh-quotient
    /// reset of the eigenvalue, fresh residual norms and a deterministic
    /// phase (largest-modulus entry made real positive).
    fn extract(&mut self, pairs: Vec<RitzPair>) -> Extracted {
        let mut rows: Vec<(f64, Vec<C64>, f64, f64)> = Vec::with_capacity(pairs.len());
        for pair in pairs {
            let mut x = pair.x;
            self.pencil.m.matvec_complex(&x, &mut self.y);
            let nrm = mdot(&x, &self.y).re.max(0.0).sqrt();
            if nrm > 0.0 {
                for t in x.iter_mut() {
                    *t = t.scale(1.0 / nrm);
                }
            }
            let mut kx = vec![C64::new(0.0, 0.0); self.n];
            self.pencil.k.matvec(&x, &mut kx);
            self.pencil.m.matvec_complex(&x, &mut self.y);
            let num = mdot(&x, &kx).re;
            let den = mdot(&x, &self.y).re;
            let lam = if den != 0.0 { num / den } else { pair.lam };
            let (res, rel, _) = self.pencil_residual(&x, lam);
            let mut top = 0;
            let mut topmod = 0.0_f64;
            for (t, v) in x.iter().enumerate() {
                let m = v.norm_sqr();
                if m > topmod {
                    topmod = m;
                    top = t;
                }
            }
            if topmod > 0.0 {
                let phase = x[top] / x[top].norm();
                let adj = phase.conj();
                for t in x.iter_mut() {
                    *t *= adj;
                }
            }
            rows.push((lam, x, res, rel));
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out = Extracted {
            values: Vec::with_capacity(rows.len()),
            vectors: Vec::with_capacity(rows.len()),
            residuals: Vec::with_capacity(rows.len()),
            relative: Vec::with_capacity(rows.len()),
        };
        for (lam, x, res, rel) in rows {
            out.values.push(lam);
            out.vectors.push(x);
            out.residuals.push(res);
            out.relative.push(rel);
        }
        out
    }

    /// Replaces the basis with the kept Ritz vectors plus the carry vector;
    /// the projected matrix restarts as diag(θ) and the carry column is
    /// re-measured by the next [`Engine::advance`].
    fn thick_restart(
        &mut self,
        d: usize,
        theta: &[f64],
        svecs: &[f64],
        kept: &[usize],
        carry: Option<Vec<C64>>,
    ) -> Result<()> {
        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(kept.len() + 1);
        for &idx in kept {
            let coeffs: Vec<(usize, f64)> = (0..d).map(|i| (i, svecs[i * d + idx])).collect();
            basis.push(combination(&self.v, &coeffs, self.n));
        }
        if let Some(carry) = carry {
            basis.push(carry);
        }

        // One M-orthonormalization sweep over the new basis for hygiene;
        // the vectors are already orthonormal up to accumulated roundoff.
        for j in 0..basis.len() {
            let mut bj = std::mem::take(&mut basis[j]);
            if j > 0 {
                self.pencil.m.matvec_complex(&bj, &mut self.y);
                reorth_pass(&basis[..j], &self.y, &mut bj);
            }
            self.pencil.m.matvec_complex(&bj, &mut self.y);
            let nrm = mdot(&bj, &self.y).re.max(0.0).sqrt();
            if nrm > 1e-8 {
                for t in bj.iter_mut() {
                    *t = t.scale(1.0 / nrm);
                }
                basis[j] = bj;
            } else {
                let fresh = self.fresh_direction(&basis[..j])?;
                basis[j] = fresh;
            }
        }

        self.v = basis;
        self.p.fill(0.0);
        for (slot, &idx) in kept.iter().enumerate() {
            self.p[slot * self.m_max + slot] = theta[idx];
        }
        Ok(())
    }

    fn fresh_direction_from_self(&mut self) -> Result<Vec<C64>> {
        // Work around the borrow of `self.v` by temporarily moving it out.
        let basis = std::mem::take(&mut self.v);
        let result = self.fresh_direction(&basis);
        self.v = basis;
        result
    }

    /// A deterministic pseudorandom direction, M-orthonormalized against
    /// `basis`.
    fn fresh_direction(&mut self, basis: &[Vec<C64>]) -> Result<Vec<C64>> {
        for _try in 0..4 {
            let mut w = self.random_vector();
            let pre = w.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            for _pass in 0..2 {
                self.pencil.m.matvec_complex(&w, &mut self.y);
                reorth_pass(basis, &self.y, &mut w);
            }
            self.pencil.m.matvec_complex(&w, &mut self.y);
            let nrm = mdot(&w, &self.y).re.max(0.0).sqrt();
            if nrm > 1e-12 * pre {
                for t in w.iter_mut() {
                    *t = t.scale(1.0 / nrm);
                }
                return Ok(w);
            }
        }
        Err(Error::EigNonConvergence(
            "could not generate a new direction orthogonal to the basis".into(),
        ))
    }

    fn random_vector(&mut self) -> Vec<C64> {
        let base = self.rng_counter;
        self.rng_counter += 2 * self.n as u64;
        (0..self.n)
            .map(|i| {
                let re = unit_f64(splitmix64_at(self.seed, base + 2 * i as u64)) - 0.5;
                let im = unit_f64(splitmix64_at(self.seed, base + 2 * i as u64 + 1)) - 0.5;
                C64::new(re, im)
            })
            .collect()
    }
}
