//! End-to-end experiment execution and run-directory output.
//!
//! Stage timing taxonomy: `mesh` (generation/loading plus FE space),
//! `gauge` (canonical gauge solve; zero for original-gauge runs),
//! `assemble` (pencil assembly), `eigensolve` (the whole eigensolver
//! call), `factorize` (the share of `eigensolve` spent forming and
//! factorizing shifted operators), and `total` (the full run including
//! diagnostics and output writing). `factorize` is contained in
//! `eigensolve` and every stage is contained in `total`, so the rows are
//! intentionally not additive — `total` and `eigensolve` play the role of
//! the usual "total / solver" cost split, the rest refine it.

use gaugefem::assemble::assemble_magnetic_forms;
use gaugefem::diagnostics::{heuristic_table, sample_eigenvector, HeuristicTable};
use gaugefem::eig::{lowest_eigenpairs, EigOptions};
use gaugefem::fe::{build_space, FeSpace};
use gaugefem::gauge::{compute_canonical_gauge, gauge_diagnostics, GaugeField, GaugeReport};
use gaugefem::mesh::{generate_square_n, load_mesh, validate_mesh, DomainKind, Mesh, MeshReport};
use gaugefem::potentials::{FieldKind, GridScalarPotential, ScalarPotential, VectorPotential, ZeroScalar};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{GaugeMode, RunConfig, ScalarSpec};
use crate::{CliError, Result};

/// Wall-clock seconds per pipeline stage; see the module docs for the
/// containment relations between the stages.
#[derive(Debug, Clone, Copy, Default)]
pub struct StageTimings {
    pub mesh: f64,
    pub gauge: f64,
    pub assemble: f64,
    pub factorize: f64,
    pub eigensolve: f64,
    pub total: f64,
}

/// Summary of a completed run, mirroring what the run directory records.
#[derive(Debug)]
pub struct RunOutput {
    /// The run directory (equals the configured `out`).
    pub dir: PathBuf,
    /// Computed eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Relative residuals per pair, as written to `eigenvalues.csv`.
    pub relative_residuals: Vec<f64>,
    /// Norm table of the computed pairs under the operator's own field.
    pub norms: HeuristicTable,
    /// Canonical-gauge diagnostics; `None` for original-gauge runs.
    pub gauge: Option<GaugeReport>,
    /// Per-stage timings, as written to `timing.csv`.
    pub timings: StageTimings,
    /// 1-based inclusive index ranges of eigenvalue clusters closer than
    /// the reporting threshold (0.1); vector ordering inside such a
    /// cluster is not reproducible, unlike the values themselves.
    pub degenerate_clusters: Vec<(usize, usize)>,
    /// Human-readable warnings, also recorded in the manifest.
    pub warnings: Vec<String>,
    /// Total DOF count of the FE space.
    pub num_dofs: usize,
}

/// Absolute gap below which adjacent eigenvalues are flagged as a
/// degenerate cluster in the manifest.
const CLUSTER_GAP: f64 = 0.1;

/// Git-style content hash: SHA-256 over `blob <len>\0<bytes>`.
fn content_hash(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", bytes.len()).as_bytes());
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

/// Group adjacent eigenvalues closer than [`CLUSTER_GAP`] into 1-based
/// inclusive ranges.
fn degenerate_clusters(values: &[f64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for j in 1..=values.len() {
        if j == values.len() || values[j] - values[j - 1] >= CLUSTER_GAP {
            if j - start >= 2 {
                out.push((start + 1, j));
            }
            start = j;
        }
    }
    out
}

/// Bounding box `[x_min, y_min, x_max, y_max]` of the mesh vertices.
fn bounding_box(mesh: &Mesh) -> [f64; 4] {
    let mut bb = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for v in &mesh.vertices {
        bb[0] = bb[0].min(v[0]);
        bb[1] = bb[1].min(v[1]);
        bb[2] = bb[2].max(v[0]);
        bb[3] = bb[3].max(v[1]);
    }
    bb
}

/// Everything the mesh stage produces besides the mesh itself.
struct DomainBuild {
    mesh: Mesh,
    report: MeshReport,
    /// Cells per side for the generated square (after any alignment
    /// rounding), recorded in the manifest.
    square_cells: Option<usize>,
    /// Content hash of the mesh file, for file domains.
    mesh_file_hash: Option<String>,
    /// Reoriented-triangle count from the mesh file parser.
    reoriented: Option<usize>,
}

fn build_domain(cfg: &RunConfig, warnings: &mut Vec<String>) -> Result<DomainBuild> {
    let grid_scalar = matches!(cfg.scalar, ScalarSpec::Grid { .. });
    let (mesh, square_cells, mesh_file_hash, reoriented) = match &cfg.domain {
        DomainKind::Square => {
            let mut n = match cfg.cells {
                Some(c) => c,
                // h is validated present when cells is absent.
                None => (2.0 / cfg.h.unwrap()).ceil() as usize,
            };
            if grid_scalar && cfg.cells.is_none() && n % 16 != 0 {
                let rounded = n.div_ceil(16) * 16;
                warnings.push(format!(
                    "cell count rounded up {n} -> {rounded} to align mesh lines \
                     with the 16x16 potential grid"
                ));
                n = rounded;
            }
            if grid_scalar && n % 16 != 0 {
                warnings.push(format!(
                    "16x16 potential grid is misaligned with the mesh \
                     ({n} cells per side is not a multiple of 16); quadrature \
                     crosses potential discontinuities"
                ));
            }
            (generate_square_n(n)?, Some(n), None, None)
        }
        DomainKind::LShape => {
            let h = cfg.h.unwrap();
            let mesh = gaugefem::mesh::generate_lshape(h)?;
            if grid_scalar {
                // Mesh lines sit at multiples of 1/m over a width-3 box;
                // the potential grid at multiples of 3/16.
                let m = (1.0 / h).ceil() as usize;
                if (3 * m) % 16 != 0 {
                    warnings.push(format!(
                        "16x16 potential grid is misaligned with the mesh \
                         ({m} cells per unit length); quadrature crosses \
                         potential discontinuities"
                    ));
                }
            }
            (mesh, None, None, None)
        }
        DomainKind::File(path) => {
            if cfg.h.is_some() {
                warnings.push("`h` is ignored for mesh-file domains".into());
            }
            if grid_scalar {
                warnings.push(
                    "cannot verify 16x16 potential grid alignment for mesh files".into(),
                );
            }
            let bytes = fs::read(path)?;
            let text = String::from_utf8_lossy(&bytes);
            let (mesh, load) = load_mesh(&text)?;
            (mesh, None, Some(content_hash(&bytes)), Some(load.reoriented))
        }
    };
    let report = validate_mesh(&mesh)?;
    for marker in cfg.bc_overrides.keys() {
        if !report.markers.contains(marker) {
            return Err(CliError::Config(format!(
                "bc.{marker} references a marker not present in the mesh \
                 (markers: {:?})",
                report.markers
            )));
        }
    }
    Ok(DomainBuild { mesh, report, square_cells, mesh_file_hash, reoriented })
}

/// Float formatting used in every CSV: 17 significant digits, enough to
/// round-trip an f64 exactly.
macro_rules! csv_f {
    ($v:expr) => {
        format_args!("{:.16e}", $v)
    };
}

fn write_eigenvalues_csv(path: &Path, values: &[f64], residuals: &[f64]) -> Result<()> {
    let mut s = String::from("j,lambda,residual\n");
    for (j, (v, r)) in values.iter().zip(residuals).enumerate() {
        let _ = writeln!(s, "{},{},{}", j + 1, csv_f!(v), csv_f!(r));
    }
    fs::write(path, s)?;
    Ok(())
}

fn write_norms_csv(path: &Path, t: &HeuristicTable) -> Result<()> {
    let mut s = String::from("j,lambda,grad_norm,field_u_norm,l2_norm,form_value\n");
    for j in 0..t.eigenvalues.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            j + 1,
            csv_f!(t.eigenvalues[j]),
            csv_f!(t.grad_norms[j]),
            csv_f!(t.field_norms[j]),
            csv_f!(t.l2_norms[j]),
            csv_f!(t.form_values[j]),
        );
    }
    fs::write(path, s)?;
    Ok(())
}

fn write_gauge_csv(path: &Path, g: &GaugeReport) -> Result<()> {
    let mut s = String::from("quantity,value\n");
    let rows: [(&str, f64); 7] = [
        ("orthogonality_residual", g.orthogonality_residual),
        ("interior_divergence_residual", g.interior_divergence_residual),
        ("boundary_flux", g.boundary_flux),
        ("norm_a", g.norm_a),
        ("norm_f", g.norm_f),
        ("f_dot_grad_a", g.f_dot_grad_a),
        ("grad_a_norm", g.grad_a_norm),
    ];
    for (name, value) in rows {
        let _ = writeln!(s, "{name},{}", csv_f!(value));
    }
    fs::write(path, s)?;
    Ok(())
}

fn write_timing_csv(path: &Path, t: &StageTimings) -> Result<()> {
    let mut s = String::from("stage,seconds\n");
    for (name, v) in [
        ("mesh", t.mesh),
        ("gauge", t.gauge),
        ("assemble", t.assemble),
        ("factorize", t.factorize),
        ("eigensolve", t.eigensolve),
        ("total", t.total),
    ] {
        let _ = writeln!(s, "{name},{v:.6}");
    }
    fs::write(path, s)?;
    Ok(())
}

fn write_samples(
    dir: &Path,
    space: &FeSpace,
    vectors: &[Vec<gaugefem::C64>],
    count: usize,
    n: usize,
) -> Result<()> {
    if count == 0 {
        return Ok(());
    }
    fs::create_dir_all(dir)?;
    for (j, vector) in vectors.iter().take(count).enumerate() {
        let g = sample_eigenvector(space, vector, n)?;
        let mut s = String::from("x,y,inside,modulus,re,im,phase\n");
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                let q = iy * g.nx + ix;
                if g.inside[q] {
                    let _ = writeln!(
                        s,
                        "{},{},1,{},{},{},{}",
                        csv_f!(g.xs[ix]),
                        csv_f!(g.ys[iy]),
                        csv_f!(g.modulus[q]),
                        csv_f!(g.re[q]),
                        csv_f!(g.im[q]),
                        csv_f!(g.phase[q]),
                    );
                } else {
                    let _ = writeln!(s, "{},{},0,,,,", csv_f!(g.xs[ix]), csv_f!(g.ys[iy]));
                }
            }
        }
        fs::write(dir.join(format!("eig_{:03}.csv", j + 1)), s)?;
    }
    Ok(())
}

/// Execute a validated configuration and write its run directory.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunOutput> {
    if cfg.out.exists() {
        return Err(CliError::Config(format!(
            "output directory `{}` already exists",
            cfg.out.display()
        )));
    }
    let t_total = Instant::now();
    let mut warnings = Vec::new();

    // --- mesh stage: domain, validation, FE space.
    let t = Instant::now();
    let built = build_domain(cfg, &mut warnings)?;
    let bbox = bounding_box(&built.mesh);
    let mut bc = BTreeMap::new();
    for &marker in &built.report.markers {
        bc.insert(marker, *cfg.bc_overrides.get(&marker).unwrap_or(&cfg.bc_default));
    }
    let space = build_space(built.mesh, cfg.p, &bc)?;
    let time_mesh = t.elapsed().as_secs_f64();

    // --- gauge stage (canonical runs only).
    let t = Instant::now();
    let gauge_field: Option<GaugeField<FieldKind>> = match cfg.gauge {
        GaugeMode::Original => None,
        GaugeMode::Canonical => {
            Some(compute_canonical_gauge(&space, cfg.potential, cfg.quad)?)
        }
    };
    let time_gauge = t.elapsed().as_secs_f64();

    let scalar: Box<dyn ScalarPotential> = match cfg.scalar {
        ScalarSpec::None => Box::new(ZeroScalar),
        ScalarSpec::Grid { seed, vstar } => {
            Box::new(GridScalarPotential::new(seed, vstar, 16, bbox))
        }
    };
    let field: &dyn VectorPotential = match &gauge_field {
        Some(g) => g,
        None => &cfg.potential,
    };

    // --- assembly stage.
    let t = Instant::now();
    let pencil = assemble_magnetic_forms(&space, field, scalar.as_ref(), cfg.quad)?;
    let time_assemble = t.elapsed().as_secs_f64();

    // --- eigensolve stage.
    let t = Instant::now();
    let opts = EigOptions { k: cfg.k, tol: cfg.tol, ..EigOptions::default() };
    let result = lowest_eigenpairs(&pencil, &opts)?;
    let time_eigensolve = t.elapsed().as_secs_f64();

    // --- diagnostics.
    let norms = heuristic_table(&space, &result, field, scalar.as_ref(), cfg.quad)?;
    let gauge_report = match &gauge_field {
        Some(g) => Some(gauge_diagnostics(g)?),
        None => None,
    };
    let clusters = degenerate_clusters(&result.values);

    // --- stage outputs into a temporary sibling, rename on success.
    let parent = cfg.out.parent().unwrap_or(Path::new(""));
    let name = cfg
        .out
        .file_name()
        .ok_or_else(|| CliError::Config(format!("bad output path `{}`", cfg.out.display())))?;
    let tmp = parent.join(format!("{}.tmp.{}", name.to_string_lossy(), std::process::id()));
    let mut timings = StageTimings {
        mesh: time_mesh,
        gauge: time_gauge,
        assemble: time_assemble,
        factorize: result.factorize_seconds,
        eigensolve: time_eigensolve,
        total: 0.0,
    };

    let write_all = |timings: &mut StageTimings| -> Result<()> {
        fs::create_dir_all(&tmp)?;
        write_eigenvalues_csv(&tmp.join("eigenvalues.csv"), &result.values, &result.relative_residuals)?;
        write_norms_csv(&tmp.join("norms.csv"), &norms)?;
        if let Some(g) = &gauge_report {
            write_gauge_csv(&tmp.join("gauge.csv"), g)?;
        }
        write_samples(&tmp.join("samples"), &space, &result.vectors, cfg.samples, cfg.sample_n)?;

        let mut m = String::new();
        let _ = writeln!(m, "tool=gaugefem-cli {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(m, "catalog=gaugefem {}", gaugefem::VERSION);
        let _ = writeln!(m, "config_hash={}", content_hash(cfg.canonical_text().as_bytes()));
        if let Some(hash) = &built.mesh_file_hash {
            let _ = writeln!(m, "mesh_file_hash={hash}");
        }
        if let Some(r) = built.reoriented {
            let _ = writeln!(m, "mesh_reoriented={r}");
        }
        m.push_str(&cfg.canonical_text());
        if let Some(n) = built.square_cells {
            let _ = writeln!(m, "mesh_cells={n}");
        }
        let _ = writeln!(m, "mesh_vertices={}", built.report.num_vertices);
        let _ = writeln!(m, "mesh_triangles={}", built.report.num_triangles);
        let _ = writeln!(m, "mesh_h_max={:.6e}", built.report.h_max);
        let _ = writeln!(m, "num_dofs={}", space.num_dofs);
        let _ = writeln!(m, "essential_dofs={}", space.essential_dofs.len());
        let _ = writeln!(m, "field_norm={}", csv_f!(norms.field_norm));
        if let Some(g) = &gauge_report {
            let _ = writeln!(m, "norm_a={}", csv_f!(g.norm_a));
            let _ = writeln!(m, "norm_f={}", csv_f!(g.norm_f));
        }
        let _ = writeln!(m, "shift={}", csv_f!(result.shift));
        let _ = writeln!(m, "operator_applications={}", result.operator_applications);
        let _ = writeln!(m, "restarts={}", result.restarts);
        let _ = writeln!(m, "factorizations={}", result.factorizations);
        if clusters.is_empty() {
            let _ = writeln!(m, "degenerate_clusters=none");
        } else {
            let ranges: Vec<String> =
                clusters.iter().map(|(a, b)| format!("{a}-{b}")).collect();
            let _ = writeln!(m, "degenerate_clusters={}", ranges.join(","));
        }
        for (i, w) in warnings.iter().enumerate() {
            let _ = writeln!(m, "warning.{}={w}", i + 1);
        }
        fs::write(tmp.join("manifest"), m)?;

        timings.total = t_total.elapsed().as_secs_f64();
        write_timing_csv(&tmp.join("timing.csv"), timings)?;
        fs::rename(&tmp, &cfg.out)?;
        Ok(())
    };
    if let Err(e) = write_all(&mut timings) {
        let _ = fs::remove_dir_all(&tmp);
        return Err(e);
    }

    Ok(RunOutput {
        dir: cfg.out.clone(),
        eigenvalues: result.values,
        relative_residuals: result.relative_residuals,
        norms,
        gauge: gauge_report,
        timings,
        degenerate_clusters: clusters,
        warnings,
        num_dofs: space.num_dofs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cluster_grouping_follows_the_gap_threshold() {
        assert!(degenerate_clusters(&[1.0, 2.0, 3.0]).is_empty());
        assert_eq!(degenerate_clusters(&[1.0, 1.05, 2.0, 3.0, 3.01, 3.02]), vec![(1, 2), (4, 6)]);
        assert_eq!(degenerate_clusters(&[5.0, 5.0]), vec![(1, 2)]);
    }

    #[test]
    fn content_hash_matches_git_blob_convention() {
        // sha256 of "blob 5\0hello" — stable reference digest.
        assert_eq!(
            content_hash(b"hello"),
            "8aec4e4876f854f688d0ebfc8f37598f38e5fd6903cccc850ca36591175aeb60"
        );
        assert_ne!(content_hash(b"a"), content_hash(b"b"));
    }

    #[test]
    fn bounding_box_tracks_vertices() {
        let mesh = generate_square_n(2).unwrap();
        assert_eq!(bounding_box(&mesh), [-1.0, -1.0, 1.0, 1.0]);
    }
}
