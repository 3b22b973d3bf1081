//! Eigenvalue comparison between two run directories.
//!
//! Runs are comparable when they solved the same operator on the same
//! domain with the same discretization order and pair count — everything
//! except the gauge mode and the mesh resolution, which are exactly the
//! knobs one studies with this tool. The headline number is the stability
//! metric `s = max_j |λ_j(A) − λ_j(B)|`: across two mesh levels it
//! measures how far the spectrum still moves under refinement.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::{CliError, Result};

/// Per-pair eigenvalue differences between two runs plus the stability
/// metric over all pairs.
#[derive(Debug, Clone)]
pub struct CompareReport {
    /// Eigenvalues of the first run, ascending.
    pub lambda_a: Vec<f64>,
    /// Eigenvalues of the second run, ascending.
    pub lambda_b: Vec<f64>,
    /// `|λ_j(A) − λ_j(B)|` per pair.
    pub abs_diff: Vec<f64>,
    /// `max_j |λ_j(A) − λ_j(B)|`.
    pub s: f64,
    /// The comparison rendered as CSV (`j,lambda_a,lambda_b,abs_diff`,
    /// final row `max,,,s`).
    pub csv: String,
}

/// Manifest keys that must agree for a comparison to be meaningful. The
/// gauge mode and mesh resolution are deliberately absent.
const REQUIRED_EQUAL: &[&str] =
    &["domain", "mesh_file_hash", "potential", "scalar", "seed", "vstar", "p", "k"];

fn read_manifest(dir: &Path) -> Result<BTreeMap<String, String>> {
    let path = dir.join("manifest");
    let text = fs::read_to_string(&path).map_err(|e| {
        CliError::Config(format!("`{}` is not a run directory: {e}", dir.display()))
    })?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect())
}

fn read_eigenvalues(dir: &Path) -> Result<Vec<f64>> {
    let path = dir.join("eigenvalues.csv");
    let text = fs::read_to_string(&path).map_err(|e| {
        CliError::Config(format!("`{}` has no eigenvalues.csv: {e}", dir.display()))
    })?;
    let mut out = Vec::new();
    for line in text.lines().skip(1) {
        let lambda = line.split(',').nth(1).ok_or_else(|| {
            CliError::Config(format!("malformed row `{line}` in {}", path.display()))
        })?;
        out.push(lambda.parse().map_err(|_| {
            CliError::Config(format!("bad eigenvalue `{lambda}` in {}", path.display()))
        })?);
    }
    Ok(out)
}

/// Compare the eigenvalues of two compatible run directories.
pub fn compare_runs(dir_a: &Path, dir_b: &Path) -> Result<CompareReport> {
    let man_a = read_manifest(dir_a)?;
    let man_b = read_manifest(dir_b)?;
    for key in REQUIRED_EQUAL {
        let (a, b) = (man_a.get(*key), man_b.get(*key));
        if a != b {
            return Err(CliError::Config(format!(
                "runs are not comparable: `{key}` differs ({} vs {})",
                a.map_or("absent", |v| v),
                b.map_or("absent", |v| v),
            )));
        }
    }

    let lambda_a = read_eigenvalues(dir_a)?;
    let lambda_b = read_eigenvalues(dir_b)?;
    if lambda_a.len() != lambda_b.len() {
        return Err(CliError::Config(format!(
            "runs are not comparable: {} vs {} eigenvalues",
            lambda_a.len(),
            lambda_b.len()
        )));
    }

    let abs_diff: Vec<f64> =
        lambda_a.iter().zip(&lambda_b).map(|(a, b)| (a - b).abs()).collect();
    let s = abs_diff.iter().cloned().fold(0.0, f64::max);

    let mut csv = String::from("j,lambda_a,lambda_b,abs_diff\n");
    for (j, ((a, b), d)) in lambda_a.iter().zip(&lambda_b).zip(&abs_diff).enumerate() {
        let _ = writeln!(csv, "{},{a:.16e},{b:.16e},{d:.16e}", j + 1);
    }
    let _ = writeln!(csv, "max,,,{s:.16e}");

    Ok(CompareReport { lambda_a, lambda_b, abs_diff, s, csv })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake_run(dir: &Path, manifest: &str, values: &[f64]) {
        fs::create_dir_all(dir).unwrap();
        fs::write(dir.join("manifest"), manifest).unwrap();
        let mut csv = String::from("j,lambda,residual\n");
        for (j, v) in values.iter().enumerate() {
            let _ = writeln!(csv, "{},{v:.16e},1e-9", j + 1);
        }
        fs::write(dir.join("eigenvalues.csv"), csv).unwrap();
    }

    #[test]
    fn identical_runs_compare_to_zero() {
        let base = tempfile::tempdir().unwrap();
        let man = "domain=square\npotential=ex1\nscalar=none\np=3\nk=2\n";
        fake_run(&base.path().join("a"), man, &[1.5, 2.5]);
        let rep = compare_runs(&base.path().join("a"), &base.path().join("a")).unwrap();
        assert_eq!(rep.s, 0.0);
        assert_eq!(rep.abs_diff, vec![0.0, 0.0]);
        assert!(rep.csv.ends_with("max,,,0.0000000000000000e0\n"));
    }

    #[test]
    fn stability_metric_is_the_worst_pair() {
        let base = tempfile::tempdir().unwrap();
        let man = "domain=square\npotential=ex1\nscalar=none\np=3\nk=3\n";
        fake_run(&base.path().join("a"), man, &[1.0, 2.0, 3.0]);
        fake_run(&base.path().join("b"), man, &[1.1, 2.0, 2.7]);
        let rep = compare_runs(&base.path().join("a"), &base.path().join("b")).unwrap();
        assert!((rep.s - 0.3).abs() < 1e-12);
        assert_eq!(rep.abs_diff.len(), 3);
    }

    #[test]
    fn mismatched_operators_are_rejected_by_key() {
        let base = tempfile::tempdir().unwrap();
        fake_run(
            &base.path().join("a"),
            "domain=square\npotential=ex1\nscalar=none\np=3\nk=2\n",
            &[1.0, 2.0],
        );
        fake_run(
            &base.path().join("b"),
            "domain=square\npotential=ex2\nscalar=none\np=3\nk=2\n",
            &[1.0, 2.0],
        );
        let err = compare_runs(&base.path().join("a"), &base.path().join("b"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("`potential` differs"), "{err}");
    }

    #[test]
    fn gauge_and_resolution_may_differ() {
        let base = tempfile::tempdir().unwrap();
        fake_run(
            &base.path().join("a"),
            "domain=square\npotential=ex1\nscalar=none\np=3\nk=1\ngauge=original\nh=0.05\n",
            &[5.0],
        );
        fake_run(
            &base.path().join("b"),
            "domain=square\npotential=ex1\nscalar=none\np=3\nk=1\ngauge=canonical\nh=0.03\n",
            &[5.2],
        );
        let rep = compare_runs(&base.path().join("a"), &base.path().join("b")).unwrap();
        assert!((rep.s - 0.2).abs() < 1e-12);
    }

    #[test]
    fn non_run_directories_are_config_errors() {
        let base = tempfile::tempdir().unwrap();
        let err = compare_runs(base.path(), base.path()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
