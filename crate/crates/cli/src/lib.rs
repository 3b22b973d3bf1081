//! Experiment runner for the `gaugefem` library: reproduce the full
//! pipeline — mesh → (optional) canonical gauge → assemble → solve — from a
//! flat config file, and leave behind a self-describing run directory.
//!
//! A run directory contains:
//!
//! * `eigenvalues.csv` — `j,lambda,residual` (relative residuals);
//! * `norms.csv` — per-pair norm table (`‖∇u‖`, `‖Gu‖`, `‖u‖`, form value);
//! * `gauge.csv` — canonical-gauge diagnostics (canonical runs only);
//! * `samples/eig_XXX.csv` — eigenvector samples on a uniform grid;
//! * `timing.csv` — per-stage wall-clock seconds;
//! * `manifest` — resolved config, content hashes, mesh and solver stats.
//!
//! Directories are all-or-nothing: outputs are staged in a temporary
//! sibling directory and renamed into place only when every file has been
//! written, so a crashed or failed run never leaves a partial directory.
//!
//! [`compare_runs`] diffs the eigenvalues of two compatible run
//! directories and reports the stability metric `s = max_j |λ_j − λ_j′|`,
//! the quantity used to judge how much a spectrum moves between mesh
//! resolutions.

mod compare;
mod config;
mod info;
mod runner;

pub use compare::{compare_runs, CompareReport};
pub use config::{parse_config, GaugeMode, RunConfig, ScalarSpec};
pub use info::{catalog, mesh_info};
pub use runner::{run_experiment, RunOutput, StageTimings};

/// Errors surfaced by the runner, split by which exit code they map to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration or unusable input files — exit code 2.
    #[error("config: {0}")]
    Config(String),

    /// Error from the solver library. Input-side errors (mesh parsing,
    /// invalid requests, I/O) exit with 2, numerical failures with 3.
    #[error(transparent)]
    Core(#[from] gaugefem::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(gaugefem::Error::Io(e))
    }
}

impl CliError {
    /// Process exit code for this error: 2 for configuration problems,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => {
                if e.is_input_error() {
                    2
                } else {
                    3
                }
            }
        }
    }
}

/// Result alias for runner operations.
pub type Result<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_split_input_from_numerical_failures() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(
            CliError::Core(gaugefem::Error::MeshGeneration("h".into())).exit_code(),
            2
        );
        assert_eq!(
            CliError::Core(gaugefem::Error::EigNonConvergence("slow".into())).exit_code(),
            3
        );
        assert_eq!(
            CliError::Core(gaugefem::Error::SingularPivot {
                index: 0,
                pivot: 0.0,
                threshold: 1e-14
            })
            .exit_code(),
            3
        );
    }
}
