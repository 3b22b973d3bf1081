//! `gaugefem` binary: thin argument parsing and exit-code mapping around
//! the library in `gaugefem_cli`. Exit codes: 0 success, 2 configuration
//! error, 3 numerical failure.

use clap::{Parser, Subcommand};
use gaugefem_cli::{catalog, compare_runs, mesh_info, parse_config, run_experiment, CliError};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gaugefem", version, about = "Eigenpairs of 2D magnetic Schrödinger operators, \
with optional canonical (minimal-norm) gauge transformation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment described by a key=value config file.
    Run {
        /// Path to the config file; see the library docs for the keys.
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare the eigenvalues of two compatible run directories.
    Compare {
        /// First run directory.
        dir_a: PathBuf,
        /// Second run directory.
        dir_b: PathBuf,
    },
    /// Validate a mesh file and print its statistics.
    MeshInfo {
        /// Path to an ASCII mesh file.
        file: PathBuf,
    },
    /// List built-in domains, potentials, and gauge modes.
    Catalog,
}

fn dispatch(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Run { config } => {
            let text = std::fs::read_to_string(&config).map_err(|e| {
                CliError::Config(format!("cannot read config `{}`: {e}", config.display()))
            })?;
            let cfg = parse_config(&text)?;
            let out = run_experiment(&cfg)?;
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            println!("run written to {}", out.dir.display());
            for (j, (v, r)) in
                out.eigenvalues.iter().zip(&out.relative_residuals).enumerate()
            {
                println!("lambda_{} = {v:.10e}   (residual {r:.2e})", j + 1);
            }
            Ok(())
        }
        Cmd::Compare { dir_a, dir_b } => {
            let report = compare_runs(&dir_a, &dir_b)?;
            print!("{}", report.csv);
            Ok(())
        }
        Cmd::MeshInfo { file } => {
            print!("{}", mesh_info(&file)?);
            Ok(())
        }
        Cmd::Catalog => {
            print!("{}", catalog());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    // Clap's own usage errors exit with 2, matching the config-error code.
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
