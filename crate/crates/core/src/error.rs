use thiserror::Error;

/// Errors produced by mesh handling, space construction, assembly, the
/// sparse solver stack, and the eigensolver.
#[derive(Debug, Error)]
pub enum Error {
    /// Mesh generation parameters out of range (e.g. `h` too large).
    #[error("mesh generation: {0}")]
    MeshGeneration(String),

    /// Mesh file could not be parsed; carries the 1-based line number.
    #[error("mesh parse error at line {line}: {msg}")]
    MeshParse { line: usize, msg: String },

    /// Mesh failed a structural validity check.
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    /// Finite element space construction failed.
    #[error("fe space: {0}")]
    Space(String),

    /// Quadrature request outside the supported range.
    #[error("quadrature: {0}")]
    Quadrature(String),

    /// Inconsistent dimensions or invalid data passed to assembly.
    #[error("assembly: {0}")]
    Assembly(String),

    /// Triplet/shape mismatch when building a sparse matrix.
    #[error("sparse construction: {0}")]
    SparseConstruction(String),

    /// A pivot fell below the singularity threshold during factorization.
    /// `index` is the elimination step in factor ordering.
    #[error("singular factorization at pivot {index} (|pivot| = {pivot:.3e}, threshold = {threshold:.3e})")]
    SingularPivot {
        index: usize,
        pivot: f64,
        threshold: f64,
    },

    /// Structurally singular matrix (empty pivot column).
    #[error("structurally singular matrix at column {0}")]
    StructurallySingular(usize),

    /// The eigensolver did not reach the residual tolerance.
    #[error("eigensolver did not converge: {0}")]
    EigNonConvergence(String),

    /// Invalid request to the eigensolver (k = 0, k > dimension, ...).
    #[error("eigensolver request: {0}")]
    EigRequest(String),

    /// Problem too large for the dense oracle path.
    #[error("dense oracle limit exceeded: dimension {n} > {max}")]
    DenseOracleTooLarge { n: usize, max: usize },

    /// Canonical gauge solve failed (should not happen with the mean
    /// constraint in place); carries solver diagnostics.
    #[error("canonical gauge solve failed: {0}")]
    GaugeSolve(String),

    /// Underlying I/O error (mesh files, sample output).
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that indicate bad input/configuration rather than a
    /// numerical failure. The CLI maps these to exit code 2, numerical
    /// failures to exit code 3.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::MeshGeneration(_)
                | Error::MeshParse { .. }
                | Error::InvalidMesh(_)
                | Error::Space(_)
                | Error::Quadrature(_)
                | Error::Assembly(_)
                | Error::SparseConstruction(_)
                | Error::EigRequest(_)
                | Error::DenseOracleTooLarge { .. }
                | Error::Io(_)
        )
    }
}
