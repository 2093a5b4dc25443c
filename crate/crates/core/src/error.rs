use std::path::PathBuf;

/// Errors produced by the simulation library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("site {site} out of range for {n_qubits} qubits (sites are 1-based)")]
    SiteOutOfRange { site: usize, n_qubits: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("qubit count mismatch: {system} system + {bath} bath qubits do not match a {actual}-qubit state")]
    QubitCountMismatch {
        system: usize,
        bath: usize,
        actual: usize,
    },

    #[error("amplitude vector length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("negative branch weight {0}")]
    NegativeWeight(f64),

    #[error("branch weights sum to {0}, expected 1")]
    WeightSum(f64),

    #[error("empty branch list")]
    EmptyBranches,

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("instance size {n} exceeds the enumeration bound {max}")]
    EnumerationBound { n: usize, max: usize },

    #[error("bath size {n} exceeds the dense diagonalization bound {max}")]
    DiagonalizationBound { n: usize, max: usize },

    #[error("system has {system} qubits but bath has {bath}; sizes must match")]
    SizeMismatch { system: usize, bath: usize },

    #[error("Krylov propagation did not converge: {0}")]
    KrylovNonConvergence(String),

    #[error("Lanczos ground-state search did not converge: residual {residual:e} after {iterations} iterations")]
    LanczosNonConvergence { residual: f64, iterations: usize },

    #[error("measurement outcome {j} has probability {probability:e}, too small to condition on")]
    NegligibleOutcome { j: usize, probability: f64 },

    #[error("instance file {path}: {reason}")]
    InstanceFile { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
