use thiserror::Error;

#[derive(Debug, Error)]
pub enum TomoError {
    #[error("qubit count {0} outside supported range 1..=5")]
    QubitCount(usize),
    #[error("{state} state requires at least {min} qubits, got {got}")]
    StateTooSmall {
        state: &'static str,
        min: usize,
        got: usize,
    },
    #[error("rank {rank} invalid for dimension {dim}")]
    InvalidRank { rank: usize, dim: usize },
    #[error("outcome {outcome} out of range for {dim} outcomes")]
    OutcomeOutOfRange { outcome: usize, dim: usize },
    #[error("setting index {index} out of range for {count} settings")]
    SettingOutOfRange { index: usize, count: usize },
    #[error("not a density matrix: {0}")]
    InvalidDensityMatrix(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("empty input vector")]
    Empty,
    #[error("negative weight {value} at index {index}")]
    NegativeWeight { index: usize, value: f64 },
    #[error("coefficient vector is all zero")]
    ZeroCoefficients,
    #[error("residual bound {epsilon:e} not reached; best residual {best:e}")]
    ResidualUnreachable { epsilon: f64, best: f64 },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("matrix file parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = TomoError> = std::result::Result<T, E>;
