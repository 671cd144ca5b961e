use thiserror::Error;

#[derive(Debug, Error)]
pub enum QagError {
    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitOutOfRange { index: usize, n_qubits: usize },
    #[error("invalid gate: {0}")]
    InvalidGate(String),
    #[error("non-finite angle {0}")]
    NonFiniteAngle(f64),
    #[error("expected {expected} parameters, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("unsupported qubit count {0}")]
    UnsupportedQubits(usize),
    #[error("unknown architecture '{0}'")]
    UnknownArchitecture(String),
    #[error("variant '{0}' already applied")]
    VariantAlreadyApplied(&'static str),
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("counts {counts} exceed shots {shots}")]
    CountsOutOfRange { counts: u64, shots: u64 },
    #[error("correlation target is not positive semidefinite")]
    NotPositiveSemidefinite,
    #[error("malformed data: {0}")]
    MalformedData(String),
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("non-finite loss")]
    NonFiniteLoss,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = QagError> = std::result::Result<T, E>;
