use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitOutOfRange { index: usize, n_qubits: usize },
    #[error("control and target must differ (both {0})")]
    ControlEqualsTarget(usize),
    #[error("gate {gate} has unbound parameter {symbol}")]
    UnboundParameter { gate: usize, symbol: String },
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("operation requires a density matrix")]
    RequiresMixedState,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("qubit count mismatch: {left} vs {right}")]
    QubitCountMismatch { left: usize, right: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("single-class outcome")]
    SingleClass,
    #[error("objective is not finite at the initial point")]
    NonFiniteObjective,
    #[error("optimizer diverged after {} iterations (non-finite objective)", trace.len())]
    Divergence { trace: Vec<f64> },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("sensitivity {0} is not attainable")]
    UnattainableSensitivity(f64),
    #[error("degenerate contingency table: {0}")]
    DegenerateTable(String),
    #[error("perfect or quasi-complete separation (|beta| = {0:.1})")]
    Separation(f64),
    #[error("singular matrix in {0}")]
    Singular(&'static str),
    #[error("models are not nested: {0}")]
    NotNested(String),
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse { path: PathBuf, line: usize, column: String, message: String },
    #[error("{path}: missing required column {column}")]
    MissingColumn { path: PathBuf, column: String },
    #[error("record {record} has no value for {feature}")]
    MissingFeature { record: usize, feature: String },
    #[error("{context}: {source}")]
    Context { context: String, source: Box<Error> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }
}
