use thiserror::Error;

/// Errors produced anywhere in the simulation and decoding pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("qubit index {index} out of range for {n_qubits}-qubit register")]
    QubitIndex { index: usize, n_qubits: usize },

    #[error("gate {0} is not supported here")]
    UnsupportedGate(String),

    #[error("circuit level mismatch: expected {expected}, found {found}")]
    Level { expected: String, found: String },

    #[error("register of {n_qubits} qubits exceeds the limit of {max}")]
    Size { n_qubits: usize, max: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("value {value} outside the valid domain: {reason}")]
    Domain { value: f64, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
