use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty field: every entry is zero")]
    EmptyField,
    #[error("non-encodable field: entry {index} is {value}")]
    NonEncodableField { index: usize, value: f64 },
    #[error("expected {expected} values for the register, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("qubit index {index} out of range for {total} qubits")]
    IndexOutOfRange { index: usize, total: usize },
    #[error("invalid gate: {0}")]
    InvalidGate(String),
    #[error("post-selection impossible: probability {probability:e}")]
    PostSelectionImpossible { probability: f64 },
    #[error("advection too strong for weight set: effective weight {direction} is {value}")]
    AdvectionTooStrong { direction: usize, value: f64 },
    #[error("all direction weights are zero")]
    ZeroWeights,
    #[error("quantum circuits require omega = 1, got {0}")]
    UnsupportedOmega(f64),
    #[error("difference mode needs nonuniform field")]
    DegenerateDifference,
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),
    #[error("invalid model: {0}")]
    InvalidSpec(String),
    #[error("histogram has zero total shots")]
    ZeroShots,
    #[error("amplitude {index} is not a nonnegative real ({re}, {im})")]
    NonPositiveAmplitude { index: usize, re: f64, im: f64 },
    #[error("internal consistency check failed: {0}")]
    Assertion(String),
}
