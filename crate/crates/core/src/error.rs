use thiserror::Error;

/// Crate-wide error type. CLI exit codes are derived from these variants.
#[derive(Debug, Error)]
pub enum Error {
    #[error("operators live on different spaces")]
    SpaceMismatch,
    #[error("invalid space: {0}")]
    InvalidSpace(String),
    #[error("leg {leg} out of range for space with {len} factors")]
    LegOutOfRange { leg: usize, len: usize },
    #[error("leg {leg} is not a qubit")]
    NotAQubit { leg: usize },
    #[error("leg {leg} is not a bosonic mode")]
    NotABoson { leg: usize },
    #[error("matrix index ({row}, {col}) out of range for dimension {dim}")]
    IndexOutOfRange { row: usize, col: usize, dim: usize },

    #[error("syntax error at offset {offset}: {msg}")]
    Syntax { offset: usize, msg: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("`{func}` requires a scalar argument (offset {offset})")]
    NonScalarArgument { func: &'static str, offset: usize },
    #[error("type mismatch at offset {offset}: {msg}")]
    ExprType { offset: usize, msg: String },

    #[error("invalid rational `{0}`")]
    InvalidRational(String),
    #[error("invalid frequency: {0}")]
    InvalidFrequency(String),
    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid basis-state label `{0}`")]
    InvalidLabel(String),

    #[error("degenerate resonance: {count} zero-sum tuple(s) with a vanishing tail sum")]
    DegenerateResonance { count: usize },
    #[error("order must be >= 2 (got {0})")]
    OrderTooLow(usize),

    #[error("step too large: dt * max frequency = {product:.6} exceeds 0.05")]
    StepTooLarge { product: f64 },
    #[error("boson cutoff leakage: edge occupancy {occupancy:.3e} at t = {t:.6} exceeds 1e-3")]
    LeakageExceeded { occupancy: f64, t: f64 },
    #[error("propagation norm drift {drift:.3e} exceeds 1e-9")]
    NormDrift { drift: f64 },
    #[error("effective generator is not hermitian (defect {defect:.3e})")]
    NonHermitianGenerator { defect: f64 },
    #[error("window too short: {msg}")]
    WindowTooShort { msg: String },
    #[error("trajectories have different grids")]
    GridMismatch,

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
