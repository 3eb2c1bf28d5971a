use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state count {0}: need at least 2 states")]
    InvalidStateCount(usize),

    #[error("binary structure requires exactly 2 states, got {0}")]
    BinaryNeedsTwoStates(usize),

    #[error("absorbing state {absorbing} out of range for {states} states")]
    AbsorbingOutOfRange { absorbing: usize, states: usize },

    #[error("invalid time parameter {0}")]
    InvalidTime(f64),

    #[error("kernel entry {value:e} is below the clipping threshold")]
    NegativeMass { value: f64 },

    #[error("complex expansion left an imaginary residual of {0:e}")]
    ImaginaryResidual(f64),

    #[error("probability {0} out of range")]
    ProbabilityOutOfRange(f64),

    #[error("state {state} out of range for dimension of size {size}")]
    StateOutOfRange { state: usize, size: usize },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("grid perturbation needs at least one categorical dimension")]
    NoCategoricalDims,

    #[error("asymmetric kernel on categorical dimension {0} is not allowed in product mode")]
    AsymmetricKernel(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("state space with {0} states is too large to enumerate")]
    SpaceTooLarge(u128),

    #[error("non-finite activation in layer {layer}")]
    NonFiniteActivation { layer: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at step {step} (loss {loss})")]
    Divergence { step: u64, loss: f64 },

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidStateCount(_) => "invalid_state_count",
            Error::BinaryNeedsTwoStates(_) => "binary_needs_two_states",
            Error::AbsorbingOutOfRange { .. } => "absorbing_out_of_range",
            Error::InvalidTime(_) => "invalid_time",
            Error::NegativeMass { .. } => "negative_mass",
            Error::ImaginaryResidual(_) => "imaginary_residual",
            Error::ProbabilityOutOfRange(_) => "probability_out_of_range",
            Error::StateOutOfRange { .. } => "state_out_of_range",
            Error::SchemaMismatch(_) => "schema_mismatch",
            Error::NoCategoricalDims => "no_categorical_dims",
            Error::AsymmetricKernel(_) => "asymmetric_kernel",
            Error::InvalidConfig(_) => "invalid_config",
            Error::SpaceTooLarge(_) => "space_too_large",
            Error::NonFiniteActivation { .. } => "non_finite_activation",
            Error::NonFinite(_) => "non_finite",
            Error::Divergence { .. } => "divergence",
            Error::Unsupported(_) => "unsupported",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
