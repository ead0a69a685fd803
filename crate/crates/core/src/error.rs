use thiserror::Error;

/// Errors shared across the expression, tensor, curvature and solver layers.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at byte {offset}: {msg}")]
    Syntax { offset: usize, msg: String },

    #[error("exponent at byte {offset} is not an integer literal")]
    NonIntegerExponent { offset: usize },

    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },

    #[error("unbound variable `{0}`")]
    UnboundVariable(String),

    #[error("division by zero")]
    DivisionByZero,

    #[error("transcendental function `{0}` cannot be evaluated in exact mode")]
    TranscendentalInExact(String),

    #[error("evaluation produced a non-finite float")]
    NonFinite,

    #[error("exact and float scalars cannot be mixed")]
    ModeMismatch,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("variance mismatch: {0}")]
    Variance(String),

    #[error("invalid dimension {0}: supported range is 4..=8")]
    Dimension(usize),

    #[error("metric file error at line {line}: {msg}")]
    MetricFile { line: usize, msg: String },

    #[error("degenerate Weyl operator: {0}")]
    DegenerateWeyl(String),

    #[error("random Weyl generation failed after {0} attempts")]
    GenerationFailed(usize),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
