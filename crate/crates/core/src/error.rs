use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at offset {offset} (expected `{expected}`)")]
    UnknownIdentifier {
        name: String,
        offset: usize,
        expected: String,
    },

    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { name: String, offset: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid family: {0}")]
    InvalidFamily(String),

    #[error("unknown builtin family `{0}` (expected hadeler_rothe, cgm_sine or exp_demo)")]
    UnknownBuiltin(String),

    #[error("A - 2B does not change sign on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("step size underflow at U = {at}")]
    StepUnderflow { at: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid bracket: shooting fails at the upper speed c = {c_upper}")]
    BracketInvalid { c_upper: f64 },

    #[error("trial function invalid: {0}")]
    InvalidTrial(String),

    #[error("weighted integral diverges: decay rate {decay} does not exceed c/2 = {half_c}")]
    Divergence { decay: f64, half_c: f64 },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("front reached the domain boundary at t = {t}")]
    FrontAtBoundary { t: f64 },

    #[error("numerical instability at t = {t}: u = {u}")]
    Instability { t: f64, u: f64 },

    #[error("non-monotone regime predicate: {0}")]
    NonMonotone(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
