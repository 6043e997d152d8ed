use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised across the pipeline.
///
/// Variants carry enough context (mode index, interval, trajectory) to
/// locate the failing computation without re-running it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("invalid forcing: {0}")]
    InvalidForcing(String),

    #[error("evaluation at {lambda} lies within pole tolerance of -gamma_{index} = {pole}")]
    PoleEvaluation {
        lambda: Complex64,
        index: usize,
        pole: f64,
    },

    #[error("no sign change located on ({lo}, {hi}): f(lo) = {f_lo:e}, f(hi) = {f_hi:e}")]
    BracketFailure {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("time {t} outside sampled forcing grid [{lo}, {hi}]")]
    OutOfGrid { t: f64, lo: f64, hi: f64 },

    #[error("polynomial form refused for {terms} kernel terms (limit {limit})")]
    ConditioningRefusal { terms: usize, limit: usize },

    #[error("Newton iteration for mode {mode} did not converge; last iterates {trajectory:?}")]
    NewtonDivergence {
        mode: usize,
        trajectory: Vec<Complex64>,
    },

    #[error("QR iteration did not converge for companion matrix of degree {degree}")]
    ConvergenceFailure { degree: usize },

    #[error("{0}")]
    RequiresZeroB(String),

    #[error("mode {mode}: {message}")]
    Mode { mode: usize, message: String },

    #[error("spectrum missing for mode {0}")]
    MissingSpectrum(usize),

    #[error("{0}")]
    DomainRestriction(String),

    #[error("physical evaluation requires the dirichlet_1d operator model")]
    ModelMismatch,

    #[error("step size {dt} too large: dt * max(gamma_N, a_n) = {product} > 0.1")]
    StepSizeTooLarge { dt: f64, product: f64 },

    #[error("tail estimate {tail:e} exceeds 1% of computed norm {norm:e}")]
    InsufficientHorizon { tail: f64, norm: f64 },

    #[error("inadmissible problem: {0}")]
    InadmissibleProblem(String),

    #[error("bound {bound} violated at lambda = {lambda}, mode {mode}: {lhs:e} > {rhs:e}")]
    AssertionFailure {
        bound: String,
        lambda: Complex64,
        mode: usize,
        lhs: f64,
        rhs: f64,
    },

    #[error("no contraction weight found up to {limit}")]
    NotFound { limit: f64 },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag used in the CLI's error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidKernel(_) => "InvalidKernel",
            Error::InvalidOperator(_) => "InvalidOperator",
            Error::InvalidForcing(_) => "InvalidForcing",
            Error::PoleEvaluation { .. } => "PoleEvaluation",
            Error::BracketFailure { .. } => "BracketFailure",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::OutOfGrid { .. } => "OutOfGrid",
            Error::ConditioningRefusal { .. } => "ConditioningRefusal",
            Error::NewtonDivergence { .. } => "NewtonDivergence",
            Error::ConvergenceFailure { .. } => "ConvergenceFailure",
            Error::RequiresZeroB(_) => "RequiresZeroB",
            Error::Mode { .. } => "ModeFailure",
            Error::MissingSpectrum(_) => "MissingSpectrum",
            Error::DomainRestriction(_) => "DomainRestriction",
            Error::ModelMismatch => "ModelMismatch",
            Error::StepSizeTooLarge { .. } => "StepSizeTooLarge",
            Error::InsufficientHorizon { .. } => "InsufficientHorizon",
            Error::InadmissibleProblem(_) => "InadmissibleProblem",
            Error::AssertionFailure { .. } => "AssertionFailure",
            Error::NotFound { .. } => "NotFound",
            Error::Config { .. } => "ConfigError",
            Error::Io(_) => "IoError",
            Error::Json(_) => "JsonError",
        }
    }

    pub(crate) fn at_mode(self, mode: usize) -> Error {
        match self {
            e @ Error::Mode { .. } => e,
            e @ Error::NewtonDivergence { .. } => e,
            other => Error::Mode {
                mode,
                message: other.to_string(),
            },
        }
    }
}
