use thiserror::Error;

/// Errors produced by the bridge library.
#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("volatility undefined: mu^2 + omega * mean = {value} at mean level {mean}")]
    VolatilityDomain { mean: f64, value: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("integration failed at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("invalid transition parameters: {0}")]
    TransitionParameter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("source weights sum to {sum}, expected 1")]
    WeightSum { sum: f64 },

    #[error("time {0} is not a recorded grid point")]
    TimeNotOnGrid(f64),

    #[error("invalid moment curves: {0}")]
    Curves(String),

    #[error("at least 2 retained days are required, got {0}")]
    TooFewDays(usize),

    #[error("curve has no occupied bins")]
    EmptyCurve,

    #[error("need at least {needed} occupied bins, got {got}")]
    TooFewBins { needed: usize, got: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("no feasible starting point for the simplex search")]
    NoFeasibleStart,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("unknown day_id {day_id:?} at line {line}")]
    UnknownDay { day_id: String, line: u64 },

    #[error("t_seconds not increasing for day {day_id:?} at line {line}")]
    NonMonotone { day_id: String, line: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, BridgeError>;
