use thiserror::Error;

/// Errors raised by the laboratory kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("nonzero mean: coefficient (0,0) = {0:e}")]
    NonzeroMean(f64),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical blow-up at t = {t}: non-finite values in the state")]
    NumericalBlowup { t: f64 },

    #[error("time mismatch: flow map at t = {flowmap} but state at t = {state}")]
    TimeMismatch { flowmap: f64, state: f64 },

    #[error("lattice folding: det of the flow-map gradient is {det:e} at marker {index}")]
    LatticeFolding { index: usize, det: f64 },

    #[error("degenerate linearization: {0}")]
    DegenerateLinearization(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Divergence { iterations: usize, residual: f64 },

    #[error("past blow-up: t = {t} >= t* = {t_star}")]
    PastBlowup { t: f64, t_star: f64 },

    #[error("tail too large: |Omega| = {0:e} at the grid ends")]
    TailTooLarge(f64),

    #[error("Hypothesis 1 fails at iterate {iterate}: bordered system is singular")]
    SingularBorderedSystem { iterate: usize },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
