use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("regime not supported for this operation: {0}")]
    Regime(String),

    #[error("non-finite value at node {index} (r = {r})")]
    NonFinite { index: usize, r: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("zero mass: {0}")]
    ZeroMass(String),

    #[error("J undefined: {0}")]
    JUndefined(String),

    #[error("no interior minimum: {0}")]
    NoInteriorMinimum(String),

    #[error("under-resolved: {0}")]
    UnderResolved(String),

    #[error("iteration limit reached: {0}")]
    IterationLimit(String),

    #[error("no local minimizer found at this rho: {0}")]
    NoLocalMinimizer(String),

    #[error("not a mountain-pass configuration: {0}")]
    NotMountainPass(String),

    #[error("bracket not found: {0}")]
    BracketNotFound(String),

    #[error("no ground state located: {0}")]
    NoGroundState(String),

    #[error("stiff region at r = {r} (u = {u}, u' = {v})")]
    StiffRegion { r: f64, u: f64, v: f64 },

    #[error("insufficient tail: {0}")]
    InsufficientTail(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
