use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: expected 1, 2 or 3")]
    InvalidDimension(usize),

    #[error("too few points per axis: {0} (need at least 3)")]
    TooFewPoints(usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("states live on different grids")]
    GridMismatch,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("radius {radius} outside (0, {half_width})")]
    RadiusOutOfDomain { radius: f64, half_width: f64 },

    #[error("step rejected: dt * L = {0} must be < 1")]
    StepRejected(f64),

    #[error("inner solver did not converge after {iters} iterations (residual {residual:e}, target {target:e})")]
    InnerNonConvergence {
        iters: usize,
        residual: f64,
        target: f64,
    },

    #[error(
        "no feasible Young parameter: coercivity constant {c_coerc} admits no eta with gamma > 0"
    )]
    NoFeasibleEta { c_coerc: f64 },

    #[error("empty cloud")]
    EmptyCloud,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}
