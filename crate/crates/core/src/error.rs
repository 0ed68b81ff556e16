use crate::dynsys::Orbit;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: String, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("wrong model kind: expected a {expected}")]
    WrongKind { expected: &'static str },

    #[error("coordinate {coord} = {value} lies outside the model domain")]
    OutOfDomain { coord: usize, value: f64 },

    #[error("orbit diverged at t = {t}: |state| = {norm:e}")]
    Divergence { t: f64, norm: f64 },

    #[error("step size underflow at t = {t} (dt = {dt:e})")]
    StepUnderflow { t: f64, dt: f64 },

    #[error("sample {index} lies within {band:e} of the discontinuity locus")]
    LocusHit {
        index: usize,
        band: f64,
        state: Vec<f64>,
        partial: Option<Box<Orbit>>,
    },

    #[error("sample {index} left the domain (coordinate {coord} = {value})")]
    DomainEscape {
        index: usize,
        coord: usize,
        value: f64,
        partial: Option<Box<Orbit>>,
    },

    #[error("non-finite value produced at sample {index}")]
    NonFinite { index: usize },

    #[error("no crossing of coordinate {coord} = {level} before t = {t_max}")]
    NoCrossing { coord: usize, level: f64, t_max: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("inconsistent condition set: {0}")]
    Inconsistent(String),

    #[error("reduction invalid: fit residual {residual:e} exceeds {threshold:e}")]
    ReductionInvalid { residual: f64, threshold: f64 },

    #[error("insufficient recurrence: only {visits} visit(s) to the ball")]
    InsufficientRecurrence { visits: usize },

    #[error("cell count {count} exceeds the configured cap {cap}")]
    ResolutionTooFine { count: usize, cap: usize },
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}
