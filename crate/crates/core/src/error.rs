use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    /// A mathematical hypothesis of the requested experiment does not hold.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    /// The input makes the requested statistic meaningless (e.g. φ = 0).
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// Periodic images pollute the evolved field: its mass in the edge band
    /// exceeds the wrap-around threshold.
    #[error("time {t} outside the fidelity window (edge mass fraction {edge_fraction:e})")]
    OutsideFidelityWindow { t: f64, edge_fraction: f64 },
    #[error("time {t} beyond the stored horizon {horizon}")]
    BeyondHorizon { t: f64, horizon: f64 },
    /// Picard iteration stopped contracting; carries the last measured ratio.
    #[error("existence horizon exceeded after {iterations} iterations (last contraction ratio {last_ratio})")]
    ExistenceHorizonExceeded { iterations: usize, last_ratio: f64 },
    #[error("non-positive data in power-law fit at index {0}")]
    NonPositiveData(usize),
    #[error("not enough data: need {needed}, got {got}")]
    NotEnoughData { needed: usize, got: usize },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
