use thiserror::Error;

use crate::transform::PseudohermitianState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid field data: {0}")]
    Data(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("numerical consistency: {what} residue {residue:.3e} exceeds {limit:.3e}")]
    NumericalConsistency {
        what: &'static str,
        residue: f64,
        limit: f64,
    },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("invalid parameters: {0}")]
    Parameter(String),

    #[error("no start reached the endpoint tolerance (best defect {best_defect:.3e})")]
    Reachability { best_defect: f64 },

    #[error("integration left the sphere at step {step} (norm drift {drift:.3e})")]
    PathStep { step: usize, drift: f64 },

    #[error("time step failed at t = {t}: non-finite conformal factor")]
    StepFailure {
        t: f64,
        last_good: Box<PseudohermitianState>,
    },

    #[error("caches are stale; rebuild the state before reading derived fields")]
    StaleCache,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
