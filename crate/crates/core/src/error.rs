use thiserror::Error;

/// Errors raised by model construction, numerics and simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("divergent norm: {0}")]
    DivergentNorm(String),

    #[error("quadrature did not converge on [{lo}, {hi}] (estimated error {error:e})")]
    QuadratureFailed { lo: f64, hi: f64, error: f64 },

    #[error("invalid search interval [{0}, {1}]")]
    InvalidInterval(f64, f64),

    #[error("not an admissible pair: beta+ = {beta_plus} must exceed alpha+ = {alpha_plus}")]
    NotAdmissiblePair { alpha_plus: f64, beta_plus: f64 },

    #[error("envelope constraint violated: {0}")]
    Constraint(String),

    #[error("state space too large: {sites} sites give {states} states (limit {limit})")]
    StateSpaceTooLarge { sites: usize, states: u64, limit: u64 },

    #[error("non-finite rate encountered: {0}")]
    NonFiniteRate(String),

    #[error("requested order ({plus}, {minus}) exceeds the {sites} available sites")]
    OrderExceedsSites { plus: usize, minus: usize, sites: usize },

    #[error("closure needs the first-order entry k^({0}) which the table does not carry")]
    ClosureUnavailable(&'static str),

    #[error("step size underflow at t = {t} (h = {h:e}); reduce the epsilon range or use the exact oracle")]
    StepUnderflow { t: f64, h: f64 },

    #[error("negative pair potential value {0}: thinning acceptance would exceed one")]
    NegativePotential(f64),

    #[error("coincident points in configuration")]
    CoincidentPoints,

    #[error("empty bin set")]
    EmptyBins,

    #[error("{0}")]
    Unsupported(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
