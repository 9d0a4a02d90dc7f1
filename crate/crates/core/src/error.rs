use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = XvaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum XvaError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("no-arbitrage conditions violated: {}", render_violations(.0))]
    Arbitrage(Vec<Violation>),

    #[error("negative physical default intensity {value}")]
    NegativeIntensity { value: f64 },

    #[error("invalid claim: {0}")]
    InvalidClaim(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid solver configuration: {0}")]
    InvalidSolver(String),

    #[error(
        "Picard iteration did not converge at step {step} (t = {t}): \
         residual {residual:e} after {iterations} iterations"
    )]
    PicardDiverged {
        step: usize,
        t: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("point (t = {t}, s = {s}) lies outside the grid")]
    OutOfGrid { t: f64, s: f64 },

    #[error("{0}")]
    Unsupported(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn render_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
