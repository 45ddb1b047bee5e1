use thiserror::Error;

/// Errors produced by the capacity toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// The constraint set admits no distribution on the grid. `max_eh` is the
    /// largest average harvested energy reachable under the average-power bound.
    #[error("infeasible constraints: E_th = {e_th:.6e} J exceeds the maximum harvestable {max_eh:.6e} J")]
    Infeasible { e_th: f64, max_eh: f64 },

    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("numerical tolerance not met: {0}")]
    Tolerance(String),

    #[error("calibration failed after {iterations} iterations (residuals {residuals:?})")]
    Calibration {
        iterations: usize,
        residuals: [f64; 2],
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
