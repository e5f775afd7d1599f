//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("loop value too close to the origin at node {index} (|w| = {modulus:.3e})")]
    ZeroProximity { index: usize, modulus: f64 },

    #[error("loop under-resolved: angular increment {increment:.6} at node {index}")]
    Aliasing { index: usize, increment: f64 },

    #[error("accumulated winding {0} is not within 1e-6 of an integer")]
    NonIntegerWinding(f64),

    #[error("trajectory escaped: |u| = {radius:.3e} at t = {t:.6}")]
    Divergence { t: f64, radius: f64 },

    #[error("sigma = {sigma} outside the field window [{s_min}, {s_max}]")]
    OutOfWindow { sigma: f64, s_min: f64, s_max: f64 },

    #[error("boundary defect {defect:.3e} exceeds allowed slack {slack:.3e}")]
    BoundaryDefect { defect: f64, slack: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
