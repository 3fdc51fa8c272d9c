//! Crate-wide error type.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Touchstone syntax or content problem, with 1-based line number.
    #[error("touchstone line {line}: {message}")]
    Touchstone { line: usize, message: String },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("frequency grid mismatch: {0}")]
    GridMismatch(String),

    #[error("reference impedance mismatch: {a} ohm vs {b} ohm")]
    ReferenceMismatch { a: f64, b: f64 },

    #[error("cannot extrapolate to {requested_hz} Hz (data ends at {max_hz} Hz)")]
    Extrapolation { requested_hz: f64, max_hz: f64 },

    #[error("singular conversion at {freq_hz} Hz: {detail}")]
    Singular { freq_hz: f64, detail: String },

    #[error("defective transmission matrix at {freq_hz} Hz (no eigenbasis)")]
    Defective { freq_hz: f64 },

    #[error("square-root branch ambiguous at {freq_hz} Hz")]
    BranchAmbiguity { freq_hz: f64 },

    #[error("invalid port map: {0}")]
    PortMap(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("barrel touches plane at layer {layer}: clearance radius {clear_mil} mil <= barrel radius {barrel_mil} mil")]
    BarrelTouchesPlane {
        layer: String,
        clear_mil: f64,
        barrel_mil: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient model bandwidth: data reaches {available_hz} Hz, need at least {required_hz} Hz")]
    Bandwidth { available_hz: f64, required_hz: f64 },

    #[error("bit pattern length {len} is not a multiple of the pattern period {period}")]
    IncompletePattern { len: usize, period: usize },

    #[error("eye phase grids differ: {0} vs {1} phases per UI")]
    PhaseGridMismatch(usize, usize),

    #[error("empty analysis band: {0}")]
    EmptyBand(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
