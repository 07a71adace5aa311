//! Crate-wide error type.

use crate::pipeline::SegmentationResult;

/// Errors produced by the segmentation library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("contour needs at least {min} points, got {got}")]
    TooFewPoints { min: usize, got: usize },

    #[error("degenerate geometry: zero tangent at control point {index}")]
    DegenerateTangent { index: usize },

    #[error("degenerate geometry: polyline has zero total length")]
    ZeroLength,

    #[error("contour endpoints coincide (open curve required)")]
    ClosedContour,

    #[error("non-finite coordinate at control point {index}")]
    NonFinitePoint { index: usize },

    #[error("contour is not a function of x: duplicate x = {x} after sorting")]
    NonFunctionalContour { x: f64 },

    #[error("empty sample region")]
    EmptyRegion,

    #[error("evolution system needs at least 5 points, got {got}")]
    SystemTooSmall { got: usize },

    #[error("invalid parameter: {what}")]
    InvalidParameter { what: String },

    #[error("non-finite input: {what}")]
    NonFiniteInput { what: &'static str },

    #[error("numerical failure: {what}")]
    Numerical { what: &'static str },

    #[error("need at least 2 training shapes, got {got}")]
    InsufficientData { got: usize },

    #[error("degenerate shape data: {what}")]
    DegenerateShape { what: &'static str },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("initialization lies entirely outside the image")]
    Placement,

    #[error("contour diverged at iteration {iteration}, boundary {boundary}")]
    Diverged {
        iteration: usize,
        boundary: usize,
        partial: Box<SegmentationResult>,
    },

    #[error("invalid phantom spec: {what}")]
    InvalidSpec { what: String },

    #[error("validation: {what}")]
    Validation { what: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image: {0}")]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;
