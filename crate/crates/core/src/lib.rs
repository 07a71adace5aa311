//! Layered grayscale image segmentation with open active contours.
//!
//! The library evolves a model of nine open parametric contours under a
//! piecewise-constant region energy computed over narrowbands, regularized
//! by first/second-difference smoothing and a learned PCA shape prior.
//! It ships with a synthetic layered-phantom generator and Hausdorff-distance
//! evaluation so the whole pipeline can be exercised end to end without
//! clinical data.
//!
//! Module map:
//! - [`geometry`]: open contours, normals, narrowbands, resampling, splines
//! - [`ms_energy`]: grayscale images, narrowband region statistics, force density
//! - [`evolution`]: the pentadiagonal semi-implicit update system
//! - [`shape_model`]: Procrustes alignment and the PCA point-distribution model
//! - [`pipeline`]: the full segmentation loop
//! - [`metrics`]: Hausdorff-distance evaluation
//! - [`phantom`]: synthetic layered images with ground truth
//! - [`io`]: file formats (annotations, models, results, tables) and rendering

pub mod error;
pub mod evolution;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod ms_energy;
pub mod phantom;
pub mod pipeline;
pub mod shape_model;

pub use error::{Error, Result};
pub use evolution::EvolutionSystem;
pub use geometry::{Bounds, Narrowband, NormalField, OpenContour, Point};
pub use metrics::{hausdorff, BoundaryTruth, ImageEval};
pub use ms_energy::{GrayImage, RegionStats};
pub use phantom::{PhantomSpec, TrainingSample};
pub use pipeline::{InitMode, SegmentationConfig, SegmentationResult};
pub use shape_model::{OctShape, ShapeModel, SimilarityTransform};

/// Number of layer boundaries in the model.
pub const NUM_BOUNDARIES: usize = 9;
