//! The full segmentation loop: per-iteration narrowband statistics, one
//! semi-implicit step per boundary, then joint shape correction, for a
//! fixed iteration budget.

use crate::error::{Error, Result};
use crate::evolution::{build_system, EvolutionSystem};
use crate::geometry::{
    build_narrowband, compute_normals, spline_full_width, Bounds, OpenContour, Point,
};
use crate::ms_energy::{energy, force_density, region_means, GrayImage};
use crate::shape_model::{OctShape, ShapeModel};
use crate::NUM_BOUNDARIES;

/// Stop early once the maximum point displacement stays below this for
/// [`EARLY_STOP_WINDOW`] consecutive iterations (only when enabled).
const EARLY_STOP_TOL: f64 = 1e-4;
const EARLY_STOP_WINDOW: usize = 10;

/// Contour placement for the first iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitMode {
    /// The model mean translated so its centroid sits at the image center.
    MeanCentered,
    /// Nine horizontal lines evenly spaced over the given row range.
    FlatLines { top: f64, bottom: f64 },
    /// The centered mean shape translated by an extra offset.
    Offset { dx: f64, dy: f64 },
}

/// Run parameters. Defaults follow the reference protocol:
/// `alpha = beta = 0.5`, `dt = 0.01`, band radius 10, 1000 iterations,
/// 40 control points per boundary, shape correction every iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationConfig {
    pub alpha: f64,
    pub beta: f64,
    pub dt: f64,
    pub band_radius: u32,
    pub iterations: usize,
    pub points_per_boundary: usize,
    /// Apply shape correction every this many iterations (1 = every
    /// iteration; set larger than `iterations` to disable).
    pub shape_correct_every: usize,
    /// Echo of the variance fraction the model was trained with.
    pub variance_fraction: f64,
    /// Off by default: stop when the maximum displacement stays below
    /// 1e-4 px for 10 consecutive iterations.
    pub early_stop: bool,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            alpha: 0.5,
            beta: 0.5,
            dt: 0.01,
            band_radius: 10,
            iterations: 1000,
            points_per_boundary: 40,
            shape_correct_every: 1,
            variance_fraction: 0.98,
            early_stop: false,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::InvalidParameter {
                what: "iterations must be at least 1".to_string(),
            });
        }
        if self.band_radius < 1 {
            return Err(Error::InvalidParameter {
                what: "band radius must be at least 1".to_string(),
            });
        }
        if self.points_per_boundary < 5 {
            return Err(Error::InvalidParameter {
                what: "points per boundary must be at least 5".to_string(),
            });
        }
        if self.shape_correct_every < 1 {
            return Err(Error::InvalidParameter {
                what: "shape_correct_every must be at least 1".to_string(),
            });
        }
        Ok(())
    }
}

/// Final contours plus the per-boundary energy trace (length
/// `iterations_run + 1`: the initial state and one entry per iteration)
/// and the full-width spline curves.
#[derive(Debug, Clone)]
pub struct SegmentationResult {
    pub contours: Vec<OpenContour>,
    pub energy_trace: Vec<Vec<f64>>,
    pub iterations_run: usize,
    pub full_width: Vec<Vec<f64>>,
}

/// Places the initial nine-boundary shape on the image.
pub fn initialize(model: &ShapeModel, image: &GrayImage, mode: InitMode) -> Result<OctShape> {
    let bounds = image.bounds();
    let center = Point::new(
        (image.width() - 1) as f64 / 2.0,
        (image.height() - 1) as f64 / 2.0,
    );
    let shape = match mode {
        InitMode::MeanCentered => {
            let c = model.mean().centroid();
            model.mean().translated(center - c)
        }
        InitMode::Offset { dx, dy } => {
            let c = model.mean().centroid();
            model.mean().translated(center - c + Point::new(dx, dy))
        }
        InitMode::FlatLines { top, bottom } => {
            let m = model.n_points() / NUM_BOUNDARIES;
            let mut xs = Vec::with_capacity(2 * model.n_points());
            let mut ys = Vec::with_capacity(model.n_points());
            for k in 0..NUM_BOUNDARIES {
                let row = top + (bottom - top) * k as f64 / (NUM_BOUNDARIES - 1) as f64;
                for i in 0..m {
                    xs.push((image.width() - 1) as f64 * i as f64 / (m - 1) as f64);
                    ys.push(row);
                }
            }
            xs.extend(ys);
            OctShape::new(xs)?
        }
    };
    let n = shape.n_points();
    if (0..n).all(|i| !bounds.contains(shape.point(i))) {
        return Err(Error::Placement);
    }
    Ok(clamp_shape(&shape, bounds))
}

/// Runs the segmentation loop.
///
/// Every iteration updates the nine boundaries independently (normals,
/// narrowband, region means, force density, one semi-implicit step, clamp
/// to the image), then applies shape correction on the assembled
/// configuration. Identical inputs produce bitwise-identical results.
pub fn segment(
    image: &GrayImage,
    model: &ShapeModel,
    config: &SegmentationConfig,
    init: &OctShape,
) -> Result<SegmentationResult> {
    config.validate()?;
    let m = config.points_per_boundary;
    if model.n_points() != NUM_BOUNDARIES * m {
        return Err(Error::DimensionMismatch {
            expected: NUM_BOUNDARIES * m,
            got: model.n_points(),
        });
    }
    if init.n_points() != model.n_points() {
        return Err(Error::DimensionMismatch {
            expected: model.n_points(),
            got: init.n_points(),
        });
    }
    let bounds = image.bounds();
    let system = build_system(m, config.alpha, config.beta, config.dt)?;
    let mut contours = clamp_shape(init, bounds).to_contours()?;
    let mut energy_trace: Vec<Vec<f64>> = (0..NUM_BOUNDARIES)
        .map(|_| Vec::with_capacity(config.iterations + 1))
        .collect();
    for (b, contour) in contours.iter().enumerate() {
        energy_trace[b].push(boundary_energy(image, contour, config)?);
    }

    let mut iterations_run = 0;
    let mut still_count = 0usize;
    for iteration in 1..=config.iterations {
        let previous = contours.clone();
        for (b, contour) in contours.iter_mut().enumerate() {
            *contour = update_boundary(image, &system, contour, config.band_radius, bounds)
                .map_err(|e| into_divergence(e, iteration, b, &previous, &energy_trace))?;
        }
        if iteration % config.shape_correct_every == 0 {
            let assembled = OctShape::from_contours(&contours)?;
            let corrected = model
                .correct(&assembled)
                .map_err(|e| into_divergence(e, iteration, 0, &previous, &energy_trace))?;
            contours = clamp_shape(&corrected, bounds).to_contours()?;
        }
        for (b, contour) in contours.iter().enumerate() {
            energy_trace[b].push(boundary_energy(image, contour, config)?);
        }
        iterations_run = iteration;

        if config.early_stop {
            let mut max_disp = 0.0f64;
            for (new, old) in contours.iter().zip(&previous) {
                for (p, q) in new.points().iter().zip(old.points()) {
                    max_disp = max_disp.max(p.distance(*q));
                }
            }
            if max_disp < EARLY_STOP_TOL {
                still_count += 1;
                if still_count >= EARLY_STOP_WINDOW {
                    break;
                }
            } else {
                still_count = 0;
            }
        }
    }

    let full_width = extract_boundaries(&contours, image.width())?;
    Ok(SegmentationResult {
        contours,
        energy_trace,
        iterations_run,
        full_width,
    })
}

/// Full-width spline curves for each final boundary.
pub fn extract_boundaries(contours: &[OpenContour], width: usize) -> Result<Vec<Vec<f64>>> {
    contours
        .iter()
        .map(|c| spline_full_width(c, width))
        .collect()
}

fn clamp_shape(shape: &OctShape, bounds: Bounds) -> OctShape {
    let n = shape.n_points();
    let mut data = Vec::with_capacity(2 * n);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n {
        let p = bounds.clamp(shape.point(i));
        data.push(p.x);
        ys.push(p.y);
    }
    data.extend(ys);
    OctShape::new(data).expect("clamping preserves shape validity")
}

fn update_boundary(
    image: &GrayImage,
    system: &EvolutionSystem,
    contour: &OpenContour,
    radius: u32,
    bounds: Bounds,
) -> Result<OpenContour> {
    let normals = compute_normals(contour)?;
    let band = build_narrowband(contour, &normals, radius, bounds);
    let stats = region_means(image, &band.inner, &band.outer)?;
    let q: Vec<f64> = contour
        .points()
        .iter()
        .map(|&p| force_density(image, p, &stats))
        .collect();
    let stepped = system.step(contour, &normals, &q)?;
    OpenContour::new(stepped.points().iter().map(|&p| bounds.clamp(p)).collect())
}

fn boundary_energy(
    image: &GrayImage,
    contour: &OpenContour,
    config: &SegmentationConfig,
) -> Result<f64> {
    let normals = compute_normals(contour)?;
    let band = build_narrowband(contour, &normals, config.band_radius, image.bounds());
    let stats = region_means(image, &band.inner, &band.outer)?;
    Ok(energy(
        image,
        contour,
        &stats,
        &band,
        config.alpha,
        config.beta,
    ))
}

/// Non-finite coordinates surface as a divergence error carrying the last
/// finite state; everything else propagates unchanged.
fn into_divergence(
    err: Error,
    iteration: usize,
    boundary: usize,
    last_good: &[OpenContour],
    energy_trace: &[Vec<f64>],
) -> Error {
    match err {
        Error::NonFinitePoint { .. } | Error::NonFiniteInput { .. } => Error::Diverged {
            iteration,
            boundary,
            partial: Box::new(SegmentationResult {
                contours: last_good.to_vec(),
                energy_trace: energy_trace.to_vec(),
                iterations_run: iteration - 1,
                full_width: Vec::new(),
            }),
        },
        other => other,
    }
}
