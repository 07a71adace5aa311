//! Persistence: annotation/model/result documents (versioned JSON), metric
//! tables (CSV), grayscale image reading/writing, and overlay rendering.
//!
//! All writes go through a write-temp-then-rename so partially written
//! files never appear under the target name. JSON numbers round-trip
//! bit-exactly (shortest-representation encoding).

use std::io::Cursor;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{resample_uniform, spline_full_width, OpenContour, Point};
use crate::metrics::{BatchEval, BoundaryTruth};
use crate::ms_energy::GrayImage;
use crate::pipeline::{SegmentationConfig, SegmentationResult};
use crate::shape_model::{OctShape, ShapeModel};
use crate::NUM_BOUNDARIES;

/// Canonical boundary names, top to bottom.
pub const BOUNDARY_NAMES: [&str; NUM_BOUNDARIES] = [
    "ILM", "RNFLo", "IPL-INL", "INL-OPL", "OPL-ONL", "ONL-IS", "IS-OS", "OS-RPE", "RPE-CH",
];

pub const ANNOTATION_VERSION: u32 = 1;
pub const MODEL_VERSION: u32 = 1;
pub const RESULT_VERSION: u32 = 1;

/// Writes through a temporary sibling file and renames into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// One boundary in an annotation: either explicit control points or one y
/// value per image column.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum BoundaryData {
    Columns(Vec<f64>),
    Points(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NamedBoundary {
    pub name: String,
    pub data: BoundaryData,
}

/// Per-image annotation document: nine named boundaries.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AnnotationFile {
    pub version: u32,
    pub width: usize,
    pub height: usize,
    pub boundaries: Vec<NamedBoundary>,
}

impl AnnotationFile {
    pub fn from_truth(truth: &BoundaryTruth, height: usize) -> AnnotationFile {
        AnnotationFile {
            version: ANNOTATION_VERSION,
            width: truth.width(),
            height,
            boundaries: truth
                .curves()
                .iter()
                .zip(BOUNDARY_NAMES)
                .map(|(curve, name)| NamedBoundary {
                    name: name.to_string(),
                    data: BoundaryData::Columns(curve.clone()),
                })
                .collect(),
        }
    }

    /// Checks the boundary names against the canonical list and that all
    /// coordinates fall inside the image.
    pub fn validate(&self) -> Result<()> {
        for name in BOUNDARY_NAMES {
            if !self.boundaries.iter().any(|b| b.name == name) {
                return Err(Error::Validation {
                    what: format!("missing boundary {name}"),
                });
            }
        }
        if self.boundaries.len() != NUM_BOUNDARIES {
            return Err(Error::Validation {
                what: format!(
                    "expected {NUM_BOUNDARIES} boundaries, got {}",
                    self.boundaries.len()
                ),
            });
        }
        let (w, h) = (self.width as f64, self.height as f64);
        for b in &self.boundaries {
            let ok = match &b.data {
                BoundaryData::Columns(ys) => {
                    ys.len() == self.width
                        && ys
                            .iter()
                            .all(|y| y.is_finite() && *y >= 0.0 && *y <= h - 1.0)
                }
                BoundaryData::Points(pts) => pts.iter().all(|p| {
                    p.iter().all(|v| v.is_finite())
                        && p[0] >= 0.0
                        && p[0] <= w - 1.0
                        && p[1] >= 0.0
                        && p[1] <= h - 1.0
                }),
            };
            if !ok {
                return Err(Error::Validation {
                    what: format!("boundary {} has coordinates outside the image", b.name),
                });
            }
        }
        Ok(())
    }

    fn boundary(&self, name: &str) -> Result<&NamedBoundary> {
        self.boundaries
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| Error::Validation {
                what: format!("missing boundary {name}"),
            })
    }

    /// The boundary as a polyline, whichever representation it uses.
    pub fn boundary_polyline(&self, name: &str) -> Result<Vec<Point>> {
        Ok(match &self.boundary(name)?.data {
            BoundaryData::Columns(ys) => ys
                .iter()
                .enumerate()
                .map(|(x, &y)| Point::new(x as f64, y))
                .collect(),
            BoundaryData::Points(pts) => pts.iter().map(|p| Point::new(p[0], p[1])).collect(),
        })
    }

    /// Resamples every boundary to `m` control points and assembles the
    /// whole-image shape vector in canonical boundary order.
    pub fn to_shape(&self, m: usize) -> Result<OctShape> {
        let contours: Vec<OpenContour> = BOUNDARY_NAMES
            .iter()
            .map(|name| {
                let poly = self.boundary_polyline(name)?;
                OpenContour::new(resample_uniform(&poly, m)?)
            })
            .collect::<Result<_>>()?;
        OctShape::from_contours(&contours)
    }

    /// Full-width curves (one y per column) in canonical order, fitting a
    /// spline when the boundary is stored as control points.
    pub fn full_width_curves(&self) -> Result<Vec<Vec<f64>>> {
        BOUNDARY_NAMES
            .iter()
            .map(|name| match &self.boundary(name)?.data {
                BoundaryData::Columns(ys) => Ok(ys.clone()),
                BoundaryData::Points(_) => {
                    let poly = self.boundary_polyline(name)?;
                    spline_full_width(&OpenContour::new(poly)?, self.width)
                }
            })
            .collect()
    }

    pub fn to_truth(&self) -> Result<BoundaryTruth> {
        BoundaryTruth::new(self.full_width_curves()?)
    }
}

pub fn save_annotation(path: &Path, annotation: &AnnotationFile) -> Result<()> {
    atomic_write(path, &serde_json::to_vec_pretty(annotation)?)
}

pub fn load_annotation(path: &Path) -> Result<AnnotationFile> {
    let annotation: AnnotationFile = serde_json::from_slice(&std::fs::read(path)?)?;
    annotation.validate()?;
    Ok(annotation)
}

/// Serialized shape model.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelFile {
    pub version: u32,
    /// Total control points `N` (9 boundaries x points per boundary).
    pub n: usize,
    pub points_per_boundary: usize,
    pub boundary_order: Vec<String>,
    pub mean: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// One mode vector (length `2N`) per retained eigenvalue.
    pub modes: Vec<Vec<f64>>,
    pub variance_fraction: f64,
    pub training_size: usize,
}

impl ModelFile {
    pub fn from_model(model: &ShapeModel) -> ModelFile {
        ModelFile {
            version: MODEL_VERSION,
            n: model.n_points(),
            points_per_boundary: model.n_points() / NUM_BOUNDARIES,
            boundary_order: BOUNDARY_NAMES.iter().map(|s| s.to_string()).collect(),
            mean: model.mean().data().to_vec(),
            eigenvalues: model.eigenvalues().to_vec(),
            modes: model.modes().to_vec(),
            variance_fraction: model.variance_fraction(),
            training_size: model.training_size(),
        }
    }

    pub fn into_model(self) -> Result<ShapeModel> {
        if self.mean.len() != 2 * self.n || self.n != NUM_BOUNDARIES * self.points_per_boundary {
            return Err(Error::Validation {
                what: "model dimension fields are inconsistent".to_string(),
            });
        }
        ShapeModel::from_parts(
            OctShape::new(self.mean)?,
            self.modes,
            self.eigenvalues,
            self.training_size,
            self.variance_fraction,
        )
    }
}

pub fn save_model(path: &Path, model: &ShapeModel) -> Result<()> {
    atomic_write(
        path,
        &serde_json::to_vec_pretty(&ModelFile::from_model(model))?,
    )
}

pub fn load_model(path: &Path) -> Result<ShapeModel> {
    let file: ModelFile = serde_json::from_slice(&std::fs::read(path)?)?;
    file.into_model()
}

/// Configuration echo stored in result documents.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResultConfig {
    pub alpha: f64,
    pub beta: f64,
    pub dt: f64,
    pub band_radius: u32,
    pub iterations: usize,
    pub points_per_boundary: usize,
    pub shape_correct_every: usize,
    pub variance_fraction: f64,
    pub early_stop: bool,
    pub init: String,
}

impl ResultConfig {
    pub fn from_config(config: &SegmentationConfig, init: String) -> ResultConfig {
        ResultConfig {
            alpha: config.alpha,
            beta: config.beta,
            dt: config.dt,
            band_radius: config.band_radius,
            iterations: config.iterations,
            points_per_boundary: config.points_per_boundary,
            shape_correct_every: config.shape_correct_every,
            variance_fraction: config.variance_fraction,
            early_stop: config.early_stop,
            init,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResultBoundary {
    pub name: String,
    pub control_points: Vec<[f64; 2]>,
    pub full_width: Vec<f64>,
}

/// Segmentation result document.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResultFile {
    pub version: u32,
    pub width: usize,
    pub height: usize,
    pub config: ResultConfig,
    pub boundaries: Vec<ResultBoundary>,
    pub energy_trace: Vec<Vec<f64>>,
    pub iterations_run: usize,
}

impl ResultFile {
    pub fn from_result(
        result: &SegmentationResult,
        config: ResultConfig,
        width: usize,
        height: usize,
    ) -> ResultFile {
        ResultFile {
            version: RESULT_VERSION,
            width,
            height,
            config,
            boundaries: result
                .contours
                .iter()
                .zip(
                    result
                        .full_width
                        .iter()
                        .chain(std::iter::repeat(&Vec::new())),
                )
                .zip(BOUNDARY_NAMES)
                .map(|((contour, full), name)| ResultBoundary {
                    name: name.to_string(),
                    control_points: contour.points().iter().map(|p| [p.x, p.y]).collect(),
                    full_width: full.clone(),
                })
                .collect(),
            energy_trace: result.energy_trace.clone(),
            iterations_run: result.iterations_run,
        }
    }

    /// Full-width curves in canonical order; errors name any missing
    /// boundary.
    pub fn full_width_curves(&self) -> Result<Vec<Vec<f64>>> {
        BOUNDARY_NAMES
            .iter()
            .map(|name| {
                self.boundaries
                    .iter()
                    .find(|b| b.name == *name)
                    .ok_or_else(|| Error::Validation {
                        what: format!("missing boundary {name}"),
                    })
                    .map(|b| b.full_width.clone())
            })
            .collect()
    }
}

pub fn save_result(path: &Path, result: &ResultFile) -> Result<()> {
    atomic_write(path, &serde_json::to_vec_pretty(result)?)
}

pub fn load_result(path: &Path) -> Result<ResultFile> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

/// Writes a Table-2-style CSV: one column per boundary plus Overall, one
/// row per method, cells formatted `mean±sd` with three decimals.
pub fn write_eval_csv(path: &Path, rows: &[(String, BatchEval)]) -> Result<()> {
    let mut out = String::from("method");
    for name in BOUNDARY_NAMES {
        out.push(',');
        out.push_str(name);
    }
    out.push_str(",Overall\n");
    for (method, eval) in rows {
        out.push_str(method);
        for stat in &eval.per_boundary {
            out.push_str(&format!(",{:.3}\u{b1}{:.3}", stat.mean, stat.sd));
        }
        out.push_str(&format!(
            ",{:.3}\u{b1}{:.3}\n",
            eval.overall.mean, eval.overall.sd
        ));
    }
    atomic_write(path, out.as_bytes())
}

/// Loads an 8/16-bit grayscale image (PNG or PGM), normalizing intensities
/// by the maximum representable value. Other color types are converted to
/// 16-bit grayscale first.
pub fn load_gray_image(path: &Path) -> Result<GrayImage> {
    let dynamic = image::ImageReader::open(path)?.decode()?;
    let (w, h) = (dynamic.width() as usize, dynamic.height() as usize);
    let data: Vec<f64> = match dynamic {
        image::DynamicImage::ImageLuma8(img) => img
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 255.0)
            .collect(),
        image::DynamicImage::ImageLuma16(img) => img
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 65535.0)
            .collect(),
        other => other
            .into_luma16()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 65535.0)
            .collect(),
    };
    GrayImage::new(w, h, data)
}

/// Writes a 16-bit grayscale PNG.
pub fn save_gray_image(path: &Path, image: &GrayImage) -> Result<()> {
    let raw: Vec<u16> = image
        .data()
        .iter()
        .map(|v| (v * 65535.0).round() as u16)
        .collect();
    let buffer = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_raw(
        image.width() as u32,
        image.height() as u32,
        raw,
    )
    .expect("dimensions match data length");
    let mut bytes = Vec::new();
    image::DynamicImage::ImageLuma16(buffer)
        .write_to(&mut Cursor::new(&mut bytes), image::ImageFormat::Png)?;
    atomic_write(path, &bytes)
}

/// Distinct overlay colors, one per boundary.
const OVERLAY_COLORS: [[u8; 3]; NUM_BOUNDARIES] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [250, 190, 190],
];

/// Renders the grayscale image with the nine full-width curves drawn on
/// top and writes an 8-bit RGB PNG.
pub fn render_overlay(path: &Path, image: &GrayImage, curves: &[Vec<f64>]) -> Result<()> {
    if curves.len() != NUM_BOUNDARIES {
        return Err(Error::DimensionMismatch {
            expected: NUM_BOUNDARIES,
            got: curves.len(),
        });
    }
    let (w, h) = (image.width(), image.height());
    let mut rgb = vec![0u8; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            let v = (image.get(x, y) * 255.0).round() as u8;
            let idx = (y * w + x) * 3;
            rgb[idx] = v;
            rgb[idx + 1] = v;
            rgb[idx + 2] = v;
        }
    }
    let max_y = (h - 1) as f64;
    for (curve, color) in curves.iter().zip(OVERLAY_COLORS) {
        let mut put = |x: usize, y: usize| {
            let idx = (y * w + x) * 3;
            rgb[idx..idx + 3].copy_from_slice(&color);
        };
        let mut prev_row: Option<usize> = None;
        for (x, &y) in curve.iter().enumerate().take(w) {
            let row = y.clamp(0.0, max_y).round() as usize;
            put(x, row);
            // Connect vertical jumps between adjacent columns.
            if let Some(prev) = prev_row {
                let (lo, hi) = if prev < row { (prev, row) } else { (row, prev) };
                for r in lo + 1..hi {
                    put(x, r);
                }
            }
            prev_row = Some(row);
        }
    }
    let buffer =
        image::RgbImage::from_raw(w as u32, h as u32, rgb).expect("dimensions match data length");
    let mut bytes = Vec::new();
    image::DynamicImage::ImageRgb8(buffer)
        .write_to(&mut Cursor::new(&mut bytes), image::ImageFormat::Png)?;
    atomic_write(path, &bytes)
}
