//! Piecewise-constant region quantities over narrowbands: region means,
//! the pointwise force density, and the monitored total energy.
//!
//! Sub-pixel intensity lookups use bilinear interpolation; coordinates are
//! clamped to the pixel rectangle first, so out-of-range samples read the
//! nearest border pixel.

use crate::error::{Error, Result};
use crate::geometry::{Bounds, Narrowband, OpenContour, Point};

/// A grayscale image with intensities normalized to `[0, 1]`, stored
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    /// Validates dimensions and that every intensity is finite and in `[0, 1]`.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter {
                what: format!("image dimensions must be positive, got {width}x{height}"),
            });
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                got: data.len(),
            });
        }
        if !data
            .iter()
            .all(|v| v.is_finite() && (0.0..=1.0).contains(v))
        {
            return Err(Error::InvalidParameter {
                what: "intensities must be finite and in [0, 1]".to_string(),
            });
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        GrayImage::new(width, height, data)
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        GrayImage::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bounds(&self) -> Bounds {
        Bounds::new(self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Bilinear interpolation at a sub-pixel coordinate; the coordinate is
    /// clamped into the pixel rectangle first.
    #[inline]
    pub fn sample(&self, p: Point) -> f64 {
        let x = p.x.clamp(0.0, (self.width - 1) as f64);
        let y = p.y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// Mean intensities of the two narrowband halves and their sample counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionStats {
    /// Mean over the inner band.
    pub u1: f64,
    /// Mean over the outer band.
    pub u2: f64,
    pub n1: usize,
    pub n2: usize,
}

/// Computes the mean interpolated intensity over each band half.
pub fn region_means(image: &GrayImage, inner: &[Point], outer: &[Point]) -> Result<RegionStats> {
    if inner.is_empty() || outer.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let mean = |pts: &[Point]| pts.iter().map(|&p| image.sample(p)).sum::<f64>() / pts.len() as f64;
    Ok(RegionStats {
        u1: mean(inner),
        u2: mean(outer),
        n1: inner.len(),
        n2: outer.len(),
    })
}

/// The force density at a point: `(f - u1)^2 - (f - u2)^2` with `f`
/// bilinearly interpolated.
pub fn force_density(image: &GrayImage, point: Point, stats: &RegionStats) -> f64 {
    let f = image.sample(point);
    let d1 = f - stats.u1;
    let d2 = f - stats.u2;
    d1 * d1 - d2 * d2
}

/// Total energy of one contour for monitoring: the band data term plus the
/// first/second-difference regularizers.
///
/// Data term: sum of `(f - u1)^2` over inner samples plus `(f - u2)^2`
/// over outer samples. Regularizers: `alpha/2` times the summed squared
/// first differences of the control points plus `beta/2` times the summed
/// squared second differences.
pub fn energy(
    image: &GrayImage,
    contour: &OpenContour,
    stats: &RegionStats,
    band: &Narrowband,
    alpha: f64,
    beta: f64,
) -> f64 {
    let mut data = 0.0;
    for &p in &band.inner {
        let d = image.sample(p) - stats.u1;
        data += d * d;
    }
    for &p in &band.outer {
        let d = image.sample(p) - stats.u2;
        data += d * d;
    }

    let pts = contour.points();
    let mut first = 0.0;
    for w in pts.windows(2) {
        let d = w[1] - w[0];
        first += d.dot(d);
    }
    let mut second = 0.0;
    for w in pts.windows(3) {
        let d = Point::new(
            w[2].x - 2.0 * w[1].x + w[0].x,
            w[2].y - 2.0 * w[1].y + w[0].y,
        );
        second += d.dot(d);
    }
    data + 0.5 * alpha * first + 0.5 * beta * second
}
