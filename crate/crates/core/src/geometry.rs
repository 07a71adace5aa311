//! Open parametric contours: representation, resampling, tangents/normals,
//! narrowband sample construction, and full-width spline extension.
//!
//! A contour is an ordered list of control points; the order defines the
//! arc-length parameterization. All operations here are pure functions of
//! their inputs and keep sub-pixel coordinates throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 2-D point in image pixel coordinates (sub-pixel values allowed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, other: Point) -> Point {
        Point::new(self.x + other.x, self.y + other.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }
}

impl std::ops::Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// The pixel rectangle of an image: valid coordinates are
/// `[0, width-1] x [0, height-1]` (pixel centers).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    pub width: usize,
    pub height: usize,
}

impl Bounds {
    pub fn new(width: usize, height: usize) -> Self {
        Bounds { width, height }
    }

    /// Clamp a point into the pixel rectangle.
    pub fn clamp(&self, p: Point) -> Point {
        Point::new(
            p.x.clamp(0.0, (self.width - 1) as f64),
            p.y.clamp(0.0, (self.height - 1) as f64),
        )
    }

    /// True if the point lies inside the pixel rectangle.
    pub fn contains(&self, p: Point) -> bool {
        p.x >= 0.0
            && p.x <= (self.width - 1) as f64
            && p.y >= 0.0
            && p.y <= (self.height - 1) as f64
    }
}

/// An open contour: at least 3 ordered control points with distinct endpoints
/// and finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenContour {
    points: Vec<Point>,
}

impl OpenContour {
    /// Validates the open-curve invariants: `M >= 3`, finite coordinates,
    /// distinct endpoints.
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::TooFewPoints {
                min: 3,
                got: points.len(),
            });
        }
        for (i, p) in points.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::NonFinitePoint { index: i });
            }
        }
        let first = points[0];
        let last = points[points.len() - 1];
        if first == last {
            return Err(Error::ClosedContour);
        }
        Ok(OpenContour { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn translated(&self, offset: Point) -> OpenContour {
        OpenContour {
            points: self.points.iter().map(|p| *p + offset).collect(),
        }
    }

    /// Resample to `m` points equally spaced in cumulative chord length.
    pub fn resampled(&self, m: usize) -> Result<OpenContour> {
        OpenContour::new(resample_uniform(&self.points, m)?)
    }
}

/// Unit normals, one per control point, each perpendicular to the local
/// finite-difference tangent.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalField {
    normals: Vec<Point>,
}

impl NormalField {
    pub fn normals(&self) -> &[Point] {
        &self.normals
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }
}

/// Per-contour narrowband samples: `inner` holds points offset along the
/// negative normal, `outer` along the positive normal. Both have length
/// `M * radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct Narrowband {
    pub inner: Vec<Point>,
    pub outer: Vec<Point>,
}

/// Computes the unit normal at every control point.
///
/// Tangents use the central finite difference at interior points and the
/// forward/backward difference at the first/last point. The normal is the
/// tangent rotated by +90 degrees, `n = (-t_y, t_x)`, so a left-to-right
/// horizontal contour has normals pointing toward increasing y.
pub fn compute_normals(contour: &OpenContour) -> Result<NormalField> {
    let pts = contour.points();
    let m = pts.len();
    let mut normals = Vec::with_capacity(m);
    for i in 0..m {
        let tangent = if i == 0 {
            pts[1] - pts[0]
        } else if i == m - 1 {
            pts[m - 1] - pts[m - 2]
        } else {
            pts[i + 1] - pts[i - 1]
        };
        let len = tangent.norm();
        if len == 0.0 {
            return Err(Error::DegenerateTangent { index: i });
        }
        normals.push(Point::new(-tangent.y / len, tangent.x / len));
    }
    Ok(NormalField { normals })
}

/// Builds the narrowband sample points around a contour.
///
/// For every control point `p_i` and offset `d in 1..=radius`, emits
/// `p_i + d*n_i` into the outer band and `p_i - d*n_i` into the inner band.
/// Samples falling outside `bounds` are clamped to the image rectangle, so
/// both bands always hold exactly `M * radius` points.
pub fn build_narrowband(
    contour: &OpenContour,
    normals: &NormalField,
    radius: u32,
    bounds: Bounds,
) -> Narrowband {
    let pts = contour.points();
    let n = normals.normals();
    debug_assert_eq!(pts.len(), n.len());
    let count = pts.len() * radius as usize;
    let mut inner = Vec::with_capacity(count);
    let mut outer = Vec::with_capacity(count);
    for (p, nv) in pts.iter().zip(n.iter()) {
        for d in 1..=radius {
            let step = *nv * d as f64;
            outer.push(bounds.clamp(*p + step));
            inner.push(bounds.clamp(*p - step));
        }
    }
    Narrowband { inner, outer }
}

/// Resamples a polyline to `m` points equally spaced in cumulative chord
/// length. Endpoints are preserved exactly.
pub fn resample_uniform(points: &[Point], m: usize) -> Result<Vec<Point>> {
    if points.len() < 2 {
        return Err(Error::TooFewPoints {
            min: 2,
            got: points.len(),
        });
    }
    if m < 3 {
        return Err(Error::TooFewPoints { min: 3, got: m });
    }
    let mut cumulative = Vec::with_capacity(points.len());
    cumulative.push(0.0);
    for w in points.windows(2) {
        let d = w[1].distance(w[0]);
        cumulative.push(cumulative.last().unwrap() + d);
    }
    let total = *cumulative.last().unwrap();
    if total == 0.0 {
        return Err(Error::ZeroLength);
    }

    let mut out = Vec::with_capacity(m);
    out.push(points[0]);
    let mut seg = 0usize;
    for k in 1..m - 1 {
        let target = total * k as f64 / (m - 1) as f64;
        while seg + 1 < cumulative.len() - 1 && cumulative[seg + 1] < target {
            seg += 1;
        }
        let seg_len = cumulative[seg + 1] - cumulative[seg];
        let t = if seg_len > 0.0 {
            (target - cumulative[seg]) / seg_len
        } else {
            0.0
        };
        out.push(points[seg] + (points[seg + 1] - points[seg]) * t);
    }
    out.push(points[points.len() - 1]);
    Ok(out)
}

/// Fits a natural cubic spline through the control points (sorted by x,
/// strictly increasing) and evaluates it at every integer column
/// `0..width`. Columns beyond the first/last control point continue
/// linearly along the end tangent.
pub fn spline_full_width(contour: &OpenContour, width: usize) -> Result<Vec<f64>> {
    let mut pts: Vec<Point> = contour.points().to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x));
    for w in pts.windows(2) {
        if w[1].x == w[0].x {
            return Err(Error::NonFunctionalContour { x: w[0].x });
        }
    }
    let spline = NaturalCubicSpline::fit(&pts);
    Ok((0..width).map(|c| spline.eval(c as f64)).collect())
}

/// Natural cubic spline interpolant `y(x)` with linear tangent extrapolation
/// outside the knot range.
struct NaturalCubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots; zero at both ends.
    m2: Vec<f64>,
}

impl NaturalCubicSpline {
    /// `pts` must be sorted by strictly increasing x, length >= 2.
    fn fit(pts: &[Point]) -> Self {
        let n = pts.len();
        let xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.y).collect();
        let mut m2 = vec![0.0; n];
        if n > 2 {
            // Tridiagonal system for interior second derivatives.
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                let h0 = xs[i + 1] - xs[i];
                let h1 = xs[i + 2] - xs[i + 1];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h1 - (ys[i + 1] - ys[i]) / h0);
            }
            // Thomas algorithm; the lower diagonal equals the previous upper.
            for i in 1..k {
                let lower = upper[i - 1];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m2[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m2[i + 1] = (rhs[i] - upper[i] * m2[i + 2]) / diag[i];
            }
        }
        NaturalCubicSpline { xs, ys, m2 }
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let (x0, x1) = (self.xs[0], self.xs[n - 1]);
        if x <= x0 {
            return self.ys[0] + self.start_slope() * (x - x0);
        }
        if x >= x1 {
            return self.ys[n - 1] + self.end_slope() * (x - x1);
        }
        // Binary search for the segment containing x.
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.xs[mid] <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let h = self.xs[hi] - self.xs[lo];
        let a = (self.xs[hi] - x) / h;
        let b = (x - self.xs[lo]) / h;
        a * self.ys[lo]
            + b * self.ys[hi]
            + ((a * a * a - a) * self.m2[lo] + (b * b * b - b) * self.m2[hi]) * h * h / 6.0
    }

    fn start_slope(&self) -> f64 {
        let h = self.xs[1] - self.xs[0];
        (self.ys[1] - self.ys[0]) / h - h * (2.0 * self.m2[0] + self.m2[1]) / 6.0
    }

    fn end_slope(&self) -> f64 {
        let n = self.xs.len();
        let h = self.xs[n - 1] - self.xs[n - 2];
        (self.ys[n - 1] - self.ys[n - 2]) / h + h * (self.m2[n - 2] + 2.0 * self.m2[n - 1]) / 6.0
    }
}
