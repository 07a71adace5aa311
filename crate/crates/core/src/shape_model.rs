//! Statistical shape prior for the nine-boundary model: Procrustes
//! alignment, PCA over training shapes, eigenvalue-bounded coefficient
//! clamping, and correction of evolved shapes.
//!
//! A whole nine-boundary configuration is a single `2N`-vector
//! `(x_1..x_N, y_1..y_N)` with `N = 9*M`. Training runs generalized
//! Procrustes alignment (iterative alignment to the evolving mean), then an
//! eigendecomposition of the sample covariance. When `2N > L` the
//! decomposition is done on the `L x L` Gram matrix, which has the same
//! nonzero spectrum, and eigenvectors are mapped back to shape space.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{OpenContour, Point};
use crate::NUM_BOUNDARIES;

/// GPA convergence: stop when the mean moves less than this between rounds.
const GPA_TOL: f64 = 1e-8;
const GPA_MAX_ROUNDS: usize = 50;

/// Relative cutoff below which covariance eigenvalues count as zero.
const EIGENVALUE_CUTOFF: f64 = 1e-10;

/// A whole nine-boundary shape as a `2N`-vector `(x_1..x_N, y_1..y_N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OctShape {
    data: Vec<f64>,
}

impl OctShape {
    /// `data` is `(x_1..x_N, y_1..y_N)` with `N` divisible by 9 and at
    /// least 3 points per boundary.
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if !data.len().is_multiple_of(2) {
            return Err(Error::DimensionMismatch {
                expected: data.len() + 1,
                got: data.len(),
            });
        }
        let n = data.len() / 2;
        if !n.is_multiple_of(NUM_BOUNDARIES) || n / NUM_BOUNDARIES < 3 {
            return Err(Error::InvalidParameter {
                what: format!(
                    "shape must hold {NUM_BOUNDARIES} boundaries of >= 3 points each, got N = {n}"
                ),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteInput {
                what: "shape vector",
            });
        }
        Ok(OctShape { data })
    }

    /// Concatenates exactly nine contours with equal point counts.
    pub fn from_contours(contours: &[OpenContour]) -> Result<Self> {
        if contours.len() != NUM_BOUNDARIES {
            return Err(Error::DimensionMismatch {
                expected: NUM_BOUNDARIES,
                got: contours.len(),
            });
        }
        let m = contours[0].len();
        if contours.iter().any(|c| c.len() != m) {
            return Err(Error::Validation {
                what: "all boundaries must have the same number of control points".to_string(),
            });
        }
        let n = NUM_BOUNDARIES * m;
        let mut data = Vec::with_capacity(2 * n);
        for c in contours {
            data.extend(c.points().iter().map(|p| p.x));
        }
        for c in contours {
            data.extend(c.points().iter().map(|p| p.y));
        }
        OctShape::new(data)
    }

    /// Splits back into nine contours of `M = N / 9` points.
    pub fn to_contours(&self) -> Result<Vec<OpenContour>> {
        let n = self.n_points();
        let m = n / NUM_BOUNDARIES;
        (0..NUM_BOUNDARIES)
            .map(|b| {
                let pts = (0..m).map(|i| self.point(b * m + i)).collect();
                OpenContour::new(pts)
            })
            .collect()
    }

    /// Number of control points `N` (the vector has length `2N`).
    pub fn n_points(&self) -> usize {
        self.data.len() / 2
    }

    pub fn points_per_boundary(&self) -> usize {
        self.n_points() / NUM_BOUNDARIES
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn point(&self, i: usize) -> Point {
        Point::new(self.data[i], self.data[self.n_points() + i])
    }

    pub fn centroid(&self) -> Point {
        let n = self.n_points();
        let sx: f64 = self.data[..n].iter().sum();
        let sy: f64 = self.data[n..].iter().sum();
        Point::new(sx / n as f64, sy / n as f64)
    }

    pub fn translated(&self, offset: Point) -> OctShape {
        let n = self.n_points();
        let mut data = self.data.clone();
        for v in &mut data[..n] {
            *v += offset.x;
        }
        for v in &mut data[n..] {
            *v += offset.y;
        }
        OctShape { data }
    }
}

/// A direct similarity transform: `p -> scale * R(rotation) * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    /// Rotation angle in radians.
    pub rotation: f64,
    pub translation: Point,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        SimilarityTransform {
            scale: 1.0,
            rotation: 0.0,
            translation: Point::new(0.0, 0.0),
        }
    }

    pub fn apply_point(&self, p: Point) -> Point {
        let (sin, cos) = self.rotation.sin_cos();
        Point::new(
            self.scale * (cos * p.x - sin * p.y) + self.translation.x,
            self.scale * (sin * p.x + cos * p.y) + self.translation.y,
        )
    }

    pub fn apply(&self, shape: &OctShape) -> OctShape {
        let n = shape.n_points();
        let mut data = vec![0.0; 2 * n];
        for i in 0..n {
            let q = self.apply_point(shape.point(i));
            data[i] = q.x;
            data[n + i] = q.y;
        }
        OctShape { data }
    }

    /// The inverse similarity: `q -> (1/s) R(-rotation) (q - translation)`.
    pub fn inverse(&self) -> SimilarityTransform {
        let s = 1.0 / self.scale;
        let (sin, cos) = (-self.rotation).sin_cos();
        let tx = -s * (cos * self.translation.x - sin * self.translation.y);
        let ty = -s * (sin * self.translation.x + cos * self.translation.y);
        SimilarityTransform {
            scale: s,
            rotation: -self.rotation,
            translation: Point::new(tx, ty),
        }
    }
}

/// Finds the similarity transform (translation, rotation, uniform scale, no
/// reflection) minimizing the least-squares distance from `shape` to
/// `target`, and returns the transformed shape with it.
pub fn procrustes_align(
    shape: &OctShape,
    target: &OctShape,
) -> Result<(OctShape, SimilarityTransform)> {
    let n = shape.n_points();
    if target.n_points() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: target.n_points(),
        });
    }
    let pc = shape.centroid();
    let qc = target.centroid();
    let mut spread = 0.0;
    let mut dot = 0.0;
    let mut cross = 0.0;
    for i in 0..n {
        let p = shape.point(i) - pc;
        let q = target.point(i) - qc;
        spread += p.dot(p);
        dot += p.dot(q);
        cross += p.x * q.y - p.y * q.x;
    }
    if spread == 0.0 {
        return Err(Error::DegenerateShape {
            what: "shape has zero point variance",
        });
    }
    let magnitude = (dot * dot + cross * cross).sqrt();
    if magnitude == 0.0 {
        return Err(Error::DegenerateShape {
            what: "shapes share no similarity component",
        });
    }
    let rotation = cross.atan2(dot);
    let scale = magnitude / spread;
    let (sin, cos) = rotation.sin_cos();
    let translation = Point::new(
        qc.x - scale * (cos * pc.x - sin * pc.y),
        qc.y - scale * (sin * pc.x + cos * pc.y),
    );
    let transform = SimilarityTransform {
        scale,
        rotation,
        translation,
    };
    Ok((transform.apply(shape), transform))
}

/// Least-squares similarity alignment followed by tangent-space
/// normalization: the aligned shape is rescaled so its dot product with
/// the target equals the target's squared norm. This keeps shape
/// deviations exactly orthogonal to the scale direction, which makes the
/// correction step an exact fixed point on the learned manifold.
fn align_tangent(shape: &OctShape, target: &OctShape) -> Result<(OctShape, SimilarityTransform)> {
    let (aligned, transform) = procrustes_align(shape, target)?;
    let target_sq: f64 = target.data().iter().map(|v| v * v).sum();
    let correlation: f64 = aligned
        .data()
        .iter()
        .zip(target.data())
        .map(|(a, b)| a * b)
        .sum();
    if correlation <= 0.0 {
        return Err(Error::DegenerateShape {
            what: "aligned shape is anti-correlated with the target",
        });
    }
    let k = target_sq / correlation;
    let scaled = OctShape {
        data: aligned.data().iter().map(|v| v * k).collect(),
    };
    let transform = SimilarityTransform {
        scale: transform.scale * k,
        rotation: transform.rotation,
        translation: transform.translation * k,
    };
    Ok((scaled, transform))
}

/// Output of generalized Procrustes alignment: the aligned shapes and the
/// converged mean (centered at the origin).
#[derive(Debug, Clone)]
pub struct GpaAlignment {
    pub aligned: Vec<OctShape>,
    pub mean: OctShape,
}

/// Iterative alignment to the evolving mean: align every shape to the
/// current mean, recompute the mean, recenter it at the origin, and repeat
/// until the mean moves less than 1e-8 (or 50 rounds).
pub fn generalized_procrustes(shapes: &[OctShape]) -> Result<GpaAlignment> {
    if shapes.len() < 2 {
        return Err(Error::InsufficientData { got: shapes.len() });
    }
    let n = shapes[0].n_points();
    if shapes.iter().any(|s| s.n_points() != n) {
        return Err(Error::Validation {
            what: "training shapes differ in point count".to_string(),
        });
    }
    let center = |s: &OctShape| {
        let c = s.centroid();
        s.translated(Point::new(-c.x, -c.y))
    };
    // Tangent normalization pins the scale each round (a plain similarity
    // iteration shrinks geometrically and never meets the tolerance), so
    // the mean keeps the first shape's pixel scale.
    let mut mean = center(&shapes[0]);
    let mut aligned: Vec<OctShape> = shapes.to_vec();
    for _ in 0..GPA_MAX_ROUNDS {
        for (slot, shape) in aligned.iter_mut().zip(shapes.iter()) {
            *slot = align_tangent(shape, &mean)?.0;
        }
        let new_mean = center(&average(&aligned));
        let moved = mean
            .data()
            .iter()
            .zip(new_mean.data())
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        mean = new_mean;
        if moved < GPA_TOL {
            break;
        }
    }
    // Final pass against the converged mean so every aligned shape is
    // optimally aligned to the frame the model will store.
    for (slot, shape) in aligned.iter_mut().zip(shapes.iter()) {
        *slot = align_tangent(shape, &mean)?.0;
    }
    Ok(GpaAlignment { aligned, mean })
}

fn average(shapes: &[OctShape]) -> OctShape {
    let len = shapes[0].data().len();
    let mut data = vec![0.0; len];
    for s in shapes {
        for (acc, v) in data.iter_mut().zip(s.data()) {
            *acc += v;
        }
    }
    for v in &mut data {
        *v /= shapes.len() as f64;
    }
    OctShape { data }
}

/// The trained point-distribution model: mean shape, orthonormal modes and
/// their eigenvalues (sorted descending).
#[derive(Debug, Clone)]
pub struct ShapeModel {
    mean: OctShape,
    /// `m` mode vectors, each of length `2N`, orthonormal.
    modes: Vec<Vec<f64>>,
    /// Eigenvalues, one per retained mode, all positive, descending.
    eigenvalues: Vec<f64>,
    training_size: usize,
    variance_fraction: f64,
}

/// Runs generalized Procrustes alignment and PCA over the training shapes.
///
/// The retained mode count is the smallest `t` whose eigenvalues cover
/// `variance_fraction` of the total variance, capped at `L - 1`.
pub fn train(shapes: &[OctShape], variance_fraction: f64) -> Result<ShapeModel> {
    let gpa = generalized_procrustes(shapes)?;
    ShapeModel::from_aligned(&gpa.aligned, variance_fraction)
}

impl ShapeModel {
    /// PCA over shapes that are already in a common frame (no alignment).
    pub fn from_aligned(aligned: &[OctShape], variance_fraction: f64) -> Result<ShapeModel> {
        let l = aligned.len();
        if l < 2 {
            return Err(Error::InsufficientData { got: l });
        }
        if !(variance_fraction > 0.0 && variance_fraction <= 1.0) {
            return Err(Error::InvalidParameter {
                what: format!("variance fraction must be in (0, 1], got {variance_fraction}"),
            });
        }
        let dim = aligned[0].data().len();
        if aligned.iter().any(|s| s.data().len() != dim) {
            return Err(Error::Validation {
                what: "training shapes differ in point count".to_string(),
            });
        }
        let mean = average(aligned);
        // Deviation matrix D: one column per shape, 2N rows.
        let deviations: Vec<Vec<f64>> = aligned
            .iter()
            .map(|s| {
                s.data()
                    .iter()
                    .zip(mean.data())
                    .map(|(a, b)| a - b)
                    .collect()
            })
            .collect();
        let denom = (l - 1) as f64;
        let total_variance: f64 = deviations.iter().flatten().map(|v| v * v).sum::<f64>() / denom;
        // Identical shapes leave only averaging round-off in the deviations;
        // treat variance far below the squared shape scale as rank zero.
        let scale_sq = mean.data().iter().map(|v| v * v).sum::<f64>().max(1.0);
        if total_variance <= scale_sq * 1e-24 {
            return Err(Error::DegenerateShape {
                what: "covariance has rank zero (identical training shapes)",
            });
        }

        // Eigendecomposition of the covariance, via the Gram matrix when
        // the shape dimension exceeds the sample count.
        let mut pairs: Vec<(f64, Vec<f64>)> = if dim > l {
            let gram = DMatrix::from_fn(l, l, |i, j| {
                deviations[i]
                    .iter()
                    .zip(&deviations[j])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    / denom
            });
            let eig = gram.symmetric_eigen();
            (0..l)
                .map(|k| {
                    let w = eig.eigenvectors.column(k);
                    let mut v = vec![0.0; dim];
                    for (j, dev) in deviations.iter().enumerate() {
                        let wj = w[j];
                        for (slot, d) in v.iter_mut().zip(dev) {
                            *slot += wj * d;
                        }
                    }
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm > 0.0 {
                        for x in &mut v {
                            *x /= norm;
                        }
                    }
                    (eig.eigenvalues[k], v)
                })
                .collect()
        } else {
            let cov = DMatrix::from_fn(dim, dim, |i, j| {
                deviations.iter().map(|d| d[i] * d[j]).sum::<f64>() / denom
            });
            let eig = cov.symmetric_eigen();
            (0..dim)
                .map(|k| {
                    (
                        eig.eigenvalues[k],
                        eig.eigenvectors.column(k).iter().copied().collect(),
                    )
                })
                .collect()
        };
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let cutoff = pairs[0].0.max(0.0) * EIGENVALUE_CUTOFF;
        pairs.retain(|(lambda, _)| *lambda > cutoff && *lambda > 0.0);
        if pairs.is_empty() {
            return Err(Error::DegenerateShape {
                what: "covariance has rank zero (identical training shapes)",
            });
        }

        let target = variance_fraction * total_variance;
        let mut kept = 0;
        let mut covered = 0.0;
        for (lambda, _) in &pairs {
            kept += 1;
            covered += lambda;
            if covered >= target {
                break;
            }
        }
        let m = kept.min(l - 1);
        let (eigenvalues, modes): (Vec<f64>, Vec<Vec<f64>>) = pairs.into_iter().take(m).unzip();
        Ok(ShapeModel {
            mean,
            modes,
            eigenvalues,
            training_size: l,
            variance_fraction,
        })
    }

    /// Rebuilds a model from stored fields, re-validating the invariants.
    pub fn from_parts(
        mean: OctShape,
        modes: Vec<Vec<f64>>,
        eigenvalues: Vec<f64>,
        training_size: usize,
        variance_fraction: f64,
    ) -> Result<ShapeModel> {
        let dim = mean.data().len();
        if modes.len() != eigenvalues.len() {
            return Err(Error::DimensionMismatch {
                expected: modes.len(),
                got: eigenvalues.len(),
            });
        }
        if modes.iter().any(|v| v.len() != dim) {
            return Err(Error::Validation {
                what: "mode vector length does not match the mean shape".to_string(),
            });
        }
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) || eigenvalues.iter().any(|v| *v <= 0.0) {
            return Err(Error::Validation {
                what: "eigenvalues must be positive and sorted descending".to_string(),
            });
        }
        for i in 0..modes.len() {
            for j in i..modes.len() {
                let g: f64 = modes[i].iter().zip(&modes[j]).map(|(a, b)| a * b).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                if (g - expect).abs() > 1e-10 {
                    return Err(Error::Validation {
                        what: format!("modes are not orthonormal (gram[{i}][{j}] = {g})"),
                    });
                }
            }
        }
        Ok(ShapeModel {
            mean,
            modes,
            eigenvalues,
            training_size,
            variance_fraction,
        })
    }

    pub fn mean(&self) -> &OctShape {
        &self.mean
    }

    pub fn modes(&self) -> &[Vec<f64>] {
        &self.modes
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn training_size(&self) -> usize {
        self.training_size
    }

    pub fn variance_fraction(&self) -> f64 {
        self.variance_fraction
    }

    pub fn n_points(&self) -> usize {
        self.mean.n_points()
    }

    /// Mode coefficients `b = P^T (z - mean)` of a shape already in the
    /// model frame.
    pub fn project(&self, shape: &OctShape) -> Result<Vec<f64>> {
        if shape.data().len() != self.mean.data().len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.data().len(),
                got: shape.data().len(),
            });
        }
        Ok(self
            .modes
            .iter()
            .map(|mode| {
                mode.iter()
                    .zip(shape.data().iter().zip(self.mean.data()))
                    .map(|(p, (z, zm))| p * (z - zm))
                    .sum()
            })
            .collect())
    }

    /// Clamps every coefficient into `[-3 sqrt(lambda_i), +3 sqrt(lambda_i)]`.
    pub fn clamp_coefficients(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.num_modes() {
            return Err(Error::DimensionMismatch {
                expected: self.num_modes(),
                got: b.len(),
            });
        }
        Ok(b.iter()
            .zip(&self.eigenvalues)
            .map(|(v, lambda)| {
                let limit = 3.0 * lambda.sqrt();
                v.clamp(-limit, limit)
            })
            .collect())
    }

    /// Reconstructs `mean + P b`.
    pub fn reconstruct(&self, b: &[f64]) -> Result<OctShape> {
        if b.len() != self.num_modes() {
            return Err(Error::DimensionMismatch {
                expected: self.num_modes(),
                got: b.len(),
            });
        }
        let mut data = self.mean.data().to_vec();
        for (coeff, mode) in b.iter().zip(&self.modes) {
            for (slot, p) in data.iter_mut().zip(mode) {
                *slot += coeff * p;
            }
        }
        OctShape::new(data)
    }

    /// Pulls an irregular shape back to the learned manifold: align to the
    /// mean (similarity fit plus tangent normalization), project, clamp,
    /// reconstruct, and warp back to the original pose.
    pub fn correct(&self, shape: &OctShape) -> Result<OctShape> {
        let (aligned, transform) = align_tangent(shape, &self.mean)?;
        let b = self.project(&aligned)?;
        let clamped = self.clamp_coefficients(&b)?;
        let reconstructed = self.reconstruct(&clamped)?;
        Ok(transform.inverse().apply(&reconstructed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// 27 points (9 boundaries x 3): the smallest valid shape.
    fn base_shape(scale: f64) -> OctShape {
        let n = 27;
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for b in 0..9 {
            for i in 0..3 {
                xs.push(scale * i as f64);
                ys.push(scale * (b as f64 + 0.1 * (i as f64).sin()));
            }
        }
        xs.extend(ys);
        OctShape::new(xs).unwrap()
    }

    fn max_coord_diff(a: &OctShape, b: &OctShape) -> f64 {
        a.data()
            .iter()
            .zip(b.data())
            .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
    }

    #[test]
    fn shape_vector_layout_round_trips() {
        let s = base_shape(10.0);
        let contours = s.to_contours().unwrap();
        assert_eq!(contours.len(), 9);
        let back = OctShape::from_contours(&contours).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn shape_rejects_bad_dimensions() {
        assert!(OctShape::new(vec![0.0; 53]).is_err());
        assert!(OctShape::new(vec![0.0; 40]).is_err());
        assert!(OctShape::new(vec![f64::NAN; 54]).is_err());
    }

    #[test]
    fn align_pure_translation() {
        let target = base_shape(10.0);
        let shape = target.translated(Point::new(5.0, 5.0));
        let (aligned, t) = procrustes_align(&shape, &target).unwrap();
        assert_abs_diff_eq!(t.scale, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.rotation, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.translation.x, -5.0, epsilon = 1e-9);
        assert_abs_diff_eq!(t.translation.y, -5.0, epsilon = 1e-9);
        assert!(max_coord_diff(&aligned, &target) <= 1e-9);
    }

    #[test]
    fn align_recovers_half_scale() {
        let target = base_shape(10.0);
        let c = target.centroid();
        let doubled = SimilarityTransform {
            scale: 2.0,
            rotation: 0.0,
            translation: Point::new(-c.x, -c.y),
        }
        .apply(&target.translated(Point::new(0.0, 0.0)));
        // Scale about the centroid: move centroid to origin, double, move back.
        let doubled = doubled.translated(c);
        let (_, t) = procrustes_align(&doubled, &target).unwrap();
        assert_abs_diff_eq!(t.scale, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn align_recovers_rotation() {
        let target = base_shape(10.0);
        let c = target.centroid();
        let angle = 30.0_f64.to_radians();
        let rotated = SimilarityTransform {
            scale: 1.0,
            rotation: angle,
            translation: Point::new(0.0, 0.0),
        }
        .apply(&target.translated(Point::new(-c.x, -c.y)))
        .translated(c);
        let (aligned, t) = procrustes_align(&rotated, &target).unwrap();
        assert_abs_diff_eq!(t.rotation, -angle, epsilon = 1e-9);
        assert!(max_coord_diff(&aligned, &target) <= 1e-9);
    }

    #[test]
    fn align_degenerate_shape_is_error() {
        let flat = OctShape::new(vec![1.0; 54]).unwrap();
        let target = base_shape(10.0);
        assert!(matches!(
            procrustes_align(&flat, &target),
            Err(Error::DegenerateShape { .. })
        ));
    }

    #[test]
    fn transform_inverse_round_trips() {
        let t = SimilarityTransform {
            scale: 1.7,
            rotation: 0.6,
            translation: Point::new(3.0, -2.0),
        };
        let p = Point::new(4.2, -1.3);
        let q = t.inverse().apply_point(t.apply_point(p));
        assert!(p.distance(q) <= 1e-12);
    }

    #[test]
    fn pca_two_shape_closed_form() {
        // Two shapes differing only in the first coordinate: the mean is the
        // midpoint, there is one mode along the difference, and the
        // eigenvalue is 2 * |z1 - mean|^2 under the 1/(L-1) normalization.
        let base = base_shape(10.0);
        let mut d1 = base.data().to_vec();
        let mut d2 = base.data().to_vec();
        d1[0] += 1.0;
        d2[0] -= 1.0;
        let z1 = OctShape::new(d1).unwrap();
        let z2 = OctShape::new(d2).unwrap();
        let model = ShapeModel::from_aligned(&[z1.clone(), z2], 0.98).unwrap();
        assert_eq!(model.num_modes(), 1);
        assert_abs_diff_eq!(model.eigenvalues()[0], 2.0, epsilon = 1e-10);
        assert!(max_coord_diff(model.mean(), &base) <= 1e-12);
        // Mode is the normalized difference direction (up to sign).
        let mode = &model.modes()[0];
        assert_abs_diff_eq!(mode[0].abs(), 1.0, epsilon = 1e-10);
        let b = model.project(&z1).unwrap();
        assert_abs_diff_eq!(b[0].abs(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn identical_shapes_degenerate() {
        let s = base_shape(10.0);
        assert!(matches!(
            ShapeModel::from_aligned(&[s.clone(), s.clone(), s], 0.98),
            Err(Error::DegenerateShape { .. })
        ));
    }

    #[test]
    fn full_variance_rank_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let base = base_shape(10.0);
        let shapes: Vec<OctShape> = (0..3)
            .map(|_| {
                let data = base
                    .data()
                    .iter()
                    .map(|v| v + rng.random_range(-1.0..1.0))
                    .collect();
                OctShape::new(data).unwrap()
            })
            .collect();
        let model = ShapeModel::from_aligned(&shapes, 1.0).unwrap();
        assert_eq!(model.num_modes(), 2);
    }

    #[test]
    fn project_mean_is_zero() {
        let base = base_shape(10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let shapes: Vec<OctShape> = (0..5)
            .map(|_| {
                let data = base
                    .data()
                    .iter()
                    .map(|v| v + rng.random_range(-1.0..1.0))
                    .collect();
                OctShape::new(data).unwrap()
            })
            .collect();
        let model = ShapeModel::from_aligned(&shapes, 1.0).unwrap();
        let b = model.project(model.mean()).unwrap();
        for v in b {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
        }
        // mean + 2 * p1 projects to (2, 0, ...).
        let shifted = OctShape::new(
            model
                .mean()
                .data()
                .iter()
                .zip(&model.modes()[0])
                .map(|(m, p)| m + 2.0 * p)
                .collect(),
        )
        .unwrap();
        let b = model.project(&shifted).unwrap();
        assert_abs_diff_eq!(b[0], 2.0, epsilon = 1e-10);
        for v in &b[1..] {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn projection_residual_is_orthogonal_to_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let base = base_shape(10.0);
        let shapes: Vec<OctShape> = (0..6)
            .map(|_| {
                let data = base
                    .data()
                    .iter()
                    .map(|v| v + rng.random_range(-2.0..2.0))
                    .collect();
                OctShape::new(data).unwrap()
            })
            .collect();
        let model = ShapeModel::from_aligned(&shapes, 1.0).unwrap();
        let random = OctShape::new(
            base.data()
                .iter()
                .map(|v| v + rng.random_range(-3.0..3.0))
                .collect(),
        )
        .unwrap();
        let b = model.project(&random).unwrap();
        let recon = model.reconstruct(&b).unwrap();
        for mode in model.modes() {
            let dot: f64 = mode
                .iter()
                .zip(random.data().iter().zip(recon.data()))
                .map(|(p, (z, r))| p * (z - r))
                .sum();
            assert!(dot.abs() <= 1e-10, "residual not orthogonal: {dot}");
        }
    }

    #[test]
    fn clamp_examples() {
        let base = base_shape(10.0);
        let mut d1 = base.data().to_vec();
        let mut d2 = base.data().to_vec();
        // Eigenvalue 2*|dz|^2 = 4 -> limit 3*sqrt(4) = 6.
        d1[0] += 2.0_f64.sqrt();
        d2[0] -= 2.0_f64.sqrt();
        let model = ShapeModel::from_aligned(
            &[OctShape::new(d1).unwrap(), OctShape::new(d2).unwrap()],
            0.98,
        )
        .unwrap();
        assert_abs_diff_eq!(model.eigenvalues()[0], 4.0, epsilon = 1e-10);
        assert_abs_diff_eq!(
            model.clamp_coefficients(&[7.0]).unwrap()[0],
            6.0,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            model.clamp_coefficients(&[5.5]).unwrap()[0],
            5.5,
            epsilon = 1e-12
        );

        // Unit eigenvalue: -10 clamps to -3.
        let mut d1 = base.data().to_vec();
        let mut d2 = base.data().to_vec();
        d1[1] += 0.5_f64.sqrt();
        d2[1] -= 0.5_f64.sqrt();
        let model = ShapeModel::from_aligned(
            &[OctShape::new(d1).unwrap(), OctShape::new(d2).unwrap()],
            0.98,
        )
        .unwrap();
        assert_abs_diff_eq!(model.eigenvalues()[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(
            model.clamp_coefficients(&[-10.0]).unwrap()[0],
            -3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn correct_training_shape_is_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let base = base_shape(40.0);
        let raw: Vec<OctShape> = (0..6)
            .map(|_| {
                let data = base
                    .data()
                    .iter()
                    .map(|v| v + rng.random_range(-0.5..0.5))
                    .collect();
                OctShape::new(data).unwrap()
            })
            .collect();
        let gpa = generalized_procrustes(&raw).unwrap();
        let model = ShapeModel::from_aligned(&gpa.aligned, 1.0).unwrap();
        for shape in &gpa.aligned {
            let b = model.project(shape).unwrap();
            let within = b
                .iter()
                .zip(model.eigenvalues())
                .all(|(v, l)| v.abs() <= 3.0 * l.sqrt());
            if !within {
                continue;
            }
            let corrected = model.correct(shape).unwrap();
            assert!(
                max_coord_diff(&corrected, shape) <= 1e-6,
                "training shape moved by {}",
                max_coord_diff(&corrected, shape)
            );
        }
    }

    #[test]
    fn correct_transformed_mean_returns_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let base = base_shape(40.0);
        let raw: Vec<OctShape> = (0..5)
            .map(|_| {
                let data = base
                    .data()
                    .iter()
                    .map(|v| v + rng.random_range(-0.5..0.5))
                    .collect();
                OctShape::new(data).unwrap()
            })
            .collect();
        let model = train(&raw, 0.98).unwrap();
        let t = SimilarityTransform {
            scale: 1.3,
            rotation: 0.4,
            translation: Point::new(120.0, 80.0),
        };
        let posed = t.apply(model.mean());
        let corrected = model.correct(&posed).unwrap();
        assert!(max_coord_diff(&corrected, &posed) <= 1e-9);
    }

    /// A deviation direction orthogonal to the similarity group at `base`
    /// (translations, scaling, rotation): a pure shape mode.
    fn pose_orthogonal_direction(base: &OctShape) -> Vec<f64> {
        let n = base.n_points();
        let dim = 2 * n;
        let mut dir = vec![0.0; dim];
        dir[5] = 1.0;
        dir[n + 11] = -0.7;
        dir[2] = 0.4;
        // Basis of the similarity tangent directions, mutually orthogonal:
        // translations, then scaling and rotation about the centered shape.
        let c = base.centroid();
        let centered: Vec<f64> = (0..dim)
            .map(|i| base.data()[i] - if i < n { c.x } else { c.y })
            .collect();
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut tx = vec![0.0; dim];
        let mut ty = vec![0.0; dim];
        for i in 0..n {
            tx[i] = 1.0;
            ty[n + i] = 1.0;
        }
        basis.push(tx);
        basis.push(ty);
        basis.push(centered.clone());
        let mut rot = vec![0.0; dim];
        for i in 0..n {
            rot[i] = -centered[n + i];
            rot[n + i] = centered[i];
        }
        basis.push(rot);
        for b in &basis {
            let nb: f64 = b.iter().map(|v| v * v).sum();
            let proj: f64 = dir.iter().zip(b).map(|(a, c)| a * c).sum::<f64>() / nb;
            for (d, c) in dir.iter_mut().zip(b) {
                *d -= proj * c;
            }
        }
        let norm: f64 = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        for d in &mut dir {
            *d /= norm;
        }
        dir
    }

    #[test]
    fn correct_clamps_runaway_mode() {
        let base = base_shape(100.0);
        let dir = pose_orthogonal_direction(&base);
        let amp = 0.01;
        let d1: Vec<f64> = base
            .data()
            .iter()
            .zip(&dir)
            .map(|(v, d)| v + amp * d)
            .collect();
        let d2: Vec<f64> = base
            .data()
            .iter()
            .zip(&dir)
            .map(|(v, d)| v - amp * d)
            .collect();
        let model = ShapeModel::from_aligned(
            &[OctShape::new(d1).unwrap(), OctShape::new(d2).unwrap()],
            0.98,
        )
        .unwrap();
        let lambda = model.eigenvalues()[0];
        let limit = 3.0 * lambda.sqrt();
        let runaway = OctShape::new(
            model
                .mean()
                .data()
                .iter()
                .zip(&model.modes()[0])
                .map(|(m, p)| m + 10.0 * lambda.sqrt() * p)
                .collect(),
        )
        .unwrap();
        let corrected = model.correct(&runaway).unwrap();
        let expected = OctShape::new(
            model
                .mean()
                .data()
                .iter()
                .zip(&model.modes()[0])
                .map(|(m, p)| m + limit * p)
                .collect(),
        )
        .unwrap();
        assert!(
            max_coord_diff(&corrected, &expected) <= 1e-4,
            "clamped reconstruction off by {}",
            max_coord_diff(&corrected, &expected)
        );
        // The corrected shape's mode coefficient sits at the clamp limit.
        let (aligned, _) = procrustes_align(&corrected, model.mean()).unwrap();
        let b = model.project(&aligned).unwrap();
        assert_abs_diff_eq!(b[0].abs(), limit, epsilon = 1e-6);
    }

    #[test]
    fn correct_is_similarity_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let base = base_shape(40.0);
        let raw: Vec<OctShape> = (0..5)
            .map(|_| {
                let data = base
                    .data()
                    .iter()
                    .map(|v| v + rng.random_range(-0.5..0.5))
                    .collect();
                OctShape::new(data).unwrap()
            })
            .collect();
        let model = train(&raw, 0.98).unwrap();
        for _ in 0..10 {
            let shape = OctShape::new(
                base.data()
                    .iter()
                    .map(|v| v + rng.random_range(-1.0..1.0))
                    .collect(),
            )
            .unwrap();
            let t = SimilarityTransform {
                scale: rng.random_range(0.5..2.0),
                rotation: rng.random_range(-1.0..1.0),
                translation: Point::new(
                    rng.random_range(-50.0..50.0),
                    rng.random_range(-50.0..50.0),
                ),
            };
            let lhs = model.correct(&t.apply(&shape)).unwrap();
            let rhs = t.apply(&model.correct(&shape).unwrap());
            assert!(
                max_coord_diff(&lhs, &rhs) <= 1e-6,
                "equivariance violated by {}",
                max_coord_diff(&lhs, &rhs)
            );
        }
    }
}
