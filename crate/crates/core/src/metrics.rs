//! Quantitative evaluation: Hausdorff distance between predicted and
//! ground-truth boundaries, aggregated per boundary and overall.

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::NUM_BOUNDARIES;

/// Ground truth: one y value per column for each of the nine boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTruth {
    curves: Vec<Vec<f64>>,
    width: usize,
}

impl BoundaryTruth {
    pub fn new(curves: Vec<Vec<f64>>) -> Result<Self> {
        if curves.len() != NUM_BOUNDARIES {
            return Err(Error::DimensionMismatch {
                expected: NUM_BOUNDARIES,
                got: curves.len(),
            });
        }
        let width = curves[0].len();
        if width == 0 || curves.iter().any(|c| c.len() != width) {
            return Err(Error::Validation {
                what: "all truth boundaries must span the full image width".to_string(),
            });
        }
        if curves.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput {
                what: "truth curve",
            });
        }
        Ok(BoundaryTruth { curves, width })
    }

    pub fn curves(&self) -> &[Vec<f64>] {
        &self.curves
    }

    pub fn width(&self) -> usize {
        self.width
    }
}

/// Symmetric Hausdorff distance between two point sets (Euclidean):
/// the larger of the two directed maximum nearest-neighbor distances.
pub fn hausdorff(a: &[Point], b: &[Point]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyRegion);
    }
    Ok(directed_sq(a, b).max(directed_sq(b, a)).sqrt())
}

/// Directed Hausdorff distance, squared. Scans each source point against
/// the target set and breaks out of the inner loop as soon as a neighbor
/// closer than the running maximum is found (it cannot raise the maximum).
fn directed_sq(from: &[Point], to: &[Point]) -> f64 {
    let mut cmax = 0.0f64;
    for &p in from {
        let mut cmin = f64::INFINITY;
        for &q in to {
            let dx = p.x - q.x;
            let dy = p.y - q.y;
            let d = dx * dx + dy * dy;
            if d < cmax {
                cmin = d;
                break;
            }
            if d < cmin {
                cmin = d;
            }
        }
        if cmin > cmax && cmin.is_finite() {
            cmax = cmin;
        }
    }
    cmax
}

/// Mean and sample standard deviation (the `L-1` normalization; zero for a
/// single sample).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
}

pub fn mean_sd(values: &[f64]) -> Stat {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Stat { mean, sd }
}

/// Evaluation of one image: Hausdorff distance per boundary plus the
/// mean/sd across the nine boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageEval {
    pub per_boundary: Vec<f64>,
    pub overall: Stat,
}

/// Compares full-width predicted boundaries against the truth. Both sides
/// are sampled one point per column so they live on the same support.
pub fn evaluate(pred: &[Vec<f64>], truth: &BoundaryTruth) -> Result<ImageEval> {
    if pred.len() != NUM_BOUNDARIES {
        return Err(Error::DimensionMismatch {
            expected: NUM_BOUNDARIES,
            got: pred.len(),
        });
    }
    let width = truth.width();
    if pred.iter().any(|c| c.len() != width) {
        return Err(Error::Validation {
            what: format!("prediction width differs from truth width {width}"),
        });
    }
    let to_points = |curve: &[f64]| -> Vec<Point> {
        curve
            .iter()
            .enumerate()
            .map(|(x, &y)| Point::new(x as f64, y))
            .collect()
    };
    let per_boundary: Vec<f64> = pred
        .iter()
        .zip(truth.curves())
        .map(|(p, t)| hausdorff(&to_points(p), &to_points(t)))
        .collect::<Result<_>>()?;
    let overall = mean_sd(&per_boundary);
    Ok(ImageEval {
        per_boundary,
        overall,
    })
}

/// Batch aggregation across images: per-boundary statistics over the
/// images, and overall statistics over the per-image overall means.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchEval {
    pub per_boundary: Vec<Stat>,
    pub overall: Stat,
}

pub fn evaluate_batch(evals: &[ImageEval]) -> Result<BatchEval> {
    if evals.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let per_boundary = (0..NUM_BOUNDARIES)
        .map(|b| mean_sd(&evals.iter().map(|e| e.per_boundary[b]).collect::<Vec<_>>()))
        .collect();
    let overall = mean_sd(&evals.iter().map(|e| e.overall.mean).collect::<Vec<_>>());
    Ok(BatchEval {
        per_boundary,
        overall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pts(coords: &[(f64, f64)]) -> Vec<Point> {
        coords.iter().map(|&(x, y)| Point::new(x, y)).collect()
    }

    #[test]
    fn identical_sets_are_zero() {
        let a = pts(&[(0.0, 0.0), (1.0, 2.0), (3.0, 1.0)]);
        assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn three_four_five() {
        let a = pts(&[(0.0, 0.0)]);
        let b = pts(&[(3.0, 4.0)]);
        assert_abs_diff_eq!(hausdorff(&a, &b).unwrap(), 5.0, epsilon = 1e-15);
    }

    #[test]
    fn asymmetric_sets() {
        let a = pts(&[(0.0, 0.0), (10.0, 0.0)]);
        let b = pts(&[(0.0, 0.0)]);
        assert_abs_diff_eq!(hausdorff(&a, &b).unwrap(), 10.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hausdorff(&b, &a).unwrap(), 10.0, epsilon = 1e-15);
    }

    #[test]
    fn empty_set_is_error() {
        let a = pts(&[(0.0, 0.0)]);
        assert!(matches!(hausdorff(&a, &[]), Err(Error::EmptyRegion)));
        assert!(matches!(hausdorff(&[], &a), Err(Error::EmptyRegion)));
    }

    #[test]
    fn symmetry() {
        let a = pts(&[(0.0, 0.0), (5.0, 1.0), (2.0, 7.0)]);
        let b = pts(&[(1.0, 1.0), (4.0, 3.0)]);
        assert_eq!(hausdorff(&a, &b).unwrap(), hausdorff(&b, &a).unwrap());
    }

    #[test]
    fn shift_changes_distance_by_at_most_shift_norm() {
        let a = pts(&[(0.0, 0.0), (5.0, 1.0), (2.0, 7.0), (9.0, 4.0)]);
        let b = pts(&[(1.0, 1.0), (4.0, 3.0), (7.0, 2.0)]);
        let base = hausdorff(&a, &b).unwrap();
        let v = Point::new(2.0, -1.5);
        let shifted: Vec<Point> = b.iter().map(|p| *p + v).collect();
        let moved = hausdorff(&a, &shifted).unwrap();
        assert!((moved - base).abs() <= v.norm() + 1e-12);
    }

    #[test]
    fn evaluate_exact_prediction() {
        let curves: Vec<Vec<f64>> = (0..9).map(|b| vec![10.0 * (b + 1) as f64; 20]).collect();
        let truth = BoundaryTruth::new(curves.clone()).unwrap();
        let eval = evaluate(&curves, &truth).unwrap();
        assert!(eval.per_boundary.iter().all(|&v| v == 0.0));
        assert_eq!(eval.overall.mean, 0.0);
        assert_eq!(eval.overall.sd, 0.0);
    }

    #[test]
    fn evaluate_uniform_shift_is_shift() {
        let curves: Vec<Vec<f64>> = (0..9).map(|b| vec![10.0 * (b + 1) as f64; 20]).collect();
        let truth = BoundaryTruth::new(curves.clone()).unwrap();
        let mut pred = curves;
        for v in &mut pred[3] {
            *v += 2.0;
        }
        let eval = evaluate(&pred, &truth).unwrap();
        assert_abs_diff_eq!(eval.per_boundary[3], 2.0, epsilon = 1e-12);
        for (b, v) in eval.per_boundary.iter().enumerate() {
            if b != 3 {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn evaluate_width_mismatch_is_error() {
        let truth = BoundaryTruth::new((0..9).map(|_| vec![5.0; 20]).collect()).unwrap();
        let pred: Vec<Vec<f64>> = (0..9).map(|_| vec![5.0; 19]).collect();
        assert!(evaluate(&pred, &truth).is_err());
    }

    #[test]
    fn batch_statistics() {
        let mk = |overall: f64| ImageEval {
            per_boundary: vec![overall; 9],
            overall: Stat {
                mean: overall,
                sd: 0.0,
            },
        };
        let batch = evaluate_batch(&[mk(1.0), mk(3.0)]).unwrap();
        assert_abs_diff_eq!(batch.overall.mean, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(batch.overall.sd, 2.0_f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(batch.per_boundary[0].mean, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn hausdorff_zero_iff_equal() {
        let a = pts(&[(0.0, 0.0), (1.0, 1.0)]);
        let b = pts(&[(0.0, 0.0), (1.0, 1.0 + 1e-9)]);
        assert!(hausdorff(&a, &b).unwrap() > 0.0);
    }
}
