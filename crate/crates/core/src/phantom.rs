//! Synthetic layered-image generator with ground truth.
//!
//! A phantom is a stack of regions separated by sinusoidally perturbed
//! boundaries. Pixels take their region's mean intensity, then optional
//! multiplicative speckle `J = I + n*I` is applied with `n` zero-mean
//! uniform of the requested variance. Generation is deterministic given
//! the seed; the returned truth is the noise-free boundary geometry.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::metrics::BoundaryTruth;
use crate::ms_energy::GrayImage;
use crate::shape_model::OctShape;
use crate::NUM_BOUNDARIES;

/// Minimum vertical gap between adjacent boundaries, at every column.
const MIN_GAP: f64 = 2.0;

/// One sinusoidally perturbed boundary:
/// `y(x) = depth + amplitude * sin(2*pi*x / period + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySpec {
    pub depth: f64,
    pub amplitude: f64,
    pub period: f64,
    pub phase: f64,
}

impl BoundarySpec {
    pub fn y_at(&self, x: f64) -> f64 {
        self.depth
            + self.amplitude * (2.0 * std::f64::consts::PI * x / self.period + self.phase).sin()
    }
}

/// Full description of a synthetic layered image.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub boundaries: Vec<BoundarySpec>,
    /// One mean intensity per region; one more entry than boundaries.
    pub region_means: Vec<f64>,
    /// Variance of the zero-mean uniform speckle factor; 0 disables noise.
    pub speckle_variance: f64,
    pub seed: u64,
}

impl PhantomSpec {
    /// The standard nine-boundary phantom: evenly spaced layers with fixed
    /// per-boundary sinusoids and strongly alternating region intensities.
    /// Amplitudes shrink proportionally below 512 px height so the layer
    /// ordering holds at any size.
    pub fn standard(width: usize, height: usize, seed: u64) -> PhantomSpec {
        let amplitudes = [4.0, 3.0, 3.5, 2.5, 3.0, 2.0, 2.5, 3.0, 4.0];
        let periods = [
            420.0, 330.0, 380.0, 290.0, 350.0, 260.0, 310.0, 360.0, 400.0,
        ];
        let phases = [0.0, 0.9, 1.7, 2.6, 3.4, 4.2, 5.1, 5.9, 0.4];
        let amp_scale = (height as f64 / 512.0).min(1.0);
        // Stack centered on the image center so a mean-centered
        // initialization starts near the truth.
        let spacing = 0.53 * height as f64 / 8.0;
        let top = 0.5 * height as f64 - 4.0 * spacing;
        let boundaries = (0..NUM_BOUNDARIES)
            .map(|k| BoundarySpec {
                depth: top + spacing * k as f64,
                amplitude: amplitudes[k] * amp_scale,
                period: periods[k],
                phase: phases[k],
            })
            .collect();
        PhantomSpec {
            width,
            height,
            boundaries,
            // Adjacent contrast of at least 0.7 keeps the narrowband force
            // strong enough to close worst-case initial offsets within the
            // default iteration budget.
            region_means: vec![0.10, 0.90, 0.20, 0.95, 0.15, 0.85, 0.10, 0.80, 0.05, 0.90],
            speckle_variance: 0.8,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidSpec {
                what: "image dimensions must be positive".to_string(),
            });
        }
        if self.boundaries.is_empty() {
            return Err(Error::InvalidSpec {
                what: "at least one boundary required".to_string(),
            });
        }
        if self.region_means.len() != self.boundaries.len() + 1 {
            return Err(Error::InvalidSpec {
                what: format!(
                    "need {} region means for {} boundaries, got {}",
                    self.boundaries.len() + 1,
                    self.boundaries.len(),
                    self.region_means.len()
                ),
            });
        }
        if !self
            .region_means
            .iter()
            .all(|v| v.is_finite() && (0.0..=1.0).contains(v))
        {
            return Err(Error::InvalidSpec {
                what: "region means must lie in [0, 1]".to_string(),
            });
        }
        if !(self.speckle_variance.is_finite() && self.speckle_variance >= 0.0) {
            return Err(Error::InvalidSpec {
                what: "speckle variance must be non-negative".to_string(),
            });
        }
        for x in 0..self.width {
            let xf = x as f64;
            for k in 0..self.boundaries.len() - 1 {
                let upper = self.boundaries[k].y_at(xf);
                let lower = self.boundaries[k + 1].y_at(xf);
                if lower - upper < MIN_GAP {
                    return Err(Error::InvalidSpec {
                        what: format!(
                            "boundaries {k} and {} closer than {MIN_GAP} px at column {x}",
                            k + 1
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    /// Samples the true boundaries at `m` points per boundary, evenly
    /// spaced across the full width.
    pub fn sample_shape(&self, m: usize) -> Result<OctShape> {
        if self.boundaries.len() != NUM_BOUNDARIES {
            return Err(Error::DimensionMismatch {
                expected: NUM_BOUNDARIES,
                got: self.boundaries.len(),
            });
        }
        let n = NUM_BOUNDARIES * m;
        let mut xs = Vec::with_capacity(2 * n);
        let mut ys = Vec::with_capacity(n);
        for b in &self.boundaries {
            for i in 0..m {
                let x = (self.width - 1) as f64 * i as f64 / (m - 1) as f64;
                xs.push(x);
                ys.push(b.y_at(x));
            }
        }
        xs.extend(ys);
        OctShape::new(xs)
    }
}

/// Renders the phantom and its ground truth. The image carries the speckle
/// requested by the spec; the truth is always the noise-free geometry.
pub fn generate(spec: &PhantomSpec) -> Result<(GrayImage, BoundaryTruth)> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    // Boundary depth per column; a pixel's region index is the number of
    // boundaries at or above its row.
    let depths: Vec<Vec<f64>> = spec
        .boundaries
        .iter()
        .map(|b| (0..w).map(|x| b.y_at(x as f64)).collect())
        .collect();
    let mut image_data = Vec::with_capacity(w * h);
    for y in 0..h {
        let yf = y as f64;
        for x in 0..w {
            let region = depths.iter().take_while(|d| d[x] <= yf).count();
            image_data.push(spec.region_means[region]);
        }
    }
    if spec.speckle_variance > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let half_width = (3.0 * spec.speckle_variance).sqrt();
        for v in &mut image_data {
            let n = rng.random_range(-half_width..half_width);
            *v = (*v + n * *v).clamp(0.0, 1.0);
        }
    }
    let image = GrayImage::new(w, h, image_data)?;
    let truth = BoundaryTruth::new(depths)?;
    Ok((image, truth))
}

/// Perturbation ranges for sampling a family of phantoms around a base
/// spec. Depth jitter is per boundary; amplitude and phase jitters are
/// shared across the nine boundaries of one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationRanges {
    /// Each boundary depth moves by a uniform draw from `[-depth, +depth]`.
    pub depth: f64,
    /// All amplitudes scale by `1 + u`, `u` uniform in `[-amplitude, +amplitude]`.
    pub amplitude: f64,
    /// All phases shift by a uniform draw from `[-phase, +phase]`.
    pub phase: f64,
}

impl Default for PerturbationRanges {
    fn default() -> Self {
        PerturbationRanges {
            depth: 2.0,
            amplitude: 0.0,
            phase: 0.0,
        }
    }
}

/// One synthesized phantom: the rendered image, its ground truth, the
/// sampled training shape, and the concrete spec it came from.
#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub image: GrayImage,
    pub truth: BoundaryTruth,
    pub shape: OctShape,
    pub spec: PhantomSpec,
}

/// Draws `count` phantoms from the family around `base`, resampling any
/// draw that violates the ordering invariant. Deterministic given `seed`.
pub fn synth_training_set(
    base: &PhantomSpec,
    ranges: &PerturbationRanges,
    count: usize,
    seed: u64,
    points_per_boundary: usize,
) -> Result<Vec<TrainingSample>> {
    if count < 2 {
        return Err(Error::InsufficientData { got: count });
    }
    base.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(count);
    for index in 0..count {
        let mut attempts = 0;
        let spec = loop {
            let spec = perturb(base, ranges, &mut rng, seed, index);
            if spec.validate().is_ok() {
                break spec;
            }
            attempts += 1;
            if attempts > 100 {
                return Err(Error::InvalidSpec {
                    what: "perturbation ranges violate boundary ordering".to_string(),
                });
            }
        };
        let (image, truth) = generate(&spec)?;
        let shape = spec.sample_shape(points_per_boundary)?;
        samples.push(TrainingSample {
            image,
            truth,
            shape,
            spec,
        });
    }
    Ok(samples)
}

fn perturb(
    base: &PhantomSpec,
    ranges: &PerturbationRanges,
    rng: &mut ChaCha8Rng,
    seed: u64,
    index: usize,
) -> PhantomSpec {
    let uniform = |rng: &mut ChaCha8Rng, r: f64| {
        if r > 0.0 {
            rng.random_range(-r..r)
        } else {
            0.0
        }
    };
    let amp_scale = 1.0 + uniform(rng, ranges.amplitude);
    let phase_shift = uniform(rng, ranges.phase);
    let boundaries = base
        .boundaries
        .iter()
        .map(|b| BoundarySpec {
            depth: b.depth + uniform(rng, ranges.depth),
            amplitude: b.amplitude * amp_scale,
            period: b.period,
            phase: b.phase + phase_shift,
        })
        .collect();
    PhantomSpec {
        boundaries,
        seed: seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(index as u64 + 1),
        ..base.clone()
    }
}

/// Helper for tests and initialization: the true boundary positions as
/// control points, matching [`PhantomSpec::sample_shape`].
pub fn truth_points(spec: &PhantomSpec, boundary: usize, m: usize) -> Vec<Point> {
    (0..m)
        .map(|i| {
            let x = (spec.width - 1) as f64 * i as f64 / (m - 1) as f64;
            Point::new(x, spec.boundaries[boundary].y_at(x))
        })
        .collect()
}
