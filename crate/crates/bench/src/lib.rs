//! Benchmark-only crate; see `benches/pipeline.rs`.
//!
//! Shared fixtures for the benchmarks live here so they can be reused
//! from multiple bench targets later.

use octseg_core::phantom::{synth_training_set, PerturbationRanges, PhantomSpec, TrainingSample};
use octseg_core::shape_model::{train, OctShape, ShapeModel};

/// Standard 512x512 noise-free family: a trained model plus one
/// held-out sample.
pub fn standard_fixture() -> (ShapeModel, TrainingSample) {
    let base = PhantomSpec {
        speckle_variance: 0.0,
        ..PhantomSpec::standard(512, 512, 0)
    };
    let mut samples = synth_training_set(&base, &PerturbationRanges::default(), 9, 41, 40).unwrap();
    let held_out = samples.pop().unwrap();
    let shapes: Vec<OctShape> = samples.iter().map(|s| s.shape.clone()).collect();
    let model = train(&shapes, 0.98).unwrap();
    (model, held_out)
}
