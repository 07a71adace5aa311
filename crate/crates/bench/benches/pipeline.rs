use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use octseg_bench::standard_fixture;
use octseg_core::evolution::build_system;
use octseg_core::geometry::Point;
use octseg_core::metrics::hausdorff;
use octseg_core::phantom::{generate, PhantomSpec};
use octseg_core::pipeline::{initialize, segment, InitMode, SegmentationConfig};
use octseg_core::shape_model::OctShape;

fn banded_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("banded_solve");
    for m in [40usize, 360] {
        let system = build_system(m, 0.5, 0.5, 0.01).unwrap();
        let rhs: Vec<f64> = (0..m).map(|i| (i as f64 * 0.37).sin() * 40.0).collect();
        group.bench_function(format!("m{m}"), |b| {
            b.iter(|| system.solve(black_box(&rhs)).unwrap())
        });
    }
    group.finish();
}

fn phantom_generation(c: &mut Criterion) {
    let spec = PhantomSpec::standard(512, 512, 3);
    c.bench_function("phantom_512_speckled", |b| {
        b.iter(|| generate(black_box(&spec)).unwrap())
    });
}

fn segmentation_iterations(c: &mut Criterion) {
    let (model, sample) = standard_fixture();
    let init = initialize(&model, &sample.image, InitMode::MeanCentered).unwrap();
    let config = SegmentationConfig {
        iterations: 10,
        ..SegmentationConfig::default()
    };
    c.bench_function("segment_10_iterations_512", |b| {
        b.iter(|| segment(&sample.image, &model, &config, black_box(&init)).unwrap())
    });
}

fn shape_correction(c: &mut Criterion) {
    let (model, sample) = standard_fixture();
    c.bench_function("shape_correction_360pt", |b| {
        b.iter(|| model.correct(black_box(&sample.shape)).unwrap())
    });
}

fn hausdorff_columns(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a: Vec<Point> = (0..512)
        .map(|x| Point::new(x as f64, 200.0 + rng.random_range(-3.0..3.0)))
        .collect();
    let b: Vec<Point> = (0..512)
        .map(|x| Point::new(x as f64, 201.0 + rng.random_range(-3.0..3.0)))
        .collect();
    c.bench_function("hausdorff_512_columns", |bench| {
        bench.iter(|| hausdorff(black_box(&a), black_box(&b)).unwrap())
    });
}

fn full_width_extraction(c: &mut Criterion) {
    let (_, sample) = standard_fixture();
    let contours = OctShape::to_contours(&sample.shape).unwrap();
    let width = sample.image.width();
    c.bench_function("spline_full_width_9x512", |b| {
        b.iter(|| octseg_core::pipeline::extract_boundaries(black_box(&contours), width).unwrap())
    });
}

criterion_group!(
    benches,
    banded_solve,
    phantom_generation,
    segmentation_iterations,
    shape_correction,
    hausdorff_columns,
    full_width_extraction
);
criterion_main!(benches);
