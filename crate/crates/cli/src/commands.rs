//! Implementations of the four subcommands.

use std::path::PathBuf;

use log::info;

use octseg_core::io::{
    load_annotation, load_gray_image, load_model, load_result, render_overlay, save_annotation,
    save_gray_image, save_model, save_result, write_eval_csv, AnnotationFile, ResultConfig,
    ResultFile,
};
use octseg_core::metrics::{evaluate, evaluate_batch};
use octseg_core::phantom::{synth_training_set, PerturbationRanges, PhantomSpec};
use octseg_core::pipeline::{
    initialize, segment as run_segmentation, InitMode, SegmentationConfig,
};
use octseg_core::shape_model::{train as train_model, OctShape};
use octseg_core::Error;

use crate::{written, EvalArgs, Failure, SegmentArgs, SynthArgs, TrainArgs};

pub fn synth(args: &SynthArgs) -> Result<(), Failure> {
    let base = PhantomSpec {
        speckle_variance: args.speckle_var,
        ..PhantomSpec::standard(args.width, args.height, args.seed)
    };
    let ranges = PerturbationRanges {
        depth: args.depth_jitter,
        amplitude: args.amp_jitter,
        phase: args.phase_jitter,
    };
    let samples = synth_training_set(
        &base,
        &ranges,
        args.count,
        args.seed,
        args.points_per_boundary,
    )?;
    written(std::fs::create_dir_all(&args.out).map_err(Error::from))?;
    for (i, sample) in samples.iter().enumerate() {
        let image_path = args.out.join(format!("phantom_{i:03}.png"));
        let truth_path = args.out.join(format!("phantom_{i:03}.truth.json"));
        written(save_gray_image(&image_path, &sample.image))?;
        let annotation = AnnotationFile::from_truth(&sample.truth, args.height);
        written(save_annotation(&truth_path, &annotation))?;
        info!(
            "wrote {} and {}",
            image_path.display(),
            truth_path.display()
        );
    }
    Ok(())
}

/// Expands a glob pattern into a sorted path list.
fn expand(pattern: &str) -> Result<Vec<PathBuf>, Failure> {
    let entries = glob::glob(pattern).map_err(|e| Failure {
        code: 1,
        message: format!("bad glob pattern {pattern}: {e}"),
    })?;
    let mut paths: Vec<PathBuf> = entries.filter_map(|entry| entry.ok()).collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure {
            code: 1,
            message: format!("no files match {pattern}"),
        });
    }
    Ok(paths)
}

pub fn train(args: &TrainArgs) -> Result<(), Failure> {
    let paths = expand(&args.annotations)?;
    if paths.len() < 2 {
        return Err(Failure {
            code: 1,
            message: format!(
                "insufficient data: need at least 2 annotations, got {}",
                paths.len()
            ),
        });
    }
    let annotations: Vec<(PathBuf, AnnotationFile)> = paths
        .into_iter()
        .map(|p| load_annotation(&p).map(|a| (p, a)))
        .collect::<Result<_, _>>()?;
    let (w, h) = (annotations[0].1.width, annotations[0].1.height);
    let mismatched: Vec<String> = annotations
        .iter()
        .filter(|(_, a)| a.width != w || a.height != h)
        .map(|(p, _)| p.display().to_string())
        .collect();
    if !mismatched.is_empty() {
        return Err(Failure {
            code: 1,
            message: format!(
                "annotations disagree on image dimensions: {}",
                mismatched.join(", ")
            ),
        });
    }
    let shapes: Vec<OctShape> = annotations
        .iter()
        .map(|(_, a)| a.to_shape(args.points_per_boundary))
        .collect::<Result<_, _>>()?;
    let model = train_model(&shapes, args.variance)?;
    info!(
        "trained on {} shapes, retained {} modes",
        shapes.len(),
        model.num_modes()
    );
    written(save_model(&args.out, &model))?;
    Ok(())
}

fn parse_init(args: &SegmentArgs) -> Result<InitMode, Failure> {
    match args.init.as_str() {
        "mean" => Ok(InitMode::MeanCentered),
        "offset" => Ok(InitMode::Offset {
            dx: args.offset_x,
            dy: args.offset_y,
        }),
        "flat" => match (args.flat_top, args.flat_bottom) {
            (Some(top), Some(bottom)) => Ok(InitMode::FlatLines { top, bottom }),
            _ => Err(Failure {
                code: 1,
                message: "--init flat requires --flat-top and --flat-bottom".to_string(),
            }),
        },
        other => Err(Failure {
            code: 1,
            message: format!("unknown init mode {other} (expected mean|flat|offset)"),
        }),
    }
}

pub fn segment(args: &SegmentArgs) -> Result<(), Failure> {
    let image = load_gray_image(&args.image)?;
    let model = load_model(&args.model)?;
    let mode = parse_init(args)?;
    let config = SegmentationConfig {
        alpha: args.alpha,
        beta: args.beta,
        dt: args.dt,
        band_radius: args.band,
        iterations: args.iters,
        points_per_boundary: model.n_points() / octseg_core::NUM_BOUNDARIES,
        shape_correct_every: args.correct_every,
        early_stop: args.early_stop,
        ..SegmentationConfig::default()
    };
    let init = initialize(&model, &image, mode)?;
    let echo = ResultConfig::from_config(&config, args.init.clone());
    match run_segmentation(&image, &model, &config, &init) {
        Ok(result) => {
            let document = ResultFile::from_result(&result, echo, image.width(), image.height());
            written(save_result(&args.out, &document))?;
            if let Some(render_path) = &args.render {
                written(render_overlay(render_path, &image, &result.full_width))?;
            }
            info!("segmented in {} iterations", result.iterations_run);
            Ok(())
        }
        Err(Error::Diverged {
            iteration,
            boundary,
            partial,
        }) => {
            let document = ResultFile::from_result(&partial, echo, image.width(), image.height());
            written(save_result(&args.out, &document))?;
            Err(Failure {
                code: 3,
                message: format!(
                    "diverged at iteration {iteration}, boundary {boundary}; partial trace written to {}",
                    args.out.display()
                ),
            })
        }
        Err(other) => Err(other.into()),
    }
}

pub fn eval(args: &EvalArgs) -> Result<(), Failure> {
    let pred_paths = expand(&args.pred)?;
    let truth_paths = expand(&args.truth)?;
    if pred_paths.len() != truth_paths.len() {
        return Err(Failure {
            code: 1,
            message: format!(
                "{} predictions but {} truth files",
                pred_paths.len(),
                truth_paths.len()
            ),
        });
    }
    let mut evals = Vec::with_capacity(pred_paths.len());
    for (pred_path, truth_path) in pred_paths.iter().zip(&truth_paths) {
        let prediction = load_result(pred_path)?;
        let annotation = load_annotation(truth_path)?;
        let truth = annotation.to_truth()?;
        if prediction.width != annotation.width {
            return Err(Failure {
                code: 1,
                message: format!(
                    "width mismatch: {} is {} columns, {} is {}",
                    pred_path.display(),
                    prediction.width,
                    truth_path.display(),
                    annotation.width
                ),
            });
        }
        let curves = prediction.full_width_curves()?;
        evals.push(evaluate(&curves, &truth)?);
    }
    let batch = evaluate_batch(&evals)?;
    println!(
        "overall Hausdorff distance: {:.3}\u{b1}{:.3} px over {} image(s)",
        batch.overall.mean,
        batch.overall.sd,
        evals.len()
    );
    written(write_eval_csv(&args.out, &[(args.method.clone(), batch)]))?;
    Ok(())
}
