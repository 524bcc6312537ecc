//! Thin subcommand wrappers over the library operations, each emitting a
//! JSON run summary on stdout.

use serde_json::json;

use graspforge_core::contact::MAP_POINTS;
use graspforge_core::detect::detect_grasp;
use graspforge_core::geometry::SurfaceIndex;
use graspforge_core::rng::SeedStream;
use graspforge_data::record::read_records;
use graspforge_data::synth::{revalidate_dataset, synthesize_dataset, DatasetConfig};
use graspforge_data::Manifest;
use graspforge_learn::cvae::{CoseCvae, CvaeConfig, CvaeTrainConfig};
use graspforge_learn::evaluator::{
    EvalSample, EvaluatorConfig, EvaluatorTrainConfig, GraspEvaluator,
};
use graspforge_learn::gradcheck::gradcheck_params;
use graspforge_learn::mat::Mat;
use graspforge_learn::standardize::hand_scale;

use crate::logging;
use crate::ops::{
    eval_sample_from_record, hand_from_manifest, map_from_record, parse_hand_spec, CliError,
};
use crate::{DetectArgs, GenDatasetArgs, GradcheckArgs, StatsArgs, TrainCvaeArgs, TrainEvalArgs};

pub fn gen_dataset(args: GenDatasetArgs) -> Result<String, CliError> {
    let cfg = DatasetConfig {
        hand: parse_hand_spec(&args.hand),
        scenes: args.scenes,
        objects_per_scene: args.objects_per_scene,
        grasps_per_object: args.grasps_per_object,
        tau: args.tau,
        mu: args.mu,
        crop_radius: args.crop_radius,
        crop_height: args.crop_height,
        region_half_extent: args.region_half_extent,
        ..DatasetConfig::new(&args.out, args.seed)
    };
    let manifest = synthesize_dataset(&cfg)?;
    logging::info(&format!(
        "dataset written to {} ({} records)",
        args.out.display(),
        manifest.record_total()
    ));
    Ok(json!({
        "command": "gen-dataset",
        "out": args.out.display().to_string(),
        "seed": args.seed,
        "scenes": manifest.scenes.len(),
        "records": manifest.record_total(),
        "class_histogram": manifest.class_histogram,
    })
    .to_string())
}

/// Load every record's (object cloud, contact map) pair for CVAE training.
fn cvae_dataset(
    root: &std::path::Path,
    manifest: &Manifest,
    class_count: usize,
) -> Result<
    Vec<(
        graspforge_core::geometry::PointCloud,
        graspforge_core::contact::ContactSemanticMap,
    )>,
    CliError,
> {
    let mut out = Vec::new();
    for scene in &manifest.scenes {
        for record in read_records(root.join(&scene.file))? {
            let (map, cloud) = map_from_record(root, &record, class_count)?;
            out.push((cloud, map));
        }
    }
    Ok(out)
}

pub fn train_cvae(args: TrainCvaeArgs) -> Result<String, CliError> {
    let manifest = Manifest::read(&args.dataset)?;
    let hand = hand_from_manifest(&manifest)?;
    let dataset = cvae_dataset(&args.dataset, &manifest, hand.class_count())?;
    if dataset.is_empty() {
        return Err(CliError::Failure("dataset has no records".into()));
    }
    let mut model = CoseCvae::new(CvaeConfig::for_hand_classes(hand.class_count()), args.seed);

    let mut cfg = CvaeTrainConfig {
        max_steps: args.steps,
        lr: args.lr,
        beta: args.beta,
        seed: args.seed,
        ..Default::default()
    };
    if let Some(fraction) = args.target_ce_fraction {
        // One measurement pass to anchor the early-stop threshold.
        let weights = graspforge_learn::cvae::inverse_frequency_weights(
            dataset.iter().map(|(_, m)| m),
            hand.class_count(),
        );
        let initial: f64 = dataset
            .iter()
            .map(|(o, m)| model.reconstruction_ce(o, m, &weights).unwrap_or(f64::INFINITY))
            .sum::<f64>()
            / dataset.len() as f64;
        cfg.target_ce = Some(fraction * initial);
    }
    let report = model.train(&dataset, &cfg)?;
    model.save(&args.out)?;
    logging::info(&format!(
        "cvae trained: CE {:.4} -> {:.4} in {} steps",
        report.initial_loss, report.final_loss, report.steps
    ));
    Ok(json!({
        "command": "train-cvae",
        "checkpoint": args.out.display().to_string(),
        "samples": dataset.len(),
        "steps": report.steps,
        "initial_ce": report.initial_loss,
        "final_ce": report.final_loss,
    })
    .to_string())
}

pub fn train_eval(args: TrainEvalArgs) -> Result<String, CliError> {
    let manifest = Manifest::read(&args.dataset)?;
    let hand = hand_from_manifest(&manifest)?;
    let mut model = GraspEvaluator::new(
        EvaluatorConfig::for_hand(hand.class_count(), hand_scale(&hand)),
        args.seed,
    );
    let mut dataset: Vec<EvalSample> = Vec::new();
    for scene in &manifest.scenes {
        for record in read_records(args.dataset.join(&scene.file))? {
            dataset.push(eval_sample_from_record(&args.dataset, &record, &model)?);
        }
    }
    if dataset.is_empty() {
        return Err(CliError::Failure("dataset has no records".into()));
    }
    let report = model.train(
        &dataset,
        &EvaluatorTrainConfig {
            epochs: args.epochs,
            batch_size: args.batch,
            lr: args.lr,
            seed: args.seed,
            class_balanced: args.balanced,
            target_accuracy: args.target_accuracy,
            ..Default::default()
        },
    )?;
    model.save(&args.out)?;
    let accuracy = model.accuracy(&dataset);
    let recall = model.per_class_recall(&dataset);
    logging::info(&format!(
        "evaluator trained: loss {:.4} -> {:.4}, accuracy {:.3}",
        report.initial_loss, report.final_loss, accuracy
    ));
    Ok(json!({
        "command": "train-eval",
        "checkpoint": args.out.display().to_string(),
        "samples": dataset.len(),
        "steps": report.steps,
        "accuracy": accuracy,
        "per_class_recall": recall,
    })
    .to_string())
}

pub fn detect(args: DetectArgs) -> Result<String, CliError> {
    let manifest = Manifest::read(&args.dataset)?;
    let hand = hand_from_manifest(&manifest)?;
    let scene = manifest
        .scenes
        .iter()
        .find(|s| s.id == args.scene)
        .ok_or_else(|| CliError::Failure(format!("scene {} not in manifest", args.scene)))?;
    let records = read_records(args.dataset.join(&scene.file))?;
    let record = records
        .get(args.record)
        .ok_or_else(|| CliError::Failure(format!("record {} out of range", args.record)))?;

    let (map, _cloud) = map_from_record(&args.dataset, record, hand.class_count())?;
    let object_entry = &manifest.objects[record.library_id as usize];
    let mesh = graspforge_core::geometry::load_mesh(args.dataset.join(&object_entry.mesh))?;
    let index = SurfaceIndex::build(mesh);

    let result = detect_grasp(&map, &index, &hand)?;
    let q = result.pose.wrist.rotation.quaternion();
    Ok(json!({
        "command": "detect",
        "scene": args.scene,
        "record": args.record,
        "converged": result.converged,
        "energy": result.energy,
        "iterations": result.iterations,
        "pose": {
            "quaternion": [q.w, q.i, q.j, q.k],
            "translation": [
                result.pose.wrist.translation.x,
                result.pose.wrist.translation.y,
                result.pose.wrist.translation.z,
            ],
            "joints": result.pose.joints,
        },
        "per_finger_residual": result
            .per_finger
            .iter()
            .map(|f| if f.excluded { serde_json::Value::Null } else { json!(f.residual) })
            .collect::<Vec<_>>(),
    })
    .to_string())
}

pub fn gradcheck(args: GradcheckArgs) -> Result<String, CliError> {
    let mut stream = SeedStream::new(args.seed);
    let mut worst: f64 = 0.0;

    // CVAE on a 32-point toy cloud.
    let cvae = CoseCvae::new(CvaeConfig::toy(3), args.seed ^ 1);
    let o_mat = Mat::from_fn(32, 3, |_, _| stream.uniform_in(-1.0, 1.0));
    let targets = Mat::from_fn(32, 3, |i, j| if j == i % 3 { 1.0 } else { 0.0 });
    let noise = Mat::from_fn(1, cvae.cfg.latent_dim, |_, _| stream.gaussian());
    let weights = vec![1.0, 2.0, 1.5];
    let mut params = cvae.params().clone();
    let grads = cvae.grads_with_params(&params, &o_mat, &targets, &noise, &weights);
    let report = gradcheck_params(&mut params, &grads, 1e-4, |p| {
        cvae.loss_with_params(p, &o_mat, &targets, &noise, &weights)
    });
    logging::info(&format!(
        "cvae gradcheck: max rel error {:.3e} over {} params",
        report.max_rel_error, report.checked
    ));
    worst = worst.max(report.max_rel_error);
    let cvae_err = report.max_rel_error;

    // Evaluator on 32-point toy clouds.
    let evaluator = GraspEvaluator::new(EvaluatorConfig::toy(4), args.seed ^ 2);
    let batch: Vec<EvalSample> = (0..2)
        .map(|i| EvalSample {
            scene: Mat::from_fn(32, 3, |_, _| stream.uniform_in(-1.0, 1.0)),
            hand: {
                let mut h = Mat::zeros(32, 7);
                for r in 0..32 {
                    for c in 0..3 {
                        h.set(r, c, stream.uniform_in(-1.0, 1.0));
                    }
                    h.set(r, 3 + r % 4, 1.0);
                }
                h
            },
            label: (i % 3) as u8,
        })
        .collect();
    let mut params = evaluator.params().clone();
    let grads = evaluator.grads_with_params(&params, &batch);
    let report = gradcheck_params(&mut params, &grads, 1e-4, |p| {
        evaluator.loss_with_params(p, &batch)
    });
    logging::info(&format!(
        "evaluator gradcheck: max rel error {:.3e} over {} params",
        report.max_rel_error, report.checked
    ));
    worst = worst.max(report.max_rel_error);

    let summary = json!({
        "command": "gradcheck",
        "cvae_max_rel_error": cvae_err,
        "evaluator_max_rel_error": report.max_rel_error,
        "max_rel_error": worst,
        "pass": worst < 1e-4,
    })
    .to_string();
    if worst < 1e-4 {
        Ok(summary)
    } else {
        Err(CliError::Domain(summary))
    }
}

pub fn stats(args: StatsArgs) -> Result<String, CliError> {
    let manifest = Manifest::read(&args.dataset)?;
    let mut histogram = [0usize; 3];
    let mut per_scene = Vec::new();
    for scene in &manifest.scenes {
        let records = read_records(args.dataset.join(&scene.file))?;
        let mut scene_hist = [0usize; 3];
        for r in &records {
            histogram[r.class as usize] += 1;
            scene_hist[r.class as usize] += 1;
        }
        per_scene.push(json!({
            "scene": scene.id,
            "records": records.len(),
            "class_histogram": scene_hist,
        }));
    }
    if histogram != manifest.class_histogram {
        return Err(CliError::Failure(format!(
            "records histogram {:?} disagrees with manifest {:?}",
            histogram, manifest.class_histogram
        )));
    }
    let mut revalidated = serde_json::Value::Null;
    if args.revalidate {
        let checked = revalidate_dataset(&args.dataset)?;
        revalidated = json!(checked);
    }
    Ok(json!({
        "command": "stats",
        "dataset": args.dataset.display().to_string(),
        "records": manifest.record_total(),
        "map_points": MAP_POINTS,
        "class_histogram": histogram,
        "per_scene": per_scene,
        "revalidated_records": revalidated,
    })
    .to_string())
}
