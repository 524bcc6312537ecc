//! The end-to-end pipeline: N contact maps -> N detected candidates ->
//! scene-aware scoring -> the optimal grasp.
//!
//! Maps come from a trained CVAE checkpoint when given, otherwise from the
//! analytic candidate generator (ground-truth maps of sampled grasps).
//! Scoring is either the learned evaluator (argmax class 2, ranked by its
//! probability) or, with `--oracle`, the analytic rule: collision-free
//! first, then largest Q1.

use serde_json::json;

use graspforge_core::contact::{crop_cylinder, ContactSemanticMap};
use graspforge_core::detect::{detect_grasp, DetectionResult};
use graspforge_core::geometry::RigidTransform;
use graspforge_core::hand::HandPose;
use graspforge_core::quality::{fingertip_contacts, q1_epsilon_default};
use graspforge_core::rng::SeedStream;
use graspforge_core::scene::collision_score;
use graspforge_data::synth::{quantize_pose, synthesize_grasps_single};
use graspforge_learn::cvae::CoseCvae;
use graspforge_learn::evaluator::GraspEvaluator;

use crate::logging;
use crate::ops::{load_scene, parse_hand_spec, CliError};
use crate::PipelineArgs;

struct Candidate {
    map: ContactSemanticMap,
    detection: Option<DetectionResult>,
    /// Oracle scores, filled when ranked analytically.
    q1: Option<f64>,
    q2: Option<f64>,
    /// Evaluator probabilities, filled when ranked by the model.
    scores: Option<[f64; 3]>,
}

pub fn run(args: PipelineArgs) -> Result<String, CliError> {
    if args.n == 0 {
        return Err(CliError::Failure("--n must be >= 1".into()));
    }
    if !args.oracle && args.evaluator.is_none() {
        return Err(CliError::Failure(
            "scoring needs either --oracle or --evaluator <checkpoint>".into(),
        ));
    }

    let hand = parse_hand_spec(&args.hand).build()?;
    let loaded = load_scene(&args.scene)?;
    if args.object >= loaded.scene.objects.len() {
        return Err(CliError::Failure(format!(
            "scene has {} objects, --object {} out of range",
            loaded.scene.objects.len(),
            args.object
        )));
    }
    let target = &loaded.scene.objects[args.object];
    let object_cloud = &loaded.object_clouds[args.object];
    let object_pose = target.pose;

    let evaluator = match &args.evaluator {
        Some(path) => Some(GraspEvaluator::load(path)?),
        None => None,
    };
    if let Some(model) = &evaluator {
        if model.cfg.hand_class_count != hand.class_count() {
            return Err(CliError::Failure(format!(
                "evaluator was trained for {} hand classes, hand has {}",
                model.cfg.hand_class_count,
                hand.class_count()
            )));
        }
    }

    // Stage 1: N contact semantic maps in the object frame.
    let maps: Vec<ContactSemanticMap> = match &args.cvae {
        Some(path) => {
            let model = CoseCvae::load(path)?;
            if model.cfg.class_count != hand.class_count() {
                return Err(CliError::Failure(format!(
                    "cvae was trained for {} classes, hand wants {}",
                    model.cfg.class_count,
                    hand.class_count()
                )));
            }
            model
                .sample_contact_maps(object_cloud, args.n, args.seed)?
                .into_iter()
                .map(|s| s.map)
                .collect()
        }
        None => {
            logging::info("no --cvae checkpoint: maps from the analytic candidate generator");
            synthesize_grasps_single(
                &target.object,
                object_cloud,
                &hand,
                args.n,
                args.tau,
                args.mu,
                args.seed,
            )?
            .into_iter()
            .map(|c| c.omega)
            .collect()
        }
    };

    // Stage 2: detection per map (independent solves).
    let detections: Vec<Option<DetectionResult>> =
        graspforge_core::parallel::map_collect(&maps, |map| {
            detect_grasp(map, &target.object.index, &hand).ok()
        });

    // Stage 3: scoring.
    let mut candidates: Vec<Candidate> = maps
        .into_iter()
        .zip(detections)
        .map(|(map, detection)| Candidate {
            map,
            detection,
            q1: None,
            q2: None,
            scores: None,
        })
        .collect();

    let seed_stream = SeedStream::new(args.seed);
    for (i, cand) in candidates.iter_mut().enumerate() {
        let Some(det) = &cand.detection else { continue };
        // Quantize like the dataset does, so scores match record semantics.
        let (pose_q, _, _, _) = quantize_pose(&det.pose);
        let world_wrist = object_pose.compose(&pose_q.wrist);
        let world_pose = HandPose::new(world_wrist, pose_q.joints.clone());

        if let Some(model) = &evaluator {
            let crop = crop_cylinder(
                &loaded.scene.cloud,
                &world_wrist,
                args.crop_radius,
                args.crop_height,
            )?;
            let hand_cloud = hand.surface_cloud(&HandPose::new(
                RigidTransform::identity(),
                pose_q.joints.clone(),
            ))?;
            cand.scores = Some(model.score(&crop, &hand_cloud)?);
        }
        if args.oracle {
            let report = collision_score(&hand, &world_pose, &loaded.scene, args.object)?;
            let local_cloud = hand.surface_cloud(&pose_q)?;
            let contacts =
                fingertip_contacts(&local_cloud, object_cloud, args.tau, args.mu)?;
            let q1 = match contacts {
                None => 0.0,
                Some(set) => q1_epsilon_default(
                    &set,
                    target.object.mesh.bounding_radius().max(1e-6),
                    seed_stream.child(4000 + i as u64).next_u64(),
                )?,
            };
            cand.q1 = Some(q1);
            cand.q2 = Some(report.q2);
        }
    }

    // Selection: argmax over feasible candidates.
    let mut best: Option<(usize, f64)> = None;
    for (i, cand) in candidates.iter().enumerate() {
        if cand.detection.is_none() {
            continue;
        }
        let key = if args.oracle {
            let (q1, q2) = (cand.q1.unwrap_or(0.0), cand.q2.unwrap_or(1.0));
            if q2 > 0.0 {
                continue; // colliding candidates are never optimal
            }
            q1
        } else {
            let scores = cand.scores.expect("scored above");
            let argmax = scores
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            if argmax != 2 {
                continue; // keep only argmax-class-2 candidates
            }
            scores[2]
        };
        if best.map_or(true, |(_, k)| key > k) {
            best = Some((i, key));
        }
    }

    let candidate_json: Vec<serde_json::Value> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut entry = json!({
                "index": i,
                "classes_present": c.map.present_finger_classes().len(),
                "detected": c.detection.is_some(),
            });
            if let Some(det) = &c.detection {
                entry["converged"] = json!(det.converged);
                entry["energy"] = json!(det.energy);
                entry["iterations"] = json!(det.iterations);
            }
            if let Some(q1) = c.q1 {
                entry["q1"] = json!(q1);
            }
            if let Some(q2) = c.q2 {
                entry["q2"] = json!(q2);
            }
            if let Some(s) = c.scores {
                entry["scores"] = json!(s);
            }
            entry
        })
        .collect();

    let mode = if args.oracle { "oracle" } else { "evaluator" };
    match best {
        None => {
            let summary = json!({
                "command": "pipeline",
                "mode": mode,
                "scene": args.scene.display().to_string(),
                "object": args.object,
                "n": args.n,
                "no_feasible_grasp": true,
                "optimal": serde_json::Value::Null,
                "candidates": candidate_json,
            })
            .to_string();
            Err(CliError::Domain(summary))
        }
        Some((idx, key)) => {
            let det = candidates[idx].detection.as_ref().unwrap();
            let (pose_q, quat, trans, joints) = quantize_pose(&det.pose);
            let world = object_pose.compose(&pose_q.wrist);
            let wq = world.rotation.quaternion();
            Ok(json!({
                "command": "pipeline",
                "mode": mode,
                "scene": args.scene.display().to_string(),
                "object": args.object,
                "n": args.n,
                "no_feasible_grasp": false,
                "optimal": {
                    "candidate": idx,
                    "ranking_key": key,
                    "object_frame_pose": {
                        "quaternion": quat,
                        "translation": trans,
                        "joints": joints,
                    },
                    "world_wrist": {
                        "quaternion": [wq.w, wq.i, wq.j, wq.k],
                        "translation": [
                            world.translation.x,
                            world.translation.y,
                            world.translation.z
                        ],
                    },
                },
                "candidates": candidate_json,
            })
            .to_string())
        }
    }
}

