use super::config::HandConfig;
use super::*;
use crate::geometry::RigidTransform;
use crate::rng::SeedStream;
use nalgebra::Vector3;

fn five() -> HandModel {
    HandModel::from_config(five_finger_config()).unwrap()
}

fn four() -> HandModel {
    HandModel::from_config(four_finger_config()).unwrap()
}

#[test]
fn five_finger_layout_counts() {
    let hand = five();
    assert_eq!(hand.dof_count, 15);
    assert_eq!(hand.finger_count(), 5);
    assert_eq!(hand.class_count(), 6);
    let joint_count = (0..hand.link_count())
        .filter(|&i| hand.links[i].joint.is_some())
        .count();
    assert_eq!(joint_count, 20);
}

#[test]
fn four_finger_layout_counts() {
    let hand = four();
    assert_eq!(hand.dof_count, 16);
    assert_eq!(hand.finger_count(), 4);
    assert_eq!(hand.class_count(), 5);
}

#[test]
fn self_parent_link_is_invalid() {
    let mut cfg = five_finger_config();
    cfg.joints[1].parent = cfg.joints[1].child.clone();
    match HandModel::from_config(cfg) {
        Err(CoreError::InvalidConfig(msg)) => assert!(msg.contains("itself"), "{msg}"),
        other => panic!("expected InvalidConfig, got {other:?}"),
    }
}

#[test]
fn cycle_is_invalid() {
    let mut cfg = five_finger_config();
    // Reparent the palm onto a distal link: every finger chain now loops.
    cfg.links[0].parent = Some("f0_distal".into());
    assert!(HandModel::from_config(cfg).is_err());
}

#[test]
fn unknown_parent_is_invalid() {
    let mut cfg = five_finger_config();
    cfg.joints[0].parent = "nonexistent".into();
    assert!(HandModel::from_config(cfg).is_err());
}

#[test]
fn zero_pose_fk_accumulates_fixed_transforms() {
    let hand = five();
    let pose = HandPose::new(RigidTransform::identity(), vec![0.0; 15]);
    let fk = hand.forward_kinematics(&pose).unwrap();
    // At zero joints the knuckle of finger 0 sits at its base frame; the
    // proximal link is offset by the knuckle length along the local +z.
    let knuckle = fk[hand.link_id("f0_knuckle").unwrap()];
    let proximal = fk[hand.link_id("f0_proximal").unwrap()];
    assert!((knuckle.translation - Vector3::new(0.055, 0.0, 0.06)).norm() < 1e-12);
    let expected = knuckle.transform_point(&Point3::new(0.0, 0.0, 0.015));
    assert!((proximal.translation - expected.coords).norm() < 1e-12);
}

#[test]
fn wrist_motion_is_equivariant() {
    let hand = five();
    let joints = hand.mid_range_joints();
    let base = HandPose::new(RigidTransform::identity(), joints.clone());
    let g = RigidTransform::from_axis_angle(
        Vector3::new(0.3, -0.2, 0.9),
        0.8,
        Vector3::new(0.1, 0.05, -0.2),
    );
    let moved = HandPose::new(g, joints);
    let fk_base = hand.forward_kinematics(&base).unwrap();
    let fk_moved = hand.forward_kinematics(&moved).unwrap();
    for (a, b) in fk_base.iter().zip(&fk_moved) {
        let expect = g.compose(a);
        assert!(expect.rotation_distance(b) < 1e-12);
        assert!(expect.translation_distance(b) < 1e-12);
    }
}

#[test]
fn planar_chain_matches_closed_form() {
    // Finger 0 lies in the xz plane (azimuth 0, local +x pointing inward =
    // world -x). With spread = 0 and flexions (t1, t2, t2-coupled), the tip
    // position follows the planar 2D chain formula.
    let hand = five();
    let mut joints = vec![0.0; 15];
    let (t1, t2) = (0.3, 0.25);
    joints[1] = t1;
    joints[2] = t2;
    let pose = HandPose::new(RigidTransform::identity(), joints);
    let tip = hand.fingertips(&pose).unwrap()[0];

    let lengths = [0.04, 0.025, 0.027];
    let cums = [t1, t1 + t2, t1 + 2.0 * t2];
    let mut inward = 0.0; // displacement along local +x (world -x)
    let mut up = 0.015; // knuckle segment
    for (len, cum) in lengths.iter().zip(&cums) {
        inward += len * cum.sin();
        up += len * cum.cos();
    }
    let expected = Point3::new(0.055 - inward, 0.0, 0.06 + up);
    assert!((tip - expected).norm() < 1e-12, "tip {tip} vs {expected}");
}

#[test]
fn surface_cloud_labels_partition() {
    let hand = five();
    let pose = HandPose::new(RigidTransform::identity(), hand.mid_range_joints());
    let cloud = hand.surface_cloud(&pose).unwrap();
    let mut counts = vec![0usize; hand.class_count()];
    for &l in &cloud.labels {
        counts[l as usize] += 1;
    }
    assert_eq!(counts[0], 256, "palm samples");
    for f in 1..=5 {
        assert_eq!(counts[f], 4 * 64 + 1, "finger {f} samples + fingertip");
    }
}

#[test]
fn surface_cloud_is_rigid_under_wrist_motion() {
    let hand = four();
    let joints = hand.mid_range_joints();
    let g = RigidTransform::from_axis_angle(Vector3::y(), 0.6, Vector3::new(0.0, 0.3, 0.1));
    let a = hand
        .surface_cloud(&HandPose::new(RigidTransform::identity(), joints.clone()))
        .unwrap();
    let b = hand.surface_cloud(&HandPose::new(g, joints)).unwrap();
    assert_eq!(a.labels, b.labels);
    for (pa, pb) in a.points.iter().zip(&b.points) {
        assert!((g.transform_point(pa) - pb).norm() < 1e-12);
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    let hand = five();
    let mut stream = SeedStream::new(17);
    for _ in 0..20 {
        let joints: Vec<f64> = (0..15)
            .map(|k| stream.uniform_in(hand.dof_lo[k], hand.dof_hi[k]))
            .collect();
        let pose = HandPose::new(RigidTransform::identity(), joints.clone());
        let finger = &hand.fingers[stream.index(5)];
        let jac = hand
            .point_jacobian(&pose, finger.fingertip_link, &finger.fingertip_point)
            .unwrap();
        let h = 1e-6;
        for k in 0..15 {
            let mut plus = joints.clone();
            let mut minus = joints.clone();
            plus[k] += h;
            minus[k] -= h;
            let tp = hand
                .fingertips(&HandPose::new(RigidTransform::identity(), plus))
                .unwrap()[finger_index(&hand, finger)];
            let tm = hand
                .fingertips(&HandPose::new(RigidTransform::identity(), minus))
                .unwrap()[finger_index(&hand, finger)];
            let fd = (tp - tm) / (2.0 * h);
            for r in 0..3 {
                assert!(
                    (jac[(r, k)] - fd[r]).abs() < 1e-5,
                    "jac[{r},{k}] = {} vs fd {}",
                    jac[(r, k)],
                    fd[r]
                );
            }
        }
    }
}

fn finger_index(hand: &HandModel, finger: &Finger) -> usize {
    hand.fingers
        .iter()
        .position(|f| f.name == finger.name)
        .unwrap()
}

#[test]
fn jacobian_zero_for_non_ancestral_joints() {
    let hand = five();
    let pose = HandPose::new(RigidTransform::identity(), hand.mid_range_joints());
    let f0 = &hand.fingers[0];
    let jac = hand
        .point_jacobian(&pose, f0.fingertip_link, &f0.fingertip_point)
        .unwrap();
    // DOFs of fingers 1..4 cannot move finger 0's tip.
    for dof in 3..15 {
        for r in 0..3 {
            assert_eq!(jac[(r, dof)], 0.0);
        }
    }
}

#[test]
fn jacobian_zero_for_point_on_axis() {
    let hand = five();
    let pose = HandPose::new(RigidTransform::identity(), vec![0.0; 15]);
    // The mcp joint origin lies on the mcp axis; its column vanishes there.
    let proximal = hand.link_id("f0_proximal").unwrap();
    let jac = hand
        .point_jacobian(&pose, proximal, &Point3::origin())
        .unwrap();
    for r in 0..3 {
        assert!(jac[(r, 1)].abs() < 1e-14, "mcp column not zero");
    }
}

#[test]
fn ik_fixed_point_at_zero_residual() {
    let hand = five();
    let pose = HandPose::new(RigidTransform::identity(), hand.mid_range_joints());
    let targets = hand.fingertips(&pose).unwrap();
    let next = hand.dls_ik_step(&pose, &targets, 0.1).unwrap();
    for (a, b) in pose.joints.iter().zip(&next.joints) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn ik_step_reduces_reachable_error() {
    let hand = five();
    let pose = HandPose::new(RigidTransform::identity(), hand.mid_range_joints());
    let tips = hand.fingertips(&pose).unwrap();
    // 1 mm inward targets.
    let targets: Vec<Point3<f64>> = tips
        .iter()
        .map(|t| {
            let dir = Vector3::new(-t.x, -t.y, 0.0).normalize();
            t + dir * 1e-3
        })
        .collect();
    let err = |p: &HandPose| -> f64 {
        hand.fingertips(p)
            .unwrap()
            .iter()
            .zip(&targets)
            .map(|(tip, tgt)| (tip - tgt).norm())
            .sum()
    };
    let before = err(&pose);
    let after = err(&hand.dls_ik_step(&pose, &targets, 0.05).unwrap());
    assert!(after < before, "{after} !< {before}");
}

#[test]
fn ik_step_is_bounded_by_damping() {
    let hand = five();
    let pose = HandPose::new(RigidTransform::identity(), hand.mid_range_joints());
    // Unreachable target a meter away.
    let targets: Vec<Point3<f64>> = (0..5).map(|_| Point3::new(0.0, 0.0, 1.0)).collect();
    let lambda = 0.5;
    let fk_pose = pose.clone();
    let mut jtr_norm_sq = 0.0;
    for (fi, f) in hand.fingers.iter().enumerate() {
        let jac = hand
            .point_jacobian(&fk_pose, f.fingertip_link, &f.fingertip_point)
            .unwrap();
        let tip = hand.fingertips(&fk_pose).unwrap()[fi];
        let r = targets[fi] - tip;
        let jtr = jac.transpose() * r;
        jtr_norm_sq += jtr.norm_squared();
    }
    // Computed against unclamped delta: reconstruct by disabling limits.
    let next = hand.dls_ik_step(&pose, &targets, lambda).unwrap();
    let delta_norm: f64 = next
        .joints
        .iter()
        .zip(&pose.joints)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    assert!(delta_norm <= jtr_norm_sq.sqrt() / (lambda * lambda) + 1e-12);
}

#[test]
fn ik_never_violates_limits() {
    let hand = four();
    let mut stream = SeedStream::new(5);
    let mut pose = HandPose::new(RigidTransform::identity(), hand.mid_range_joints());
    for _ in 0..50 {
        let targets: Vec<Point3<f64>> = (0..4)
            .map(|_| {
                Point3::new(
                    stream.uniform_in(-0.2, 0.2),
                    stream.uniform_in(-0.2, 0.2),
                    stream.uniform_in(0.0, 0.25),
                )
            })
            .collect();
        pose = hand.dls_ik_step(&pose, &targets, 0.05).unwrap();
        pose.validate(&hand).unwrap();
    }
}

#[test]
fn coupled_joint_tracks_driver() {
    let hand = five();
    let mut joints = vec![0.0; 15];
    joints[2] = 0.4; // f0 pip DOF
    let pose = HandPose::new(RigidTransform::identity(), joints);
    let fk = hand.forward_kinematics(&pose).unwrap();
    let medial = fk[hand.link_id("f0_medial").unwrap()];
    let distal = fk[hand.link_id("f0_distal").unwrap()];
    // The distal joint must have rotated by exactly the same angle.
    let rel = medial.inverse().compose(&distal);
    let angle = rel.rotation.angle();
    assert!((angle - 0.4).abs() < 1e-12, "distal angle {angle}");
}

#[test]
fn config_json_roundtrip() {
    let cfg = five_finger_config();
    let json = serde_json::to_string_pretty(&cfg).unwrap();
    let back: HandConfig = serde_json::from_str(&json).unwrap();
    assert_eq!(cfg, back);
}

fn asset_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("assets/hands")
        .join(name)
}

/// Regenerates the bundled hand config files from the in-code builders.
/// Run with `cargo test -p graspforge-core regen_hand_assets -- --ignored`
/// after changing the builders.
#[test]
#[ignore]
fn regen_hand_assets() {
    for (file, cfg) in [
        ("five_finger.json", five_finger_config()),
        ("four_finger.json", four_finger_config()),
    ] {
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        std::fs::write(asset_path(file), json + "\n").unwrap();
    }
}

#[test]
fn bundled_assets_match_builders() {
    for (file, cfg) in [
        ("five_finger.json", five_finger_config()),
        ("four_finger.json", four_finger_config()),
    ] {
        let text = std::fs::read_to_string(asset_path(file)).unwrap();
        let parsed: HandConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed, cfg, "{file} is stale; run regen_hand_assets");
    }
}

#[test]
fn load_hand_config_reads_bundled_files() {
    let hand = load_hand_config(asset_path("five_finger.json")).unwrap();
    assert_eq!(hand.dof_count, 15);
    assert_eq!(hand.finger_count(), 5);
    let hand4 = load_hand_config(asset_path("four_finger.json")).unwrap();
    assert_eq!(hand4.dof_count, 16);
    assert_eq!(hand4.class_count(), 5);
}

#[test]
fn wrong_joint_vector_length_is_dimension_mismatch() {
    let hand = five();
    let pose = HandPose::new(RigidTransform::identity(), vec![0.0; 7]);
    assert!(matches!(
        hand.forward_kinematics(&pose),
        Err(CoreError::DimensionMismatch { .. })
    ));
}
