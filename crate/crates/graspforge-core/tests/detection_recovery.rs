//! Synthesize-then-recover harness: sample a reachable grasp, build its
//! ground-truth contact semantic map, and check that detection recovers a
//! pose with near-zero contact energy.

use graspforge_core::contact::{contact_semantic_map, ContactSemanticMap, DEFAULT_TAU, MAP_POINTS};
use graspforge_core::detect::{detect_grasp, initial_wrist_pose, refine_from_pose, RefineConfig};
use graspforge_core::geometry::{primitives, sample_surface, RigidTransform, Vector3};
use graspforge_core::grasp_sampling::{sample_grasp_pose, ApproachParams, SampledGrasp};
use graspforge_core::hand::{five_finger_config, HandModel, HandPose};
use graspforge_core::scene::IndexedObject;

struct Harness {
    object: IndexedObject,
    cloud: graspforge_core::geometry::PointCloud,
    hand: HandModel,
}

fn sphere_harness() -> Harness {
    let mesh = primitives::uv_sphere(0.032, 32, 64);
    let cloud = sample_surface(&mesh, MAP_POINTS, 31).unwrap();
    Harness {
        object: IndexedObject::new("sphere", mesh).unwrap(),
        cloud,
        hand: HandModel::from_config(five_finger_config()).unwrap(),
    }
}

fn ground_truth_map(h: &Harness, grasp: &SampledGrasp) -> ContactSemanticMap {
    let hand_cloud = h.hand.surface_cloud(&grasp.pose).unwrap();
    contact_semantic_map(&hand_cloud, &h.cloud, DEFAULT_TAU).unwrap()
}

#[test]
fn recovery_rate_on_sphere() {
    let h = sphere_harness();
    let params = ApproachParams::default();
    let mut attempted = 0;
    let mut converged = 0;
    for seed in 0..25u64 {
        let grasp = sample_grasp_pose(&h.object, &h.hand, &params, seed).unwrap();
        if grasp.in_contact.iter().filter(|&&c| c).count() < 3 {
            continue;
        }
        let map = ground_truth_map(&h, &grasp);
        if map.present_finger_classes().len() < 3 {
            continue;
        }
        attempted += 1;
        let result = detect_grasp(&map, &h.object.index, &h.hand).unwrap();
        // Trace is nonincreasing over accepted steps, always.
        for w in result.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "trace increased: {:?}", w);
        }
        if result.converged {
            converged += 1;
            assert!(result.energy < 1e-3);
        }
    }
    assert!(attempted >= 15, "only {attempted} usable trials");
    let rate = converged as f64 / attempted as f64;
    assert!(rate >= 0.6, "recovery rate {rate} ({converged}/{attempted})");
}

#[test]
fn exact_pose_start_keeps_energy_low() {
    let h = sphere_harness();
    let params = ApproachParams::default();
    let grasp = (0..20u64)
        .map(|s| sample_grasp_pose(&h.object, &h.hand, &params, s).unwrap())
        .find(|g| g.in_contact.iter().filter(|&&c| c).count() >= 4)
        .expect("a 4-contact grasp in 20 seeds");
    let map = ground_truth_map(&h, &grasp);
    let contacting = map.present_finger_classes().len();

    let result = refine_from_pose(
        &map,
        &h.object.index,
        &h.hand,
        grasp.pose.clone(),
        &RefineConfig::default(),
    )
    .unwrap();
    // Starting at the generating pose, the initial energy is within
    // tau per contacting finger and the first accepted step cannot
    // increase it.
    assert!(
        result.trace[0] <= DEFAULT_TAU * contacting as f64,
        "initial energy {} vs {} fingers",
        result.trace[0],
        contacting
    );
    if result.trace.len() > 1 {
        assert!(result.trace[1] <= result.trace[0]);
    }
}

#[test]
fn kabsch_init_is_close_to_generator() {
    let h = sphere_harness();
    let params = ApproachParams::default();
    let mut checked = 0;
    for seed in 0..25u64 {
        let grasp = sample_grasp_pose(&h.object, &h.hand, &params, seed).unwrap();
        let map = ground_truth_map(&h, &grasp);
        if map.present_finger_classes().len() < 4 {
            continue;
        }
        checked += 1;
        let init = initial_wrist_pose(&map, &h.hand).unwrap();
        let rot_err = init.rotation_distance(&grasp.pose.wrist);
        let trans_err = init.translation_distance(&grasp.pose.wrist);
        assert!(
            rot_err < 15f64.to_radians() || trans_err < 0.02,
            "seed {seed}: rot {:.1} deg, trans {:.3} m",
            rot_err.to_degrees(),
            trans_err
        );
    }
    assert!(checked >= 10, "only {checked} trials had 4+ classes");
}

#[test]
fn detection_is_rigidly_equivariant() {
    let h = sphere_harness();
    let params = ApproachParams::default();
    let grasp = (0..20u64)
        .map(|s| sample_grasp_pose(&h.object, &h.hand, &params, s).unwrap())
        .find(|g| g.in_contact.iter().filter(|&&c| c).count() >= 4)
        .expect("a 4-contact grasp in 20 seeds");
    let map = ground_truth_map(&h, &grasp);

    let result = detect_grasp(&map, &h.object.index, &h.hand).unwrap();

    let g = RigidTransform::from_axis_angle(
        Vector3::new(0.2, 1.0, -0.4),
        0.7,
        Vector3::new(0.05, -0.02, 0.08),
    );
    let moved_mesh = h.object.mesh.transformed(&g);
    let moved_object = IndexedObject::new("sphere_moved", moved_mesh).unwrap();
    let moved_map = map.transformed(&g);
    let moved_result = detect_grasp(&moved_map, &moved_object.index, &h.hand).unwrap();

    let tips = h.hand.fingertips(&result.pose).unwrap();
    let moved_tips = h.hand.fingertips(&moved_result.pose).unwrap();
    for (tip, moved_tip) in tips.iter().zip(&moved_tips) {
        let expected = g.transform_point(tip);
        assert!(
            (expected - moved_tip).norm() < 1e-3,
            "fingertip equivariance error {}",
            (expected - moved_tip).norm()
        );
    }
}

#[test]
fn joint_limits_hold_at_every_refinement_output() {
    let h = sphere_harness();
    let params = ApproachParams::default();
    for seed in 0..10u64 {
        let grasp = sample_grasp_pose(&h.object, &h.hand, &params, seed).unwrap();
        let map = ground_truth_map(&h, &grasp);
        if map.present_finger_classes().len() < 3 {
            continue;
        }
        let result = detect_grasp(&map, &h.object.index, &h.hand).unwrap();
        result.pose.validate(&h.hand).unwrap();
        // Per-finger residuals never exceed the total energy.
        for fr in &result.per_finger {
            if !fr.excluded {
                assert!(fr.residual.abs() <= result.energy + 1e-9);
            }
        }
    }
}

#[test]
fn empty_fingers_are_flagged_excluded() {
    let h = sphere_harness();
    let params = ApproachParams::default();
    let grasp = sample_grasp_pose(&h.object, &h.hand, &params, 3).unwrap();
    let full = ground_truth_map(&h, &grasp);
    assert!(full.present_finger_classes().len() >= 4);
    // Erase finger 5's patch: a legitimate map where that finger simply has
    // no contacts.
    let classes: Vec<u16> = full
        .classes
        .iter()
        .map(|&c| if c == 5 { 0 } else { c })
        .collect();
    let map =
        ContactSemanticMap::from_classes(full.points.clone(), full.class_count, classes).unwrap();
    let result = detect_grasp(&map, &h.object.index, &h.hand).unwrap();
    let present = map.present_finger_classes();
    for fr in &result.per_finger {
        let has_class = present.contains(&(fr.finger as u16 + 1));
        assert_eq!(fr.excluded, !has_class, "finger {}", fr.finger);
    }
    assert!(result.per_finger[4].excluded);
}

#[test]
fn pose_after_recovery_actually_touches_labels() {
    // End to end: the recovered fingertips sit on their labeled patches.
    let h = sphere_harness();
    let params = ApproachParams::default();
    for seed in 0..30u64 {
        let grasp = sample_grasp_pose(&h.object, &h.hand, &params, seed).unwrap();
        let map = ground_truth_map(&h, &grasp);
        if map.present_finger_classes().len() < 4 {
            continue;
        }
        let result = detect_grasp(&map, &h.object.index, &h.hand).unwrap();
        if !result.converged {
            continue;
        }
        let tips = h.hand.fingertips(&result.pose).unwrap();
        for class in map.present_finger_classes() {
            let patch = map.class_points(class);
            let tip = tips[class as usize - 1];
            let dist = patch
                .iter()
                .map(|p| (p - tip).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(dist <= result.energy + 1e-9);
        }
        return;
    }
    panic!("no converged 4-class recovery in 30 seeds");
}
