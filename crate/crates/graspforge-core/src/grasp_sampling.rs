//! Approach-axis grasp candidate sampling.
//!
//! A candidate is generated by picking a random surface point, approaching
//! the object along the inward normal with the hand's grasp center aimed at
//! the object centroid, rolling the hand randomly about the approach axis,
//! and closing the fingers with damped least-squares IK steps toward each
//! fingertip's nearest surface point until the fingertip's |SDF| drops
//! below the contact tolerance or the joints stall.

use nalgebra::{Point3, Vector3};

use crate::detect::frame_with_z_axis;
use crate::error::CoreError;
use crate::hand::{HandModel, HandPose};
use crate::rng::SeedStream;
use crate::scene::IndexedObject;

#[derive(Debug, Clone)]
pub struct ApproachParams {
    /// Uniform jitter applied along the approach axis (meters).
    pub standoff_jitter: f64,
    /// Uniform lateral jitter perpendicular to the approach axis (meters).
    pub lateral_jitter: f64,
    /// Uniform jitter on each spread DOF when the hand exposes one per
    /// finger (radians), applied to the open pose.
    pub spread_jitter: f64,
    /// Maximum IK closing steps.
    pub close_iterations: usize,
    /// DLS damping during closing.
    pub damping: f64,
    /// A finger freezes once |SDF(fingertip)| falls below this (meters).
    pub contact_tolerance: f64,
}

impl Default for ApproachParams {
    fn default() -> Self {
        ApproachParams {
            standoff_jitter: 0.008,
            lateral_jitter: 0.005,
            spread_jitter: 0.1,
            close_iterations: 80,
            damping: 0.08,
            contact_tolerance: 0.0025,
        }
    }
}

/// A sampled grasp candidate in the object frame.
#[derive(Debug, Clone)]
pub struct SampledGrasp {
    pub pose: HandPose,
    /// Per finger: reached contact (|SDF| below tolerance) during closing.
    pub in_contact: Vec<bool>,
}

/// Sample one candidate. Deterministic given `seed`; the object is treated
/// as sitting at the origin of its own frame.
pub fn sample_grasp_pose(
    object: &IndexedObject,
    hand: &HandModel,
    params: &ApproachParams,
    seed: u64,
) -> Result<SampledGrasp, CoreError> {
    let mut stream = SeedStream::new(seed);

    // Approach direction from a random surface point's outward normal.
    let probe = crate::geometry::sample_surface(&object.mesh, 1, stream.next_u64())?;
    let normal = probe.normals.as_ref().unwrap()[0];
    let approach = -normal; // hand +z moves into the surface

    let centroid = object.mesh.centroid();
    let grasp_center = hand.grasp_center();
    let standoff = grasp_center.z + stream.uniform_in(-params.standoff_jitter, params.standoff_jitter);

    let frame = frame_with_z_axis(approach, centroid);
    let lateral = Vector3::new(
        stream.uniform_in(-params.lateral_jitter, params.lateral_jitter),
        stream.uniform_in(-params.lateral_jitter, params.lateral_jitter),
        0.0,
    );
    let roll = stream.uniform_in(0.0, std::f64::consts::TAU);
    // Wrist = (aim frame at centroid) pulled back along the approach, with
    // roll about the approach axis and a little lateral offset.
    let pullback = crate::geometry::RigidTransform::translation_only(
        lateral - Vector3::new(0.0, 0.0, standoff),
    );
    let roll_t = crate::geometry::RigidTransform::from_axis_angle(
        Vector3::z(),
        roll,
        Vector3::zeros(),
    );
    let wrist = frame.compose(&roll_t).compose(&pullback);

    // Open posture with a bit of spread jitter.
    let mut joints = hand.open_joints();
    for k in 0..hand.dof_count {
        // A DOF is spread-like when its range is symmetric about zero.
        if (hand.dof_lo[k] + hand.dof_hi[k]).abs() < 1e-12 && hand.dof_hi[k] > 0.0 {
            joints[k] +=
                stream.uniform_in(-params.spread_jitter, params.spread_jitter);
        }
    }
    hand.clamp_joints(&mut joints);
    let mut pose = HandPose::new(wrist, joints);

    // IK closing: every unfrozen fingertip chases its nearest surface point.
    let n = hand.finger_count();
    let mut frozen = vec![false; n];
    for _ in 0..params.close_iterations {
        let tips = hand.fingertips(&pose)?;
        let mut targets: Vec<Option<Point3<f64>>> = Vec::with_capacity(n);
        let mut all_frozen = true;
        for (k, tip) in tips.iter().enumerate() {
            if frozen[k] {
                targets.push(None);
                continue;
            }
            let sdf = object.index.signed_distance_value(tip) ;
            if sdf.abs() <= params.contact_tolerance {
                frozen[k] = true;
                targets.push(None);
                continue;
            }
            all_frozen = false;
            targets.push(Some(object.index.nearest_surface_point(tip).point));
        }
        if all_frozen {
            break;
        }
        let next = hand.dls_ik_step_masked(&pose, &targets, params.damping)?;
        let max_delta = next
            .joints
            .iter()
            .zip(&pose.joints)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        pose = next;
        if max_delta < 1e-7 {
            break;
        }
    }

    // Final contact flags from the finished pose.
    let tips = hand.fingertips(&pose)?;
    let in_contact = tips
        .iter()
        .map(|tip| object.index.signed_distance_value(tip).abs() <= params.contact_tolerance)
        .collect();

    Ok(SampledGrasp { pose, in_contact })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;
    use crate::hand::five_finger_config;

    #[test]
    fn sphere_candidates_mostly_touch() {
        let object =
            IndexedObject::new("sphere", primitives::uv_sphere(0.032, 32, 64)).unwrap();
        let hand = HandModel::from_config(five_finger_config()).unwrap();
        let params = ApproachParams::default();
        let mut contact_fingers = 0usize;
        let trials = 20;
        for seed in 0..trials {
            let grasp = sample_grasp_pose(&object, &hand, &params, seed).unwrap();
            grasp.pose.validate(&hand).unwrap();
            contact_fingers += grasp.in_contact.iter().filter(|&&c| c).count();
        }
        let mean = contact_fingers as f64 / trials as f64;
        assert!(mean >= 3.0, "mean contacting fingers {mean}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let object = IndexedObject::new(
            "box",
            primitives::box_mesh(Vector3::new(0.022, 0.018, 0.025)),
        )
        .unwrap();
        let hand = HandModel::from_config(five_finger_config()).unwrap();
        let params = ApproachParams::default();
        let a = sample_grasp_pose(&object, &hand, &params, 9).unwrap();
        let b = sample_grasp_pose(&object, &hand, &params, 9).unwrap();
        assert_eq!(a.pose, b.pose);
        assert_eq!(a.in_contact, b.in_contact);
    }
}
