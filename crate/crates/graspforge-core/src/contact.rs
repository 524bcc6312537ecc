//! Hand-object contact maps.
//!
//! A contact semantic map classifies a fixed-size object point cloud into
//! "no contact" (class 0) or "contacted by finger k" (classes 1..=n). Labels
//! come from projecting hand surface points onto the object along the
//! object normals: for hand point `v` and object point `o` with outward
//! normal `n_o`, the signed candidate distance is
//! `s = sign((v - o) . n_o) * |v - o|`; the minimum-|s| candidate defines
//! the aligned distance and the projection `p = v - s * n_o`. Object points
//! within `tau` of a projection inherit that finger's label, nearest
//! projection winning conflicts.

use nalgebra::Point3;

use crate::error::CoreError;
use crate::geometry::{KdTree, PointCloud, RigidTransform};
use crate::hand::HandSurfaceCloud;
use crate::parallel;

/// Fixed cardinality of object clouds carrying contact maps.
pub const MAP_POINTS: usize = 2048;
/// Default contact threshold tau (meters).
pub const DEFAULT_TAU: f64 = 0.005;

/// Per-point finger-contact classification of an object cloud.
///
/// Rows are probability distributions over `class_count` classes; maps
/// produced by ground-truth labeling are one-hot and stored as class
/// indices. Soft rows (from learned models) are hardened by argmax before
/// entering detection.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactSemanticMap {
    pub points: Vec<Point3<f64>>,
    pub class_count: usize,
    pub classes: Vec<u16>,
}

impl ContactSemanticMap {
    pub fn from_classes(
        points: Vec<Point3<f64>>,
        class_count: usize,
        classes: Vec<u16>,
    ) -> Result<Self, CoreError> {
        if points.len() != MAP_POINTS {
            return Err(CoreError::DimensionMismatch {
                expected: MAP_POINTS,
                got: points.len(),
                context: "contact map points".into(),
            });
        }
        if classes.len() != points.len() {
            return Err(CoreError::DimensionMismatch {
                expected: points.len(),
                got: classes.len(),
                context: "contact map classes".into(),
            });
        }
        if let Some(&bad) = classes.iter().find(|&&c| c as usize >= class_count) {
            return Err(CoreError::InvalidArgument(format!(
                "class {bad} out of range (class_count {class_count})"
            )));
        }
        Ok(ContactSemanticMap {
            points,
            class_count,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// One-hot probability row for point `i`.
    pub fn row(&self, i: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.class_count];
        row[self.classes[i] as usize] = 1.0;
        row
    }

    /// Distinct finger classes (label >= 1) present in the map.
    pub fn present_finger_classes(&self) -> Vec<u16> {
        let mut seen = vec![false; self.class_count];
        for &c in &self.classes {
            seen[c as usize] = true;
        }
        (1..self.class_count as u16)
            .filter(|&c| seen[c as usize])
            .collect()
    }

    /// Points labeled with finger class `k`.
    pub fn class_points(&self, k: u16) -> Vec<Point3<f64>> {
        self.points
            .iter()
            .zip(&self.classes)
            .filter(|(_, &c)| c == k)
            .map(|(p, _)| *p)
            .collect()
    }

    pub fn transformed(&self, t: &RigidTransform) -> ContactSemanticMap {
        ContactSemanticMap {
            points: self.points.iter().map(|p| t.transform_point(p)).collect(),
            class_count: self.class_count,
            classes: self.classes.clone(),
        }
    }
}

/// Per object point, distance to the nearest hand surface point.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactDistanceMap {
    pub points: Vec<Point3<f64>>,
    pub distances: Vec<f64>,
}

/// Aligned-distance result for one hand point.
#[derive(Debug, Clone, Copy)]
pub struct AlignedPoint {
    /// Index of the minimum-|s| object point.
    pub object_index: usize,
    /// Signed aligned distance (epsilon_min).
    pub aligned_distance: f64,
    /// Projection `v - epsilon_min * n_o` onto the object surface.
    pub projection: Point3<f64>,
}

/// Aligned nearest points for every hand point against an object cloud with
/// normals. Because `|s(v, o)| = |v - o|`, the minimum-|s| candidate is the
/// Euclidean nearest neighbor; the sign falls out of the normal test.
pub fn aligned_nearest_points(
    hand_cloud: &HandSurfaceCloud,
    object_cloud: &PointCloud,
) -> Result<Vec<AlignedPoint>, CoreError> {
    let normals = object_cloud.normals.as_ref().ok_or_else(|| {
        CoreError::Precondition("object cloud must carry normals".into())
    })?;
    let tree = KdTree::build(object_cloud.points.clone());
    Ok(parallel::map_collect(&hand_cloud.points, |v| {
        let (idx, dist) = tree.nearest(v).expect("object cloud not empty");
        let n_o = normals[idx];
        let sign = if (v - object_cloud.points[idx]).dot(&n_o) >= 0.0 {
            1.0
        } else {
            -1.0
        };
        let eps = sign * dist;
        AlignedPoint {
            object_index: idx,
            aligned_distance: eps,
            projection: v - n_o * eps,
        }
    }))
}

/// Ground-truth contact semantic map (one-hot, 2048 rows).
///
/// Object points within `tau` of a finger point's projection take that
/// finger's class; conflicts resolve to the hand point with the smallest
/// |aligned distance|, ties to the lower finger class. Palm points (label
/// 0) do not label anything.
pub fn contact_semantic_map(
    hand_cloud: &HandSurfaceCloud,
    object_cloud: &PointCloud,
    tau: f64,
) -> Result<ContactSemanticMap, CoreError> {
    if object_cloud.len() != MAP_POINTS {
        return Err(CoreError::DimensionMismatch {
            expected: MAP_POINTS,
            got: object_cloud.len(),
            context: "object cloud for contact map".into(),
        });
    }
    let aligned = aligned_nearest_points(hand_cloud, object_cloud)?;
    let class_count = hand_cloud.labels.iter().copied().max().unwrap_or(0) as usize + 1;

    let tree = KdTree::build(object_cloud.points.clone());
    // (best |eps|, class) per object point.
    let mut best: Vec<(f64, u16)> = vec![(f64::INFINITY, 0); object_cloud.len()];
    for (hand_idx, ap) in aligned.iter().enumerate() {
        let label = hand_cloud.labels[hand_idx];
        if label == 0 {
            continue;
        }
        let eps_abs = ap.aligned_distance.abs();
        for obj_idx in tree.within_radius(&ap.projection, tau) {
            let dist = (object_cloud.points[obj_idx] - ap.projection).norm();
            if dist < tau {
                let cand = (eps_abs, label as u16);
                // Smallest |eps| wins; exact ties go to the lower class.
                if cand < best[obj_idx] {
                    best[obj_idx] = cand;
                }
            }
        }
    }
    let classes: Vec<u16> = best
        .iter()
        .map(|&(d, c)| if d.is_finite() { c } else { 0 })
        .collect();
    ContactSemanticMap::from_classes(object_cloud.points.clone(), class_count, classes)
}

/// Contact distance map: per object point, the minimum Euclidean distance
/// to any hand surface point.
pub fn contact_distance_map(
    hand_cloud: &HandSurfaceCloud,
    object_cloud: &PointCloud,
) -> Result<ContactDistanceMap, CoreError> {
    if object_cloud.len() != MAP_POINTS {
        return Err(CoreError::DimensionMismatch {
            expected: MAP_POINTS,
            got: object_cloud.len(),
            context: "object cloud for distance map".into(),
        });
    }
    if hand_cloud.is_empty() {
        return Err(CoreError::EmptyInput("hand cloud".into()));
    }
    let tree = KdTree::build(hand_cloud.points.clone());
    let distances = parallel::map_collect(&object_cloud.points, |p| {
        tree.nearest(p).expect("hand cloud not empty").1
    });
    Ok(ContactDistanceMap {
        points: object_cloud.points.clone(),
        distances,
    })
}

/// Keep scene points inside the cylinder `x^2 + y^2 <= r^2, 0 <= z <= h`
/// fixed in the hand frame (z = approach axis, origin at the wrist).
///
/// The returned cloud is expressed in the hand frame; normals and labels
/// are carried along (normals rotated). May be empty.
pub fn crop_cylinder(
    scene_cloud: &PointCloud,
    hand_frame: &RigidTransform,
    r: f64,
    h: f64,
) -> Result<PointCloud, CoreError> {
    if r <= 0.0 || h <= 0.0 {
        return Err(CoreError::InvalidArgument(
            "crop cylinder needs r > 0 and h > 0".into(),
        ));
    }
    let to_hand = hand_frame.inverse();
    let mut points = Vec::new();
    let mut normals = scene_cloud.normals.as_ref().map(|_| Vec::new());
    let mut labels = scene_cloud.labels.as_ref().map(|_| Vec::new());
    for (i, p) in scene_cloud.points.iter().enumerate() {
        let q = to_hand.transform_point(p);
        if q.x * q.x + q.y * q.y <= r * r && q.z >= 0.0 && q.z <= h {
            points.push(q);
            if let (Some(out), Some(ns)) = (normals.as_mut(), scene_cloud.normals.as_ref()) {
                out.push(to_hand.transform_vector(&ns[i]));
            }
            if let (Some(out), Some(ls)) = (labels.as_mut(), scene_cloud.labels.as_ref()) {
                out.push(ls[i]);
            }
        }
    }
    Ok(PointCloud {
        points,
        normals,
        labels,
    })
}

/// Convenience wrapper: world-frame hand cloud mapped into the object frame.
pub fn hand_cloud_in_object_frame(
    hand_cloud: &HandSurfaceCloud,
    object_pose: &RigidTransform,
) -> HandSurfaceCloud {
    hand_cloud.transformed(&object_pose.inverse())
}
