//! Input standardization: fixed point budgets and unit scaling.
//!
//! Clouds are brought to a fixed cardinality with order-independent
//! farthest point sampling (content-derived start) and, for deficits,
//! cyclic repetition in lexicographic order — both choices keep the result
//! a pure function of the point *set*, so encoder outputs are permutation
//! invariant.

use graspforge_core::contact::ContactSemanticMap;
use graspforge_core::geometry::{farthest_point_sample_stable, PointCloud};
use graspforge_core::hand::HandSurfaceCloud;

use crate::error::LearnError;
use crate::mat::Mat;

/// Fixed point budget for evaluator inputs.
pub const EVALUATOR_POINTS: usize = 512;

fn lex_order(points: &[graspforge_core::geometry::Point3]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        let (p, q) = (&points[a], &points[b]);
        p.x.partial_cmp(&q.x)
            .unwrap()
            .then(p.y.partial_cmp(&q.y).unwrap())
            .then(p.z.partial_cmp(&q.z).unwrap())
    });
    idx
}

/// Standardize a cloud to exactly `budget` rows of `x y z / scale`.
/// Surplus points are reduced by stable FPS; deficits repeat points
/// cyclically in lexicographic order. Empty clouds become all-zero rows
/// (the free-space sentinel).
pub fn standardize_points(
    cloud: &PointCloud,
    budget: usize,
    scale: f64,
) -> Result<Mat, LearnError> {
    if scale <= 0.0 {
        return Err(LearnError::Precondition("scale must be positive".into()));
    }
    if cloud.is_empty() {
        return Ok(Mat::zeros(budget, 3));
    }
    let mut out = Mat::zeros(budget, 3);
    if cloud.len() >= budget {
        let reduced = farthest_point_sample_stable(cloud, budget)?;
        for (i, p) in reduced.points.iter().enumerate() {
            out.set(i, 0, p.x / scale);
            out.set(i, 1, p.y / scale);
            out.set(i, 2, p.z / scale);
        }
    } else {
        let order = lex_order(&cloud.points);
        for i in 0..budget {
            let p = &cloud.points[order[i % order.len()]];
            out.set(i, 0, p.x / scale);
            out.set(i, 1, p.y / scale);
            out.set(i, 2, p.z / scale);
        }
    }
    Ok(out)
}

/// Standardize a labeled hand cloud to `budget` rows of
/// `[x y z / scale | one-hot(label, class_count)]`.
pub fn standardize_hand_cloud(
    hand: &HandSurfaceCloud,
    class_count: usize,
    budget: usize,
    scale: f64,
) -> Result<Mat, LearnError> {
    if hand.is_empty() {
        return Err(LearnError::Precondition("hand cloud is empty".into()));
    }
    if scale <= 0.0 {
        return Err(LearnError::Precondition("scale must be positive".into()));
    }
    let n = hand.len();
    let cols = 3 + class_count;
    let mut out = Mat::zeros(budget, cols);

    let write_row = |out: &mut Mat, row: usize, src: usize| {
        let p = &hand.points[src];
        out.set(row, 0, p.x / scale);
        out.set(row, 1, p.y / scale);
        out.set(row, 2, p.z / scale);
        let label = hand.labels[src] as usize;
        debug_assert!(label < class_count);
        out.set(row, 3 + label, 1.0);
    };

    if n >= budget {
        // Stable FPS over the points, labels carried by index.
        let as_cloud = PointCloud {
            points: hand.points.clone(),
            normals: None,
            labels: Some(hand.labels.clone()),
        };
        let reduced = farthest_point_sample_stable(&as_cloud, budget)?;
        let labels = reduced.labels.as_ref().unwrap();
        for i in 0..budget {
            let p = &reduced.points[i];
            out.set(i, 0, p.x / scale);
            out.set(i, 1, p.y / scale);
            out.set(i, 2, p.z / scale);
            out.set(i, 3 + labels[i] as usize, 1.0);
        }
    } else {
        let order = lex_order(&hand.points);
        for i in 0..budget {
            write_row(&mut out, i, order[i % order.len()]);
        }
    }
    Ok(out)
}

/// Center an object cloud at its centroid and scale by its bounding
/// radius; returns the matrix plus `(center, scale)` for traceability.
pub fn standardize_object_cloud(
    cloud: &PointCloud,
) -> Result<(Mat, graspforge_core::geometry::Point3, f64), LearnError> {
    if cloud.is_empty() {
        return Err(LearnError::Precondition("object cloud is empty".into()));
    }
    let center = cloud.centroid();
    let scale = cloud.bounding_radius().max(1e-6);
    let mut out = Mat::zeros(cloud.len(), 3);
    for (i, p) in cloud.points.iter().enumerate() {
        out.set(i, 0, (p.x - center.x) / scale);
        out.set(i, 1, (p.y - center.y) / scale);
        out.set(i, 2, (p.z - center.z) / scale);
    }
    Ok((out, center, scale))
}

/// One-hot target matrix from a contact semantic map.
pub fn one_hot_targets(map: &ContactSemanticMap) -> Mat {
    let mut t = Mat::zeros(map.len(), map.class_count);
    for (i, &c) in map.classes.iter().enumerate() {
        t.set(i, c as usize, 1.0);
    }
    t
}

/// Canonical length scale of a hand: the bounding radius of its surface
/// cloud at mid-range joints with identity wrist.
pub fn hand_scale(hand: &graspforge_core::hand::HandModel) -> f64 {
    let pose = graspforge_core::hand::HandPose::new(
        graspforge_core::geometry::RigidTransform::identity(),
        hand.mid_range_joints(),
    );
    let cloud = hand.surface_cloud(&pose).expect("mid-range pose is valid");
    let as_points = PointCloud::from_points(cloud.points);
    as_points.bounding_radius().max(1e-6)
}

#[cfg(test)]
mod tests {
    use super::*;
    use graspforge_core::geometry::Point3;
    use graspforge_core::rng::SeedStream;

    fn random_cloud(n: usize, seed: u64) -> PointCloud {
        let mut s = SeedStream::new(seed);
        PointCloud::from_points(
            (0..n)
                .map(|_| {
                    Point3::new(
                        s.uniform_in(-1.0, 1.0),
                        s.uniform_in(-1.0, 1.0),
                        s.uniform_in(-1.0, 1.0),
                    )
                })
                .collect(),
        )
    }

    #[test]
    fn standardize_is_permutation_invariant() {
        let cloud = random_cloud(700, 3);
        let reversed = PointCloud::from_points(cloud.points.iter().rev().copied().collect());
        let a = standardize_points(&cloud, 128, 1.0).unwrap();
        let b = standardize_points(&reversed, 128, 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn deficit_pads_by_repetition() {
        let cloud = random_cloud(5, 9);
        let m = standardize_points(&cloud, 12, 1.0).unwrap();
        assert_eq!(m.rows, 12);
        // Row 0 repeats at row 5 and row 10.
        assert_eq!(m.row(0), m.row(5));
        assert_eq!(m.row(0), m.row(10));
    }

    #[test]
    fn empty_cloud_is_zero_sentinel() {
        let m = standardize_points(&PointCloud::from_points(vec![]), 8, 1.0).unwrap();
        assert!(m.data.iter().all(|&x| x == 0.0));
    }
}
