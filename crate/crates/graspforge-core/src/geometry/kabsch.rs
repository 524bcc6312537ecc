use nalgebra::{Matrix3, Point3, Vector3, SVD};

use crate::error::CoreError;
use crate::geometry::RigidTransform;

/// Weighted least-squares rigid alignment: finds the proper rigid transform
/// `T` minimizing `sum_i w_i | T(source_i) - target_i |^2`.
///
/// Requires at least 3 non-collinear correspondences with positive total
/// weight. `det(R) = +1` is enforced by flipping the smallest singular
/// direction when the covariance is reflective.
pub fn kabsch_align(
    source: &[Point3<f64>],
    target: &[Point3<f64>],
    weights: &[f64],
) -> Result<RigidTransform, CoreError> {
    if source.len() != target.len() || source.len() != weights.len() {
        return Err(CoreError::DimensionMismatch {
            expected: source.len(),
            got: target.len().min(weights.len()),
            context: "correspondence lists".into(),
        });
    }
    if source.len() < 3 {
        return Err(CoreError::DegenerateCorrespondence(format!(
            "need >= 3 correspondences, have {}",
            source.len()
        )));
    }
    if weights.iter().any(|&w| w < 0.0) {
        return Err(CoreError::InvalidArgument("negative weight".into()));
    }
    let total_w: f64 = weights.iter().sum();
    if total_w <= 0.0 {
        return Err(CoreError::DegenerateCorrespondence(
            "total weight is zero".into(),
        ));
    }

    let mut c_src = Vector3::zeros();
    let mut c_tgt = Vector3::zeros();
    for i in 0..source.len() {
        c_src += source[i].coords * weights[i];
        c_tgt += target[i].coords * weights[i];
    }
    c_src /= total_w;
    c_tgt /= total_w;

    let mut h = Matrix3::zeros();
    for i in 0..source.len() {
        let s = source[i].coords - c_src;
        let t = target[i].coords - c_tgt;
        h += (s * t.transpose()) * weights[i];
    }

    let svd = SVD::new(h, true, true);
    let u = svd.u.ok_or_else(|| {
        CoreError::DegenerateCorrespondence("SVD failed on covariance".into())
    })?;
    let v_t = svd.v_t.ok_or_else(|| {
        CoreError::DegenerateCorrespondence("SVD failed on covariance".into())
    })?;

    // Collinear (or coincident) correspondences leave the rotation about the
    // point axis unconstrained: the covariance drops below rank 2.
    let sv = svd.singular_values;
    if sv[1] <= 1e-12 * sv[0].max(1e-300) {
        return Err(CoreError::DegenerateCorrespondence(
            "correspondences are collinear or coincident".into(),
        ));
    }

    let d = (u * v_t).determinant().signum();
    let mut s = Matrix3::identity();
    s[(2, 2)] = d;
    // R maps source deviations onto target deviations: R = V S U^T.
    let r = v_t.transpose() * s * u.transpose();

    let translation = c_tgt - r * c_src;
    RigidTransform::from_matrix(r, translation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;
    use std::f64::consts::FRAC_PI_2;

    fn random_points(stream: &mut SeedStream, n: usize) -> Vec<Point3<f64>> {
        (0..n)
            .map(|_| {
                Point3::new(
                    stream.uniform_in(-1.0, 1.0),
                    stream.uniform_in(-1.0, 1.0),
                    stream.uniform_in(-1.0, 1.0),
                )
            })
            .collect()
    }

    #[test]
    fn recovers_exact_transform() {
        let mut stream = SeedStream::new(1);
        let source = random_points(&mut stream, 10);
        let truth = RigidTransform::from_axis_angle(
            Vector3::z(),
            FRAC_PI_2,
            Vector3::new(1.0, 0.0, 0.0),
        );
        let target: Vec<_> = source.iter().map(|p| truth.transform_point(p)).collect();
        let est = kabsch_align(&source, &target, &vec![1.0; 10]).unwrap();
        assert!(est.rotation_distance(&truth) < 1e-9);
        assert!(est.translation_distance(&truth) < 1e-9);
    }

    #[test]
    fn identity_when_source_equals_target() {
        let mut stream = SeedStream::new(2);
        let pts = random_points(&mut stream, 6);
        let est = kabsch_align(&pts, &pts, &vec![1.0; 6]).unwrap();
        assert!(est.rotation_distance(&RigidTransform::identity()) < 1e-9);
        assert!(est.translation.norm() < 1e-12);
    }

    #[test]
    fn noisy_fit_beats_or_matches_truth_residual() {
        let mut stream = SeedStream::new(3);
        let source = random_points(&mut stream, 10);
        let truth = RigidTransform::from_axis_angle(
            Vector3::new(0.2, 1.0, -0.3),
            0.7,
            Vector3::new(0.1, -0.2, 0.4),
        );
        let target: Vec<_> = source
            .iter()
            .map(|p| {
                let q = truth.transform_point(p);
                Point3::new(
                    q.x + stream.gaussian() * 1e-3,
                    q.y + stream.gaussian() * 1e-3,
                    q.z + stream.gaussian() * 1e-3,
                )
            })
            .collect();
        let weights = vec![1.0; 10];
        let est = kabsch_align(&source, &target, &weights).unwrap();
        let residual = |t: &RigidTransform| -> f64 {
            source
                .iter()
                .zip(&target)
                .map(|(s, g)| (t.transform_point(s) - g).norm_squared())
                .sum()
        };
        assert!(residual(&est) <= residual(&truth) + 1e-15);
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let source: Vec<_> = (0..5).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let target = source.clone();
        assert!(matches!(
            kabsch_align(&source, &target, &vec![1.0; 5]),
            Err(CoreError::DegenerateCorrespondence(_))
        ));
    }

    #[test]
    fn weights_shift_the_fit() {
        // Two candidate rigid motions explain different subsets; the heavily
        // weighted subset must win.
        let source = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ];
        let shift = Vector3::new(0.0, 0.0, 0.5);
        let mut target: Vec<_> = source.iter().map(|p| p + shift).collect();
        target[3].z += 0.4; // outlier
        let est_uniform = kabsch_align(&source, &target, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        let est_weighted = kabsch_align(&source, &target, &[10.0, 10.0, 10.0, 0.01]).unwrap();
        let err_uniform = (est_uniform.transform_point(&source[0]) - target[0]).norm();
        let err_weighted = (est_weighted.transform_point(&source[0]) - target[0]).norm();
        assert!(err_weighted < err_uniform);
    }
}
