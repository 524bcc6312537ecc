use nalgebra::{Matrix3, Point3, Rotation3, Unit, UnitQuaternion, Vector3};

use crate::error::CoreError;

/// A proper rigid-body transform (rotation + translation, meters).
///
/// Stored as a unit quaternion so long composition chains stay orthonormal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_parts(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        RigidTransform {
            rotation,
            translation,
        }
    }

    /// Build from a rotation matrix, validating orthonormality and
    /// `det(R) = +1` to 1e-9.
    pub fn from_matrix(r: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, CoreError> {
        let rtr = r.transpose() * r;
        let ortho_err = (rtr - Matrix3::identity()).norm();
        if ortho_err > 1e-9 {
            return Err(CoreError::InvalidArgument(format!(
                "rotation not orthonormal (|R^T R - I| = {ortho_err:.3e})"
            )));
        }
        let det = r.determinant();
        if (det - 1.0).abs() > 1e-9 {
            return Err(CoreError::InvalidArgument(format!(
                "rotation determinant {det} != +1"
            )));
        }
        Ok(RigidTransform {
            rotation: UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r)),
            translation,
        })
    }

    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        RigidTransform {
            rotation: UnitQuaternion::from_axis_angle(&Unit::new_normalize(axis), angle),
            translation,
        }
    }

    pub fn translation_only(translation: Vector3<f64>) -> Self {
        RigidTransform {
            rotation: UnitQuaternion::identity(),
            translation,
        }
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        self.rotation.transform_point(p) + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transform_vector(v)
    }

    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation.transform_vector(&other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let inv_rot = self.rotation.inverse();
        RigidTransform {
            rotation: inv_rot,
            translation: -(inv_rot.transform_vector(&self.translation)),
        }
    }

    /// Rotation angle (radians) of `self.inverse() * other`.
    pub fn rotation_distance(&self, other: &RigidTransform) -> f64 {
        self.rotation.angle_to(&other.rotation)
    }

    pub fn translation_distance(&self, other: &RigidTransform) -> f64 {
        (self.translation - other.translation).norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn compose_matches_pointwise() {
        let a = RigidTransform::from_axis_angle(
            Vector3::new(0.0, 0.0, 1.0),
            FRAC_PI_2,
            Vector3::new(1.0, 0.0, 0.0),
        );
        let b = RigidTransform::from_axis_angle(
            Vector3::new(1.0, 0.0, 0.0),
            0.3,
            Vector3::new(0.0, -2.0, 0.5),
        );
        let p = Point3::new(0.2, -0.7, 1.1);
        let via_compose = a.compose(&b).transform_point(&p);
        let via_chain = a.transform_point(&b.transform_point(&p));
        assert!((via_compose - via_chain).norm() < 1e-12);
    }

    #[test]
    fn inverse_roundtrip() {
        let t = RigidTransform::from_axis_angle(
            Vector3::new(0.3, -1.0, 0.2),
            1.1,
            Vector3::new(0.4, 0.5, -0.6),
        );
        let p = Point3::new(-0.3, 0.9, 0.1);
        let back = t.inverse().transform_point(&t.transform_point(&p));
        assert!((back - p).norm() < 1e-12);
    }

    #[test]
    fn from_matrix_rejects_reflection() {
        let mut r = Matrix3::identity();
        r[(0, 0)] = -1.0;
        assert!(RigidTransform::from_matrix(r, Vector3::zeros()).is_err());
    }
}
