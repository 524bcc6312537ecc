use nalgebra::{Point3, Vector3};

use crate::error::CoreError;
use crate::geometry::RigidTransform;

/// A point set in meters, with optional per-point unit normals and integer
/// labels. Labels, where used, are finger-contact classes in `[0, n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
    pub normals: Option<Vec<Vector3<f64>>>,
    pub labels: Option<Vec<u32>>,
}

impl PointCloud {
    pub fn from_points(points: Vec<Point3<f64>>) -> Self {
        PointCloud {
            points,
            normals: None,
            labels: None,
        }
    }

    pub fn with_normals(
        points: Vec<Point3<f64>>,
        normals: Vec<Vector3<f64>>,
    ) -> Result<Self, CoreError> {
        if points.len() != normals.len() {
            return Err(CoreError::DimensionMismatch {
                expected: points.len(),
                got: normals.len(),
                context: "normals per point".into(),
            });
        }
        for (i, n) in normals.iter().enumerate() {
            if (n.norm() - 1.0).abs() > 1e-6 {
                return Err(CoreError::InvalidArgument(format!(
                    "normal {i} not unit length (|n| = {})",
                    n.norm()
                )));
            }
        }
        Ok(PointCloud {
            points,
            normals: Some(normals),
            labels: None,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Point3<f64> {
        let mut c = Vector3::zeros();
        for p in &self.points {
            c += p.coords;
        }
        Point3::from(c / self.points.len().max(1) as f64)
    }

    /// Radius of the bounding sphere centered at the centroid.
    pub fn bounding_radius(&self) -> f64 {
        let c = self.centroid();
        self.points
            .iter()
            .map(|p| (p - c).norm())
            .fold(0.0, f64::max)
    }

    /// Apply a rigid transform to points and (if present) normals.
    pub fn transformed(&self, t: &RigidTransform) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| t.transform_point(p)).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| t.transform_vector(n)).collect()),
            labels: self.labels.clone(),
        }
    }

    /// Concatenate clouds; normals/labels survive only if present on all parts.
    pub fn concat(parts: &[PointCloud]) -> PointCloud {
        let mut points = Vec::new();
        let all_normals = parts.iter().all(|p| p.normals.is_some());
        let all_labels = parts.iter().all(|p| p.labels.is_some());
        let mut normals = if all_normals { Some(Vec::new()) } else { None };
        let mut labels = if all_labels { Some(Vec::new()) } else { None };
        for part in parts {
            points.extend_from_slice(&part.points);
            if let (Some(acc), Some(ns)) = (normals.as_mut(), part.normals.as_ref()) {
                acc.extend_from_slice(ns);
            }
            if let (Some(acc), Some(ls)) = (labels.as_mut(), part.labels.as_ref()) {
                acc.extend_from_slice(ls);
            }
        }
        PointCloud {
            points,
            normals,
            labels,
        }
    }
}
