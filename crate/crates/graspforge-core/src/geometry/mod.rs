//! Triangle meshes, point clouds, spatial queries and rigid alignment.

mod cloud;
mod kabsch;
mod kdtree;
mod mesh;
pub mod primitives;
mod sample;
mod surface_index;
mod transform;
mod tri;

pub use cloud::PointCloud;
pub use kabsch::kabsch_align;
pub use kdtree::KdTree;
pub use mesh::{load_mesh, write_obj, TriangleMesh};
pub use sample::{farthest_point_sample, farthest_point_sample_stable, sample_surface};
pub use surface_index::{NearestSurfacePoint, SurfaceIndex};
pub use transform::RigidTransform;
pub use tri::{closest_point_on_triangle, TriFeature};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;
pub type Matrix3 = nalgebra::Matrix3<f64>;
