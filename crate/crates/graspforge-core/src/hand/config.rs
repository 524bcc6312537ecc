//! Declarative hand description: a tree of links connected by revolute
//! joints, with finger groupings and fingertip markers.
//!
//! The on-disk format is JSON with the following sections (meters, radians):
//!
//! - `links[]`: `{ name, parent, origin?, geometry, surface_samples? }` —
//!   `parent: null` marks the root (wrist) link; `origin` is the fixed
//!   transform to the parent frame for links without a joint.
//! - `joints[]`: `{ name, parent, child, origin, axis, limits: [lo, hi],
//!   drive }` — revolute joints; `drive` is either
//!   `{ "type": "independent", "dof": k }` or
//!   `{ "type": "coupled", "dof": k, "coefficient": c }` (the joint angle is
//!   `c * theta[k]`).
//! - `fingers[]`: `{ name, links, fingertip_link, fingertip_point }`.
//! - `dof_count`, optional `open_pose` (pre-grasp joint vector).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct HandConfig {
    pub name: String,
    pub dof_count: usize,
    pub links: Vec<LinkConfig>,
    pub joints: Vec<JointConfig>,
    pub fingers: Vec<FingerConfig>,
    /// Joint vector used as the pre-grasp (fingers open) posture.
    /// Defaults to mid-range when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open_pose: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LinkConfig {
    pub name: String,
    pub parent: Option<String>,
    /// Fixed transform to the parent frame; only used for links that are not
    /// the child of any joint. Defaults to identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<TransformConfig>,
    pub geometry: GeometryConfig,
    /// Surface sample count for this link's point cloud.
    #[serde(default = "default_link_samples")]
    pub surface_samples: usize,
}

fn default_link_samples() -> usize {
    64
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct JointConfig {
    pub name: String,
    pub parent: String,
    pub child: String,
    pub origin: TransformConfig,
    pub axis: [f64; 3],
    pub limits: [f64; 2],
    pub drive: DriveConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DriveConfig {
    Independent { dof: usize },
    Coupled { dof: usize, coefficient: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FingerConfig {
    pub name: String,
    pub links: Vec<String>,
    pub fingertip_link: String,
    pub fingertip_point: [f64; 3],
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct TransformConfig {
    #[serde(default)]
    pub translation: [f64; 3],
    /// Fixed XYZ Euler angles, radians.
    #[serde(default)]
    pub rpy: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GeometryConfig {
    Box {
        half_extents: [f64; 3],
        #[serde(default)]
        offset: [f64; 3],
    },
    Capsule {
        radius: f64,
        length: f64,
    },
    Sphere {
        radius: f64,
        #[serde(default)]
        offset: [f64; 3],
    },
}
