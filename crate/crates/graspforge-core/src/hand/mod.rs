//! Config-driven articulated multi-fingered hand: forward kinematics,
//! labeled surface sampling, point Jacobians and damped least-squares
//! differential IK.

mod builtin;
pub mod config;

pub use builtin::{four_finger_config, five_finger_config};

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Point3, Unit, UnitQuaternion, Vector3};

use std::sync::Arc;

use crate::error::CoreError;
use crate::geometry::{primitives, sample_surface, RigidTransform, SurfaceIndex, TriangleMesh};
use config::{DriveConfig, GeometryConfig, HandConfig, TransformConfig};

#[derive(Debug, Clone)]
pub(crate) struct Joint {
    pub origin: RigidTransform,
    pub axis: Unit<Vector3<f64>>,
    pub lo: f64,
    pub hi: f64,
    pub dof: usize,
    pub coefficient: f64,
    pub independent: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct Link {
    pub name: String,
    pub parent: Option<usize>,
    pub joint: Option<Joint>,
    pub fixed_origin: RigidTransform,
    pub mesh: TriangleMesh,
    /// SDF index over `mesh` in the link frame (poses are applied to
    /// queries, not the mesh).
    pub index: Arc<SurfaceIndex>,
    /// Surface samples in the link frame, seeded from the link name.
    pub samples: Vec<Point3<f64>>,
    /// 0 = palm / no finger; 1..=n = finger index.
    pub label: u32,
}

/// One finger: an ordered chain of link ids plus a designated fingertip
/// point in the distal link's frame.
#[derive(Debug, Clone)]
pub struct Finger {
    pub name: String,
    pub links: Vec<usize>,
    pub fingertip_link: usize,
    pub fingertip_point: Point3<f64>,
}

/// An articulated hand. Immutable and shareable; all kinematics functions
/// are pure in `(model, pose)`.
#[derive(Debug)]
pub struct HandModel {
    pub name: String,
    pub dof_count: usize,
    links: Vec<Link>,
    pub fingers: Vec<Finger>,
    /// Per-DOF limits, taken from the independent joint driving each DOF.
    pub dof_lo: Vec<f64>,
    pub dof_hi: Vec<f64>,
    open_joints: Vec<f64>,
}

/// A grasp configuration: wrist transform plus joint vector.
#[derive(Debug, Clone, PartialEq)]
pub struct HandPose {
    pub wrist: RigidTransform,
    pub joints: Vec<f64>,
}

impl HandPose {
    pub fn new(wrist: RigidTransform, joints: Vec<f64>) -> Self {
        HandPose { wrist, joints }
    }

    pub fn validate(&self, hand: &HandModel) -> Result<(), CoreError> {
        if self.joints.len() != hand.dof_count {
            return Err(CoreError::DimensionMismatch {
                expected: hand.dof_count,
                got: self.joints.len(),
                context: "joint vector".into(),
            });
        }
        for (i, &theta) in self.joints.iter().enumerate() {
            if theta < hand.dof_lo[i] - 1e-9 || theta > hand.dof_hi[i] + 1e-9 {
                return Err(CoreError::InvalidArgument(format!(
                    "joint {i} = {theta} outside [{}, {}]",
                    hand.dof_lo[i], hand.dof_hi[i]
                )));
            }
        }
        Ok(())
    }
}

/// World-frame hand surface samples with finger labels and source links.
/// The designated fingertip point of each finger is appended after the link
/// samples; `fingertip_index[k]` locates finger k's tip in `points`.
#[derive(Debug, Clone)]
pub struct HandSurfaceCloud {
    pub points: Vec<Point3<f64>>,
    pub labels: Vec<u32>,
    pub source_link: Vec<u32>,
    pub fingertip_index: Vec<usize>,
}

impl HandSurfaceCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn fingertip(&self, finger: usize) -> Point3<f64> {
        self.points[self.fingertip_index[finger]]
    }

    pub fn transformed(&self, t: &RigidTransform) -> HandSurfaceCloud {
        HandSurfaceCloud {
            points: self.points.iter().map(|p| t.transform_point(p)).collect(),
            labels: self.labels.clone(),
            source_link: self.source_link.clone(),
            fingertip_index: self.fingertip_index.clone(),
        }
    }
}

/// Load and validate a hand config file (JSON, documented in [`config`]).
pub fn load_hand_config(path: impl AsRef<Path>) -> Result<HandModel, CoreError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| CoreError::io(path.display().to_string(), e))?;
    let cfg: HandConfig = serde_json::from_str(&text)
        .map_err(|e| CoreError::InvalidConfig(format!("{}: {e}", path.display())))?;
    HandModel::from_config(cfg)
}

fn transform_from_config(t: &TransformConfig) -> RigidTransform {
    let [roll, pitch, yaw] = t.rpy;
    RigidTransform::from_parts(
        UnitQuaternion::from_euler_angles(roll, pitch, yaw),
        Vector3::new(t.translation[0], t.translation[1], t.translation[2]),
    )
}

fn mesh_from_geometry(g: &GeometryConfig) -> TriangleMesh {
    match g {
        GeometryConfig::Box {
            half_extents,
            offset,
        } => primitives::box_mesh(Vector3::new(half_extents[0], half_extents[1], half_extents[2]))
            .transformed(&RigidTransform::translation_only(Vector3::new(
                offset[0], offset[1], offset[2],
            ))),
        GeometryConfig::Capsule { radius, length } => primitives::capsule(*radius, *length, 4, 12),
        GeometryConfig::Sphere { radius, offset } => primitives::uv_sphere(*radius, 8, 12)
            .transformed(&RigidTransform::translation_only(Vector3::new(
                offset[0], offset[1], offset[2],
            ))),
    }
}

fn fnv1a64(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl HandModel {
    pub fn from_config(cfg: HandConfig) -> Result<Self, CoreError> {
        let invalid = CoreError::InvalidConfig;

        if cfg.fingers.len() < 2 {
            return Err(invalid(format!(
                "need >= 2 fingers, have {}",
                cfg.fingers.len()
            )));
        }

        let mut name_to_idx: HashMap<&str, usize> = HashMap::new();
        for (i, link) in cfg.links.iter().enumerate() {
            if name_to_idx.insert(link.name.as_str(), i).is_some() {
                return Err(invalid(format!("duplicate link name '{}'", link.name)));
            }
        }

        // Joints keyed by child link.
        let mut joint_of_child: HashMap<usize, &config::JointConfig> = HashMap::new();
        for joint in &cfg.joints {
            let child = *name_to_idx
                .get(joint.child.as_str())
                .ok_or_else(|| invalid(format!("joint '{}': unknown child link", joint.name)))?;
            let parent = *name_to_idx
                .get(joint.parent.as_str())
                .ok_or_else(|| invalid(format!("joint '{}': unknown parent link", joint.name)))?;
            if parent == child {
                return Err(invalid(format!(
                    "joint '{}' connects link '{}' to itself",
                    joint.name, joint.child
                )));
            }
            if joint_of_child.insert(child, joint).is_some() {
                return Err(invalid(format!(
                    "link '{}' has two parent joints",
                    joint.child
                )));
            }
            let (dof, _) = drive_parts(&joint.drive);
            if dof >= cfg.dof_count {
                return Err(invalid(format!(
                    "joint '{}' drives DOF {dof} but dof_count is {}",
                    joint.name, cfg.dof_count
                )));
            }
            if joint.limits[0] > joint.limits[1] {
                return Err(invalid(format!("joint '{}': limits lo > hi", joint.name)));
            }
        }

        let mut links = Vec::with_capacity(cfg.links.len());
        let mut roots = 0usize;
        for (i, lc) in cfg.links.iter().enumerate() {
            let declared_parent = match &lc.parent {
                None => {
                    if !joint_of_child.contains_key(&i) {
                        roots += 1;
                    }
                    None
                }
                Some(p) => Some(*name_to_idx.get(p.as_str()).ok_or_else(|| {
                    invalid(format!("link '{}': unknown parent '{}'", lc.name, p))
                })?),
            };
            if declared_parent == Some(i) {
                return Err(invalid(format!("link '{}' is its own parent", lc.name)));
            }
            // When a joint connects this link, the joint's declared parent wins.
            let parent = match joint_of_child.get(&i) {
                Some(jc) => Some(*name_to_idx.get(jc.parent.as_str()).unwrap()),
                None => declared_parent,
            };
            let joint = joint_of_child.get(&i).map(|jc| {
                let (dof, coefficient) = drive_parts(&jc.drive);
                Joint {
                    origin: transform_from_config(&jc.origin),
                    axis: Unit::new_normalize(Vector3::new(jc.axis[0], jc.axis[1], jc.axis[2])),
                    lo: jc.limits[0],
                    hi: jc.limits[1],
                    dof,
                    coefficient,
                    independent: matches!(jc.drive, DriveConfig::Independent { .. }),
                }
            });
            let mesh = mesh_from_geometry(&lc.geometry);
            let samples = sample_surface(
                &mesh,
                lc.surface_samples,
                fnv1a64(&format!("{}/{}", cfg.name, lc.name)),
            )?
            .points;
            links.push(Link {
                name: lc.name.clone(),
                parent,
                joint,
                fixed_origin: lc
                    .origin
                    .as_ref()
                    .map(transform_from_config)
                    .unwrap_or_else(RigidTransform::identity),
                index: Arc::new(SurfaceIndex::build(mesh.clone())),
                mesh,
                samples,
                label: 0,
            });
        }
        if roots != 1 {
            return Err(invalid(format!(
                "expected exactly 1 root link, found {roots}"
            )));
        }

        // Walking up from every link must terminate at the root.
        for start in 0..links.len() {
            let mut hops = 0;
            let mut cur = Some(start);
            while let Some(i) = cur {
                hops += 1;
                if hops > links.len() {
                    return Err(invalid("cycle in kinematic graph".into()));
                }
                cur = links[i].parent;
            }
        }

        // DOF limits come from independent joints; coupled joints must stay
        // inside their own limits over the driving DOF's range.
        let mut dof_lo = vec![f64::NEG_INFINITY; cfg.dof_count];
        let mut dof_hi = vec![f64::INFINITY; cfg.dof_count];
        let mut dof_has_driver = vec![false; cfg.dof_count];
        for link in &links {
            if let Some(j) = &link.joint {
                if j.independent {
                    dof_lo[j.dof] = dof_lo[j.dof].max(j.lo);
                    dof_hi[j.dof] = dof_hi[j.dof].min(j.hi);
                    dof_has_driver[j.dof] = true;
                }
            }
        }
        for (k, has) in dof_has_driver.iter().enumerate() {
            if !has {
                return Err(invalid(format!("DOF {k} has no independent driving joint")));
            }
        }
        for link in &links {
            if let Some(j) = &link.joint {
                let a = j.coefficient * dof_lo[j.dof];
                let b = j.coefficient * dof_hi[j.dof];
                if a.min(b) < j.lo - 1e-9 || a.max(b) > j.hi + 1e-9 {
                    return Err(invalid(format!(
                        "joint on link '{}' can exceed its limits through coupling",
                        link.name
                    )));
                }
            }
        }

        // Fingers and link labels.
        let mut fingers = Vec::with_capacity(cfg.fingers.len());
        for (fi, fc) in cfg.fingers.iter().enumerate() {
            let mut link_ids = Vec::with_capacity(fc.links.len());
            for lname in &fc.links {
                let id = *name_to_idx.get(lname.as_str()).ok_or_else(|| {
                    invalid(format!("finger '{}': unknown link '{lname}'", fc.name))
                })?;
                link_ids.push(id);
            }
            let tip_link = *name_to_idx
                .get(fc.fingertip_link.as_str())
                .ok_or_else(|| invalid(format!("finger '{}': unknown fingertip link", fc.name)))?;
            for &id in &link_ids {
                links[id].label = (fi + 1) as u32;
            }
            fingers.push(Finger {
                name: fc.name.clone(),
                links: link_ids,
                fingertip_link: tip_link,
                fingertip_point: Point3::new(
                    fc.fingertip_point[0],
                    fc.fingertip_point[1],
                    fc.fingertip_point[2],
                ),
            });
        }

        let open_joints = match cfg.open_pose {
            Some(v) => {
                if v.len() != cfg.dof_count {
                    return Err(invalid("open_pose length != dof_count".into()));
                }
                v
            }
            None => (0..cfg.dof_count)
                .map(|k| 0.5 * (dof_lo[k] + dof_hi[k]))
                .collect(),
        };

        Ok(HandModel {
            name: cfg.name,
            dof_count: cfg.dof_count,
            links,
            fingers,
            dof_lo,
            dof_hi,
            open_joints,
        })
    }

    pub fn finger_count(&self) -> usize {
        self.fingers.len()
    }

    /// Contact-map class count: no-contact plus one class per finger.
    pub fn class_count(&self) -> usize {
        self.fingers.len() + 1
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn link_name(&self, id: usize) -> &str {
        &self.links[id].name
    }

    pub fn link_id(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    pub fn link_mesh(&self, id: usize) -> &TriangleMesh {
        &self.links[id].mesh
    }

    /// SDF index over the link mesh, in the link frame.
    pub fn link_index(&self, id: usize) -> &SurfaceIndex {
        &self.links[id].index
    }

    pub fn link_label(&self, id: usize) -> u32 {
        self.links[id].label
    }

    pub fn link_samples(&self, id: usize) -> &[Point3<f64>] {
        &self.links[id].samples
    }

    /// Joint vector at the middle of every DOF range.
    pub fn mid_range_joints(&self) -> Vec<f64> {
        (0..self.dof_count)
            .map(|k| 0.5 * (self.dof_lo[k] + self.dof_hi[k]))
            .collect()
    }

    /// Pre-grasp (open) joint vector.
    pub fn open_joints(&self) -> Vec<f64> {
        self.open_joints.clone()
    }

    pub fn clamp_joints(&self, joints: &mut [f64]) {
        for (k, theta) in joints.iter_mut().enumerate() {
            *theta = theta.clamp(self.dof_lo[k], self.dof_hi[k]);
        }
    }

    /// Fingertip positions at mid-range joints with identity wrist; the
    /// canonical correspondence targets for wrist initialization.
    pub fn canonical_fingertips(&self) -> Vec<Point3<f64>> {
        let pose = HandPose::new(RigidTransform::identity(), self.mid_range_joints());
        let fk = self
            .forward_kinematics(&pose)
            .expect("mid-range pose is valid");
        self.fingers
            .iter()
            .map(|f| fk[f.fingertip_link].transform_point(&f.fingertip_point))
            .collect()
    }

    /// Mean canonical fingertip position: where grasped geometry should sit
    /// in the hand frame.
    pub fn grasp_center(&self) -> Point3<f64> {
        let tips = self.canonical_fingertips();
        let mut acc = Vector3::zeros();
        for t in &tips {
            acc += t.coords;
        }
        Point3::from(acc / tips.len() as f64)
    }

    /// Reach of the hand along its approach (+z) axis.
    pub fn hand_depth(&self) -> f64 {
        self.canonical_fingertips()
            .iter()
            .map(|p| p.z)
            .fold(0.0, f64::max)
    }

    /// World transform per link.
    pub fn forward_kinematics(&self, pose: &HandPose) -> Result<Vec<RigidTransform>, CoreError> {
        if pose.joints.len() != self.dof_count {
            return Err(CoreError::DimensionMismatch {
                expected: self.dof_count,
                got: pose.joints.len(),
                context: "joint vector".into(),
            });
        }
        let mut out: Vec<Option<RigidTransform>> = vec![None; self.links.len()];
        for i in 0..self.links.len() {
            self.fk_link(i, pose, &mut out);
        }
        Ok(out.into_iter().map(|t| t.unwrap()).collect())
    }

    fn fk_link(&self, i: usize, pose: &HandPose, out: &mut Vec<Option<RigidTransform>>) {
        if out[i].is_some() {
            return;
        }
        let link = &self.links[i];
        let parent_t = match link.parent {
            None => pose.wrist,
            Some(p) => {
                self.fk_link(p, pose, out);
                out[p].unwrap()
            }
        };
        let local = match &link.joint {
            Some(j) => {
                let angle = j.coefficient * pose.joints[j.dof];
                j.origin.compose(&RigidTransform::from_parts(
                    UnitQuaternion::from_axis_angle(&j.axis, angle),
                    Vector3::zeros(),
                ))
            }
            None => link.fixed_origin,
        };
        out[i] = Some(parent_t.compose(&local));
    }

    /// World-frame labeled surface cloud at `pose`, fingertips appended.
    pub fn surface_cloud(&self, pose: &HandPose) -> Result<HandSurfaceCloud, CoreError> {
        let fk = self.forward_kinematics(pose)?;
        let mut points = Vec::new();
        let mut labels = Vec::new();
        let mut source_link = Vec::new();
        for (i, link) in self.links.iter().enumerate() {
            let t = &fk[i];
            for s in &link.samples {
                points.push(t.transform_point(s));
                labels.push(link.label);
                source_link.push(i as u32);
            }
        }
        let mut fingertip_index = Vec::with_capacity(self.fingers.len());
        for (fi, f) in self.fingers.iter().enumerate() {
            fingertip_index.push(points.len());
            points.push(fk[f.fingertip_link].transform_point(&f.fingertip_point));
            labels.push((fi + 1) as u32);
            source_link.push(f.fingertip_link as u32);
        }
        Ok(HandSurfaceCloud {
            points,
            labels,
            source_link,
            fingertip_index,
        })
    }

    /// Fingertip world positions at `pose`.
    pub fn fingertips(&self, pose: &HandPose) -> Result<Vec<Point3<f64>>, CoreError> {
        let fk = self.forward_kinematics(pose)?;
        Ok(self
            .fingers
            .iter()
            .map(|f| fk[f.fingertip_link].transform_point(&f.fingertip_point))
            .collect())
    }

    /// Jacobian of the world position of `local_point` on `link` with
    /// respect to the joint vector: a 3 x d matrix including coupling
    /// coefficients. Joints not on the root path contribute zero columns.
    pub fn point_jacobian(
        &self,
        pose: &HandPose,
        link: usize,
        local_point: &Point3<f64>,
    ) -> Result<DMatrix<f64>, CoreError> {
        if link >= self.links.len() {
            return Err(CoreError::InvalidArgument(format!("unknown link id {link}")));
        }
        let fk = self.forward_kinematics(pose)?;
        let p_world = fk[link].transform_point(local_point);
        let mut jac = DMatrix::zeros(3, self.dof_count);

        let mut cur = Some(link);
        while let Some(i) = cur {
            let l = &self.links[i];
            if let Some(j) = &l.joint {
                let parent_t = match l.parent {
                    None => pose.wrist,
                    Some(p) => fk[p],
                };
                let joint_frame = parent_t.compose(&j.origin);
                let axis_world = joint_frame.transform_vector(&j.axis);
                let origin_world = Point3::from(joint_frame.translation);
                let col = axis_world.cross(&(p_world - origin_world)) * j.coefficient;
                for r in 0..3 {
                    jac[(r, j.dof)] += col[r];
                }
            }
            cur = l.parent;
        }
        Ok(jac)
    }

    /// One damped least-squares IK step toward per-fingertip targets.
    ///
    /// Solves `(J^T J + lambda^2 I) dTheta = J^T r` over the stacked
    /// fingertip residuals, clamps to joint limits, and leaves the wrist
    /// unchanged. Singular configurations stay bounded through the damping.
    pub fn dls_ik_step(
        &self,
        pose: &HandPose,
        targets: &[Point3<f64>],
        damping: f64,
    ) -> Result<HandPose, CoreError> {
        if targets.len() != self.fingers.len() {
            return Err(CoreError::DimensionMismatch {
                expected: self.fingers.len(),
                got: targets.len(),
                context: "fingertip targets".into(),
            });
        }
        let masked: Vec<Option<Point3<f64>>> = targets.iter().map(|t| Some(*t)).collect();
        self.dls_ik_step_masked(pose, &masked, damping)
    }

    /// DLS step where `None` targets exclude that finger's residual.
    pub fn dls_ik_step_masked(
        &self,
        pose: &HandPose,
        targets: &[Option<Point3<f64>>],
        damping: f64,
    ) -> Result<HandPose, CoreError> {
        if damping <= 0.0 {
            return Err(CoreError::InvalidArgument("damping must be > 0".into()));
        }
        let fk = self.forward_kinematics(pose)?;
        let d = self.dof_count;
        let mut jtj = DMatrix::<f64>::zeros(d, d);
        let mut jtr = DVector::<f64>::zeros(d);
        for (fi, target) in targets.iter().enumerate() {
            let Some(target) = target else { continue };
            let finger = &self.fingers[fi];
            let tip = fk[finger.fingertip_link].transform_point(&finger.fingertip_point);
            let jac = self.point_jacobian(pose, finger.fingertip_link, &finger.fingertip_point)?;
            let r = target - tip;
            jtj += jac.transpose() * &jac;
            jtr += jac.transpose() * r;
        }
        for k in 0..d {
            jtj[(k, k)] += damping * damping;
        }
        let delta = jtj
            .cholesky()
            .map(|ch| ch.solve(&jtr))
            .ok_or_else(|| CoreError::NumericalFailure {
                message: "DLS normal equations not positive definite".into(),
                iteration: 0,
            })?;
        let mut joints = pose.joints.clone();
        for k in 0..d {
            joints[k] += delta[k];
        }
        self.clamp_joints(&mut joints);
        Ok(HandPose::new(pose.wrist, joints))
    }
}

fn drive_parts(d: &DriveConfig) -> (usize, f64) {
    match d {
        DriveConfig::Independent { dof } => (*dof, 1.0),
        DriveConfig::Coupled { dof, coefficient } => (*dof, *coefficient),
    }
}

#[cfg(test)]
mod tests;
