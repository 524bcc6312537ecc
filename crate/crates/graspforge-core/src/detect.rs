//! Grasp detection from contact semantic maps.
//!
//! The wrist is initialized by matching per-finger contact centroids to the
//! hand's canonical fingertip layout (weighted Kabsch), then the pose is
//! refined by alternating minimization of the contact energy
//! `e = sum_k |eps_s(v_k, Omega_k)|`, where `eps_s` is the distance from
//! fingertip k to its labeled contact points, signed by the object SDF at
//! the fingertip. Wrist updates are gradient steps in SE(3) exponential
//! coordinates under an Armijo backtracking line search; joint updates are
//! damped least-squares IK steps, also accepted only when the energy does
//! not increase. The energy trace is therefore nonincreasing over accepted
//! steps.

use nalgebra::{Point3, Vector3};

use crate::contact::ContactSemanticMap;
use crate::error::CoreError;
use crate::geometry::{kabsch_align, KdTree, RigidTransform, SurfaceIndex};
use crate::hand::{HandModel, HandPose};

/// Refinement parameters.
#[derive(Debug, Clone)]
pub struct RefineConfig {
    pub max_iterations: usize,
    /// Convergence threshold on the total energy (meters).
    pub eps: f64,
    /// Stop when the relative energy improvement drops below this.
    pub rel_improvement: f64,
    /// DLS damping for joint steps.
    pub damping: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo_c: f64,
    /// Line-search backtracking factor.
    pub shrink: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            max_iterations: 200,
            eps: 1e-3,
            rel_improvement: 1e-6,
            damping: 0.05,
            armijo_c: 1e-4,
            shrink: 0.5,
        }
    }
}

/// Per-finger outcome of a refinement run.
#[derive(Debug, Clone)]
pub struct FingerResidual {
    pub finger: usize,
    /// Distance to the nearest labeled contact point, signed by the object
    /// SDF at the fingertip (negative = fingertip inside the object).
    pub residual: f64,
    /// True when the map carried no points for this finger's class.
    pub excluded: bool,
}

/// Result of grasp detection / refinement.
#[derive(Debug, Clone)]
pub struct DetectionResult {
    pub pose: HandPose,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub per_finger: Vec<FingerResidual>,
    /// Energy after each accepted change, starting at the initial energy.
    pub trace: Vec<f64>,
}

/// Estimate the initial wrist pose from per-finger contact centroids via
/// weighted Kabsch against the canonical fingertip layout.
///
/// Needs at least 3 finger classes present; fewer is an
/// `InsufficientContacts` error (callers fall back to
/// [`approach_axis_fallback`]).
pub fn initial_wrist_pose(
    map: &ContactSemanticMap,
    hand: &HandModel,
) -> Result<RigidTransform, CoreError> {
    let present = map.present_finger_classes();
    if present.len() < 3 {
        return Err(CoreError::InsufficientContacts {
            present: present.len(),
            needed: 3,
        });
    }
    let canonical = hand.canonical_fingertips();
    let mut source = Vec::new();
    let mut target = Vec::new();
    let mut weights = Vec::new();
    for &class in &present {
        let pts = map.class_points(class);
        let mut acc = Vector3::zeros();
        for p in &pts {
            acc += p.coords;
        }
        let centroid = Point3::from(acc / pts.len() as f64);
        source.push(canonical[class as usize - 1]);
        target.push(centroid);
        weights.push(pts.len() as f64);
    }
    kabsch_align(&source, &target, &weights)
}

/// Fallback initializer for maps with fewer than 3 finger classes: place
/// the wrist at standoff `1.2 * hand_depth` along the mean outward normal
/// of the contact points, approach axis pointing back at them.
pub fn approach_axis_fallback(
    map: &ContactSemanticMap,
    object_index: &SurfaceIndex,
    hand: &HandModel,
) -> Result<RigidTransform, CoreError> {
    let mut contact_points = Vec::new();
    for class in map.present_finger_classes() {
        contact_points.extend(map.class_points(class));
    }
    if contact_points.is_empty() {
        return Err(CoreError::InsufficientContacts {
            present: 0,
            needed: 1,
        });
    }
    let mut centroid = Vector3::zeros();
    let mut mean_normal = Vector3::zeros();
    for p in &contact_points {
        centroid += p.coords;
        mean_normal += object_index.nearest_surface_point(p).normal;
    }
    centroid /= contact_points.len() as f64;
    if mean_normal.norm() < 1e-9 {
        mean_normal = Vector3::z();
    }
    let outward = mean_normal.normalize();
    let standoff = 1.2 * hand.hand_depth();
    let position = Point3::from(centroid) + outward * standoff;
    // Approach axis (+z of the hand) points back toward the contacts.
    Ok(frame_with_z_axis(-outward, position))
}

/// Right-handed frame with the given +z axis at `origin`; the x axis is an
/// arbitrary but deterministic perpendicular.
pub fn frame_with_z_axis(z: Vector3<f64>, origin: Point3<f64>) -> RigidTransform {
    let z = z.normalize();
    let helper = if z.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let x = helper.cross(&z).normalize();
    let y = z.cross(&x);
    let mut m = nalgebra::Matrix3::zeros();
    m.set_column(0, &x);
    m.set_column(1, &y);
    m.set_column(2, &z);
    RigidTransform::from_matrix(m, origin.coords).expect("constructed frame is orthonormal")
}

struct EnergyContext<'a> {
    hand: &'a HandModel,
    object_index: &'a SurfaceIndex,
    /// Per finger: kd-tree over its class points, or None when absent.
    class_trees: Vec<Option<KdTree>>,
    class_centroids: Vec<Option<Point3<f64>>>,
    /// Centroid of all labeled contact points (rotation pivot).
    pivot: Point3<f64>,
    tau: f64,
}

impl<'a> EnergyContext<'a> {
    fn new(
        map: &ContactSemanticMap,
        object_index: &'a SurfaceIndex,
        hand: &'a HandModel,
        tau: f64,
    ) -> Result<Self, CoreError> {
        if map.class_count != hand.class_count() {
            return Err(CoreError::DimensionMismatch {
                expected: hand.class_count(),
                got: map.class_count,
                context: "map class count vs hand fingers".into(),
            });
        }
        let mut class_trees = Vec::with_capacity(hand.finger_count());
        let mut class_centroids = Vec::with_capacity(hand.finger_count());
        let mut all = Vector3::zeros();
        let mut all_count = 0usize;
        for finger in 0..hand.finger_count() {
            let pts = map.class_points(finger as u16 + 1);
            if pts.is_empty() {
                class_trees.push(None);
                class_centroids.push(None);
            } else {
                let mut acc = Vector3::zeros();
                for p in &pts {
                    acc += p.coords;
                    all += p.coords;
                }
                all_count += pts.len();
                class_centroids.push(Some(Point3::from(acc / pts.len() as f64)));
                class_trees.push(Some(KdTree::build(pts)));
            }
        }
        if all_count == 0 {
            return Err(CoreError::InsufficientContacts {
                present: 0,
                needed: 1,
            });
        }
        Ok(EnergyContext {
            hand,
            object_index,
            class_trees,
            class_centroids,
            pivot: Point3::from(all / all_count as f64),
            tau,
        })
    }

    /// Total energy and per-finger (distance, nearest point) terms.
    fn energy(&self, pose: &HandPose) -> Result<(f64, Vec<Option<(f64, Point3<f64>)>>), CoreError> {
        let tips = self.hand.fingertips(pose)?;
        let mut total = 0.0;
        let mut terms = Vec::with_capacity(tips.len());
        for (k, tip) in tips.iter().enumerate() {
            match &self.class_trees[k] {
                None => terms.push(None),
                Some(tree) => {
                    let (idx, dist) = tree.nearest(tip).expect("class tree not empty");
                    total += dist;
                    terms.push(Some((dist, tree.point(idx))));
                }
            }
        }
        if !total.is_finite() {
            return Err(CoreError::NumericalFailure {
                message: "energy is not finite".into(),
                iteration: 0,
            });
        }
        Ok((total, terms))
    }

    fn signed_residuals(&self, pose: &HandPose) -> Result<Vec<FingerResidual>, CoreError> {
        let tips = self.hand.fingertips(pose)?;
        let mut out = Vec::with_capacity(tips.len());
        for (k, tip) in tips.iter().enumerate() {
            match &self.class_trees[k] {
                None => out.push(FingerResidual {
                    finger: k,
                    residual: 0.0,
                    excluded: true,
                }),
                Some(tree) => {
                    let (_, dist) = tree.nearest(tip).expect("class tree not empty");
                    let sign = self.object_index.signed_distance_value(tip).signum();
                    out.push(FingerResidual {
                        finger: k,
                        residual: sign * dist,
                        excluded: false,
                    });
                }
            }
        }
        Ok(out)
    }
}

/// Refine a grasp pose against a contact semantic map by alternating wrist
/// and joint updates. See the module docs for the scheme; `init` seeds the
/// wrist, joints start at mid-range.
pub fn refine_grasp(
    map: &ContactSemanticMap,
    object_index: &SurfaceIndex,
    hand: &HandModel,
    init: RigidTransform,
    cfg: &RefineConfig,
) -> Result<DetectionResult, CoreError> {
    refine_from_pose(
        map,
        object_index,
        hand,
        HandPose::new(init, hand.mid_range_joints()),
        cfg,
    )
}

/// Refinement starting from a full pose (wrist + joints).
pub fn refine_from_pose(
    map: &ContactSemanticMap,
    object_index: &SurfaceIndex,
    hand: &HandModel,
    start: HandPose,
    cfg: &RefineConfig,
) -> Result<DetectionResult, CoreError> {
    let ctx = EnergyContext::new(map, object_index, hand, crate::contact::DEFAULT_TAU)?;
    let mut pose = start;
    let (mut energy, mut terms) = ctx.energy(&pose)?;
    let mut trace = vec![energy];
    let mut iterations = 0;

    for iter in 0..cfg.max_iterations {
        iterations = iter + 1;
        let energy_at_start = energy;

        // (a) Wrist gradient step with Armijo backtracking.
        if let Some((new_pose, new_energy, new_terms)) =
            wrist_step(&ctx, &pose, energy, &terms, cfg).map_err(|e| at_iteration(e, iter))?
        {
            pose = new_pose;
            energy = new_energy;
            terms = new_terms;
            trace.push(energy);
        }

        // (b) Joint step: DLS toward per-finger targets (class centroid in
        // the far field, nearest contact point in the endgame), scaled back
        // until the energy does not increase.
        if let Some((new_pose, new_energy, new_terms)) =
            joint_step(&ctx, &pose, energy, &terms, cfg).map_err(|e| at_iteration(e, iter))?
        {
            pose = new_pose;
            energy = new_energy;
            terms = new_terms;
            trace.push(energy);
        }

        if energy < cfg.eps {
            break;
        }
        let improvement = (energy_at_start - energy) / energy_at_start.max(1e-300);
        if improvement < cfg.rel_improvement {
            break;
        }
    }

    let converged = energy < cfg.eps;
    let per_finger = ctx.signed_residuals(&pose)?;
    Ok(DetectionResult {
        pose,
        energy,
        iterations,
        converged,
        per_finger,
        trace,
    })
}

fn at_iteration(e: CoreError, iter: usize) -> CoreError {
    match e {
        CoreError::NumericalFailure { message, .. } => CoreError::NumericalFailure {
            message,
            iteration: iter,
        },
        other => other,
    }
}

type StepOutcome = Option<(HandPose, f64, Vec<Option<(f64, Point3<f64>)>>)>;

fn wrist_step(
    ctx: &EnergyContext,
    pose: &HandPose,
    energy: f64,
    terms: &[Option<(f64, Point3<f64>)>],
    cfg: &RefineConfig,
) -> Result<StepOutcome, CoreError> {
    let tips = ctx.hand.fingertips(pose)?;
    let mut grad_t = Vector3::zeros();
    let mut grad_w = Vector3::zeros();
    for (k, term) in terms.iter().enumerate() {
        let Some((dist, nearest)) = term else { continue };
        if *dist < 1e-12 {
            continue;
        }
        let u = (tips[k] - nearest) / *dist;
        grad_t += u;
        grad_w += (tips[k] - ctx.pivot).cross(&u);
    }
    let grad_sq = grad_t.norm_squared() + grad_w.norm_squared();
    if grad_sq < 1e-18 {
        return Ok(None);
    }

    let mut alpha = (energy / grad_sq).min(0.05);
    for _ in 0..12 {
        let delta_w = grad_w * (-alpha);
        let delta_t = grad_t * (-alpha);
        let angle = delta_w.norm();
        let motion_rot = if angle > 1e-15 {
            RigidTransform::from_axis_angle(delta_w / angle, angle, Vector3::zeros())
        } else {
            RigidTransform::identity()
        };
        // Rotate about the contact pivot, then translate.
        let motion = RigidTransform::from_parts(
            motion_rot.rotation,
            ctx.pivot.coords + delta_t - motion_rot.rotation.transform_vector(&ctx.pivot.coords),
        );
        let candidate = HandPose::new(motion.compose(&pose.wrist), pose.joints.clone());
        let (cand_energy, cand_terms) = ctx.energy(&candidate)?;
        if cand_energy <= energy - cfg.armijo_c * alpha * grad_sq {
            return Ok(Some((candidate, cand_energy, cand_terms)));
        }
        alpha *= cfg.shrink;
    }
    Ok(None)
}

fn joint_step(
    ctx: &EnergyContext,
    pose: &HandPose,
    energy: f64,
    terms: &[Option<(f64, Point3<f64>)>],
    cfg: &RefineConfig,
) -> Result<StepOutcome, CoreError> {
    let mut targets: Vec<Option<Point3<f64>>> = Vec::with_capacity(ctx.hand.finger_count());
    for (k, term) in terms.iter().enumerate() {
        match term {
            None => targets.push(None),
            Some((dist, nearest)) => {
                // Far from the patch the centroid is the robust target; near
                // it, only the nearest labeled point can drive the energy to
                // zero.
                if *dist > 2.0 * ctx.tau {
                    targets.push(ctx.class_centroids[k]);
                } else {
                    targets.push(Some(*nearest));
                }
            }
        }
    }
    let stepped = ctx.hand.dls_ik_step_masked(pose, &targets, cfg.damping)?;
    let mut beta = 1.0;
    for _ in 0..8 {
        let joints: Vec<f64> = pose
            .joints
            .iter()
            .zip(&stepped.joints)
            .map(|(a, b)| a + beta * (b - a))
            .collect();
        let candidate = HandPose::new(pose.wrist, joints);
        let (cand_energy, cand_terms) = ctx.energy(&candidate)?;
        if cand_energy < energy {
            return Ok(Some((candidate, cand_energy, cand_terms)));
        }
        beta *= cfg.shrink;
    }
    Ok(None)
}

/// Full detection: schema check, Kabsch initialization with the
/// approach-axis fallback, then refinement.
pub fn detect_grasp(
    map: &ContactSemanticMap,
    object_index: &SurfaceIndex,
    hand: &HandModel,
) -> Result<DetectionResult, CoreError> {
    if map.class_count != hand.class_count() {
        return Err(CoreError::DimensionMismatch {
            expected: hand.class_count(),
            got: map.class_count,
            context: "map class count vs hand fingers".into(),
        });
    }
    let init = match initial_wrist_pose(map, hand) {
        Ok(t) => t,
        Err(CoreError::InsufficientContacts { present, .. }) if present >= 1 => {
            approach_axis_fallback(map, object_index, hand)?
        }
        Err(e) => return Err(e),
    };
    refine_grasp(map, object_index, hand, init, &RefineConfig::default())
}
