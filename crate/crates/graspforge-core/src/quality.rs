//! Analytic grasp quality.
//!
//! Q1 is a force-closure epsilon metric: the radius of the largest
//! origin-centered ball inside the convex hull of the contact wrenches,
//! estimated by support-function sampling over unit directions in wrench
//! space. The raw epsilon is rescaled by the epsilon of an ideal antipodal
//! grasp on a unit sphere at mu = 0.5 computed with identical estimator
//! settings, so `Q1 = 1` for that reference by construction and the 0.5
//! classification threshold is meaningful.

use nalgebra::{Point3, Vector3};

use crate::error::CoreError;
use crate::hand::HandSurfaceCloud;
use crate::contact::aligned_nearest_points;
use crate::geometry::PointCloud;
use crate::rng::SeedStream;
use crate::scene::CollisionReport;

/// Default friction coefficient.
pub const DEFAULT_MU: f64 = 0.5;
/// Default friction cone discretization.
pub const DEFAULT_EDGES: usize = 8;
/// Default direction sample count for the epsilon estimator.
pub const DEFAULT_DIRECTIONS: usize = 1024;

/// Frictional point contacts on an object, in the object frame.
#[derive(Debug, Clone)]
pub struct ContactSet {
    pub points: Vec<Point3<f64>>,
    /// Unit normals pointing into the object.
    pub normals: Vec<Vector3<f64>>,
    pub mu: f64,
    /// Torque reference point; defaults to the contact centroid. Callers
    /// labeling grasps on a known object should pin this to the object
    /// centroid so the wrench space does not shift as contacts come and go.
    pub torque_center: Option<Point3<f64>>,
}

impl ContactSet {
    pub fn new(
        points: Vec<Point3<f64>>,
        normals: Vec<Vector3<f64>>,
        mu: f64,
    ) -> Result<Self, CoreError> {
        if points.is_empty() {
            return Err(CoreError::EmptyInput("contact set".into()));
        }
        if points.len() != normals.len() {
            return Err(CoreError::DimensionMismatch {
                expected: points.len(),
                got: normals.len(),
                context: "contact normals".into(),
            });
        }
        if mu <= 0.0 {
            return Err(CoreError::InvalidArgument("mu must be > 0".into()));
        }
        for (i, n) in normals.iter().enumerate() {
            if (n.norm() - 1.0).abs() > 1e-6 {
                return Err(CoreError::InvalidArgument(format!(
                    "contact normal {i} not unit length"
                )));
            }
        }
        Ok(ContactSet {
            points,
            normals,
            mu,
            torque_center: None,
        })
    }

    pub fn with_torque_center(mut self, center: Point3<f64>) -> Self {
        self.torque_center = Some(center);
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn torque_reference(&self) -> Point3<f64> {
        if let Some(c) = self.torque_center {
            return c;
        }
        let mut acc = Vector3::zeros();
        for p in &self.points {
            acc += p.coords;
        }
        Point3::from(acc / self.points.len() as f64)
    }
}

/// Grasp class labels per the three-way scheme: 0 = colliding, 1 =
/// unreliable (Q1 < 0.5), 2 = reliable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspLabel {
    pub class: u8,
    pub q1: f64,
    pub q2: f64,
}

/// Discretized friction-cone wrenches, one 6D unit wrench per cone edge per
/// contact. Force directions lie on the cone boundary (half-angle
/// `atan(mu)` about the inward normal); torques are taken about the contact
/// centroid and scaled by `torque_scale` before the wrench is normalized.
pub fn friction_cone_wrenches(
    contacts: &ContactSet,
    edges: usize,
    torque_scale: f64,
) -> Result<Vec<[f64; 6]>, CoreError> {
    if edges < 3 {
        return Err(CoreError::InvalidArgument("edges must be >= 3".into()));
    }
    if torque_scale <= 0.0 {
        return Err(CoreError::InvalidArgument(
            "torque_scale must be > 0".into(),
        ));
    }
    let centroid = contacts.torque_reference();
    let mut wrenches = Vec::with_capacity(contacts.len() * edges);
    for (p, n) in contacts.points.iter().zip(&contacts.normals) {
        if n.norm() < 1e-9 {
            return Err(CoreError::InvalidArgument("zero contact normal".into()));
        }
        // Deterministic tangent basis.
        let helper = if n.x.abs() < 0.9 {
            Vector3::x()
        } else {
            Vector3::y()
        };
        let t1 = n.cross(&helper).normalize();
        let t2 = n.cross(&t1).normalize();
        let scale = 1.0 / (1.0 + contacts.mu * contacts.mu).sqrt();
        for e in 0..edges {
            let phi = std::f64::consts::TAU * e as f64 / edges as f64;
            let force = (n + (t1 * phi.cos() + t2 * phi.sin()) * contacts.mu) * scale;
            let torque = (p - centroid).cross(&force) / torque_scale;
            let mut w = [force.x, force.y, force.z, torque.x, torque.y, torque.z];
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in &mut w {
                *x /= norm;
            }
            wrenches.push(w);
        }
    }
    Ok(wrenches)
}

/// Raw epsilon: `max(0, min over sampled unit directions u of max over
/// wrenches w of <w, u>)` — the inscribed ball radius of the wrench hull,
/// by support-function sampling.
///
/// Rank handling: point-contact grasps can leave whole wrench axes
/// unspanned (two antipodal contacts resist no torque about their common
/// axis), which would pin the 6D radius at 0. The ball is therefore
/// measured inside the hull's own span: directions are drawn in the span
/// when the wrench matrix is rank deficient, and in plain 6D (signed
/// coordinate axes plus seeded uniform samples) at full rank, so degenerate
/// half-space cases still report exactly 0.
fn epsilon_raw(wrenches: &[[f64; 6]], directions: usize, seed: u64) -> f64 {
    use nalgebra::DMatrix;

    let w_matrix = DMatrix::from_fn(wrenches.len(), 6, |i, j| wrenches[i][j]);
    let svd = w_matrix.svd(false, true);
    let v_t = svd.v_t.expect("svd of wrench matrix");
    let sigma_max = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-9 * sigma_max.max(1e-300))
        .count()
        .min(6);
    if rank == 0 {
        return 0.0;
    }
    // Orthonormal span basis: rows of V^T with significant singular values.
    let basis: Vec<[f64; 6]> = (0..rank)
        .map(|r| {
            let mut b = [0.0; 6];
            for k in 0..6 {
                b[k] = v_t[(r, k)];
            }
            b
        })
        .collect();

    let mut dirs: Vec<[f64; 6]> = Vec::with_capacity(directions + 24);
    if rank == 6 {
        for k in 0..6 {
            for sign in [1.0, -1.0] {
                let mut d = [0.0; 6];
                d[k] = sign;
                dirs.push(d);
            }
        }
        let mut stream = SeedStream::new(seed);
        for _ in 0..directions {
            let v = stream.unit_vector(6);
            dirs.push([v[0], v[1], v[2], v[3], v[4], v[5]]);
        }
    } else {
        // Span-basis axes both ways.
        for b in &basis {
            dirs.push(*b);
            dirs.push(b.map(|x| -x));
        }
        // Canonical 6D axes projected into the span (kept when nonzero):
        // these make half-space degeneracies report exactly 0.
        for k in 0..6 {
            for sign in [1.0f64, -1.0] {
                let mut coeffs = [0.0; 6];
                let mut proj = [0.0; 6];
                for (r, b) in basis.iter().enumerate() {
                    coeffs[r] = sign * b[k];
                }
                let norm: f64 = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
                if norm > 1e-9 {
                    for (r, b) in basis.iter().enumerate() {
                        for x in 0..6 {
                            proj[x] += coeffs[r] / norm * b[x];
                        }
                    }
                    dirs.push(proj);
                }
            }
        }
        let mut stream = SeedStream::new(seed);
        for _ in 0..directions {
            let z = stream.unit_vector(rank);
            let mut d = [0.0; 6];
            for (r, b) in basis.iter().enumerate() {
                for x in 0..6 {
                    d[x] += z[r] * b[x];
                }
            }
            dirs.push(d);
        }
    }

    let mut min_support = f64::INFINITY;
    for d in &dirs {
        let mut support = f64::NEG_INFINITY;
        for w in wrenches {
            let dot = w.iter().zip(d).map(|(a, b)| a * b).sum::<f64>();
            if dot > support {
                support = dot;
            }
        }
        if support < min_support {
            min_support = support;
        }
    }
    min_support.max(0.0)
}

/// Reference contact set: antipodal contacts on a unit sphere.
fn antipodal_sphere_contacts() -> ContactSet {
    ContactSet::new(
        vec![Point3::new(1.0, 0.0, 0.0), Point3::new(-1.0, 0.0, 0.0)],
        vec![-Vector3::x(), Vector3::x()],
        DEFAULT_MU,
    )
    .expect("reference contacts are valid")
}

/// Force-closure quality estimate, rescaled so the ideal antipodal unit
/// sphere grasp at mu = 0.5 scores exactly 1.0 under the same estimator
/// settings. Deterministic given `seed`; single contacts score 0.
pub fn q1_epsilon(
    contacts: &ContactSet,
    edges: usize,
    directions: usize,
    torque_scale: f64,
    seed: u64,
) -> Result<f64, CoreError> {
    if contacts.len() < 2 {
        return Ok(0.0);
    }
    let wrenches = friction_cone_wrenches(contacts, edges, torque_scale)?;
    let raw = epsilon_raw(&wrenches, directions, seed);

    let reference = antipodal_sphere_contacts();
    let ref_wrenches = friction_cone_wrenches(&reference, edges, 1.0)?;
    let ref_raw = epsilon_raw(&ref_wrenches, directions, seed);
    debug_assert!(ref_raw > 0.0, "reference grasp must close");
    Ok(raw / ref_raw)
}

/// Q1 with default estimator settings.
pub fn q1_epsilon_default(contacts: &ContactSet, torque_scale: f64, seed: u64) -> Result<f64, CoreError> {
    q1_epsilon(contacts, DEFAULT_EDGES, DEFAULT_DIRECTIONS, torque_scale, seed)
}

/// Three-way grasp class: collision dominates, then the Q1 >= 0.5 split.
pub fn label_class(q1: f64, report: &CollisionReport) -> GraspLabel {
    let class = if report.q2 > 0.0 {
        0
    } else if q1 >= 0.5 {
        2
    } else {
        1
    };
    GraspLabel {
        class,
        q1,
        q2: report.q2,
    }
}

/// Contacts for Q1 from fingertip projections: each fingertip whose aligned
/// distance against the object cloud is within `tau` contributes its
/// projection with the inward object normal at the matched point.
pub fn fingertip_contacts(
    hand_cloud: &HandSurfaceCloud,
    object_cloud: &PointCloud,
    tau: f64,
    mu: f64,
) -> Result<Option<ContactSet>, CoreError> {
    let normals = object_cloud
        .normals
        .as_ref()
        .ok_or_else(|| CoreError::Precondition("object cloud must carry normals".into()))?;
    // Restrict the aligned query to the fingertip points only.
    let tips = HandSurfaceCloud {
        points: hand_cloud
            .fingertip_index
            .iter()
            .map(|&i| hand_cloud.points[i])
            .collect(),
        labels: hand_cloud
            .fingertip_index
            .iter()
            .map(|&i| hand_cloud.labels[i])
            .collect(),
        source_link: vec![0; hand_cloud.fingertip_index.len()],
        fingertip_index: vec![],
    };
    let aligned = aligned_nearest_points(&tips, object_cloud)?;
    let mut points = Vec::new();
    let mut contact_normals = Vec::new();
    for ap in &aligned {
        if ap.aligned_distance.abs() < tau {
            points.push(ap.projection);
            contact_normals.push(-normals[ap.object_index]);
        }
    }
    if points.is_empty() {
        return Ok(None);
    }
    Ok(Some(
        ContactSet::new(points, contact_normals, mu)?
            .with_torque_center(object_cloud.centroid()),
    ))
}
