//! Cluttered-scene construction by collision-checked rejection sampling,
//! plus the hand-vs-surroundings collision score Q2.
//!
//! Penetration depth between two bodies is estimated by probing one body's
//! sample points (surface samples plus the centroid) against the other
//! body's signed distance field, symmetrized. The centroid probe covers the
//! degenerate case of (near-)coincident surfaces, where pure surface
//! sampling reads zero depth.

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::{Point3, Vector3};

use crate::error::CoreError;
use crate::geometry::{sample_surface, PointCloud, RigidTransform, SurfaceIndex, TriangleMesh};
use crate::hand::{HandModel, HandPose};
use crate::parallel;
use crate::rng::SeedStream;

/// Samples per body used for penetration probing.
pub const COLLISION_SAMPLES: usize = 512;
/// Pairwise penetration allowed between placed objects (meters).
pub const PLACEMENT_TOLERANCE: f64 = 1e-4;
/// Penetration depth at which Q2 saturates to 1.
pub const Q2_FULL_DEPTH: f64 = 0.01;
/// Placement attempts per object before it is skipped.
const MAX_PLACEMENT_ATTEMPTS: usize = 100;
/// Surface samples per object contributed to the fused scene cloud.
const SCENE_CLOUD_SAMPLES: usize = 1024;

/// A mesh prepared for repeated collision and contact queries.
pub struct IndexedObject {
    pub name: String,
    pub mesh: Arc<TriangleMesh>,
    pub index: Arc<SurfaceIndex>,
    /// Probe points in the object frame: surface samples + centroid.
    pub probes: Arc<Vec<Point3<f64>>>,
}

impl IndexedObject {
    pub fn new(name: impl Into<String>, mesh: TriangleMesh) -> Result<Self, CoreError> {
        let name = name.into();
        let mut probes = sample_surface(&mesh, COLLISION_SAMPLES, fnv_seed(&name))?.points;
        probes.push(mesh.centroid());
        Ok(IndexedObject {
            name,
            index: Arc::new(SurfaceIndex::build(mesh.clone())),
            mesh: Arc::new(mesh),
            probes: Arc::new(probes),
        })
    }
}

fn fnv_seed(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// One object instance placed in a scene.
#[derive(Clone)]
pub struct PlacedObject {
    /// Index into the library this scene was built from.
    pub library_id: usize,
    pub object: Arc<IndexedObject>,
    pub pose: RigidTransform,
}

/// Rectangle on the support plane (z = 0) where objects may be dropped.
#[derive(Debug, Clone, Copy)]
pub struct PlacementRegion {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl PlacementRegion {
    pub fn square(half_extent: f64) -> Self {
        PlacementRegion {
            min: [-half_extent, -half_extent],
            max: [half_extent, half_extent],
        }
    }
}

/// A cluttered scene: placed objects above the z = 0 support plane plus a
/// fused sampled cloud. Immutable once built.
pub struct Scene {
    pub objects: Vec<PlacedObject>,
    pub cloud: PointCloud,
    pub seed: u64,
    /// Library ids that failed all placement attempts.
    pub skipped: Vec<usize>,
}

/// Outcome of a hand-vs-surroundings collision query.
#[derive(Debug, Clone)]
pub struct CollisionReport {
    /// Deepest penetration of the hand into any surrounding body (meters).
    pub max_penetration: f64,
    /// `(hand link id, scene object index)` pairs past the contact
    /// tolerance; the support plane is reported as object index
    /// `usize::MAX`.
    pub colliding_pairs: Vec<(usize, usize)>,
    /// `clamp(max_penetration / 0.01, 0, 1)`.
    pub q2: f64,
}

impl CollisionReport {
    pub fn collision_free(&self) -> bool {
        self.q2 == 0.0
    }
}

/// Deepest penetration between two posed bodies (0 when separated).
///
/// Probes `a`'s sample points against `b`'s SDF and vice versa; `tolerance`
/// below which contact is ignored.
pub fn check_collision(
    a: (&IndexedObject, &RigidTransform),
    b: (&IndexedObject, &RigidTransform),
    tolerance: f64,
) -> f64 {
    let depth_ab = directed_penetration(a.0, a.1, b.0, b.1);
    let depth_ba = directed_penetration(b.0, b.1, a.0, a.1);
    let depth = depth_ab.max(depth_ba);
    if depth <= tolerance {
        0.0
    } else {
        depth
    }
}

fn directed_penetration(
    probe_body: &IndexedObject,
    probe_pose: &RigidTransform,
    sdf_body: &IndexedObject,
    sdf_pose: &RigidTransform,
) -> f64 {
    // Map probe points straight into the SDF body's local frame so the
    // prebuilt index can be queried without transforming the mesh.
    let to_local = sdf_pose.inverse().compose(probe_pose);
    let local: Vec<Point3<f64>> = probe_body
        .probes
        .iter()
        .map(|p| to_local.transform_point(p))
        .collect();
    sdf_body.index.max_penetration(&local)
}

impl Scene {
    /// Assemble a scene from known placements (deserialized scene files),
    /// rebuilding the fused cloud exactly as
    /// [`generate_cluttered_scene`] would for the same seed.
    pub fn from_placements(objects: Vec<PlacedObject>, seed: u64) -> Result<Scene, CoreError> {
        if objects.is_empty() {
            return Err(CoreError::EmptyScene);
        }
        let cloud = fused_cloud(&objects, seed);
        Ok(Scene {
            objects,
            cloud,
            seed,
            skipped: Vec::new(),
        })
    }
}

fn fused_cloud(placed: &[PlacedObject], seed: u64) -> PointCloud {
    let clouds: Vec<PointCloud> = placed
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let local = sample_surface(
                &p.object.mesh,
                SCENE_CLOUD_SAMPLES,
                SeedStream::new(seed).child(1000 + i as u64).next_u64(),
            )
            .expect("library meshes sample cleanly");
            local.transformed(&p.pose)
        })
        .collect();
    PointCloud::concat(&clouds)
}

/// Build a cluttered scene: sample `m` objects from the library (with
/// replacement), drop each at a random yaw/position settled onto the plane,
/// and accept only placements whose penetration against everything already
/// placed stays within [`PLACEMENT_TOLERANCE`]. Objects failing
/// [`MAX_PLACEMENT_ATTEMPTS`] are skipped and reported.
pub fn generate_cluttered_scene(
    library: &[Arc<IndexedObject>],
    m: usize,
    region: PlacementRegion,
    seed: u64,
) -> Result<Scene, CoreError> {
    if m == 0 {
        return Err(CoreError::InvalidArgument("m must be >= 1".into()));
    }
    if library.is_empty() {
        return Err(CoreError::EmptyInput("object library is empty".into()));
    }
    let mut stream = SeedStream::new(seed);
    let mut placed: Vec<PlacedObject> = Vec::new();
    let mut skipped = Vec::new();

    for _ in 0..m {
        let library_id = stream.index(library.len());
        let object = Arc::clone(&library[library_id]);
        let mut accepted = false;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let yaw = stream.uniform_in(0.0, TAU);
            let x = stream.uniform_in(region.min[0], region.max[0]);
            let y = stream.uniform_in(region.min[1], region.max[1]);
            let spin = RigidTransform::from_axis_angle(Vector3::z(), yaw, Vector3::zeros());
            // Settle analytically: lowest vertex onto the plane.
            let min_z = object
                .mesh
                .vertices
                .iter()
                .map(|v| spin.transform_point(v).z)
                .fold(f64::INFINITY, f64::min);
            let pose = RigidTransform::from_parts(
                spin.rotation,
                Vector3::new(x, y, -min_z),
            );
            let clear = placed.iter().all(|other| {
                check_collision(
                    (&object, &pose),
                    (&other.object, &other.pose),
                    PLACEMENT_TOLERANCE,
                ) == 0.0
            });
            if clear {
                placed.push(PlacedObject {
                    library_id,
                    object: Arc::clone(&object),
                    pose,
                });
                accepted = true;
                break;
            }
        }
        if !accepted {
            skipped.push(library_id);
        }
    }

    if placed.is_empty() {
        return Err(CoreError::EmptyScene);
    }

    let cloud = fused_cloud(&placed, seed);
    Ok(Scene {
        objects: placed,
        cloud,
        seed,
        skipped,
    })
}

/// Collision score of the hand at `pose` against everything in the scene
/// except the grasped object: surrounding objects and the support plane.
///
/// `Q2 = clamp(depth / 0.01, 0, 1)`; 0 means collision-free.
pub fn collision_score(
    hand: &HandModel,
    pose: &HandPose,
    scene: &Scene,
    grasped_object: usize,
) -> Result<CollisionReport, CoreError> {
    let fk = hand.forward_kinematics(pose)?;
    let surrounding: Vec<usize> = (0..scene.objects.len())
        .filter(|&i| i != grasped_object)
        .collect();

    // One task per hand link; each probes every surrounding object and the
    // support plane, and is itself probed by the objects' samples.
    let link_ids: Vec<usize> = (0..hand.link_count()).collect();
    let per_link: Vec<(f64, Vec<(usize, usize)>)> = parallel::map_collect(&link_ids, |&link_id| {
        let link_pose = &fk[link_id];
        let samples = hand.link_samples(link_id);
        let world: Vec<Point3<f64>> = samples
            .iter()
            .map(|p| link_pose.transform_point(p))
            .collect();

        let mut worst = 0.0f64;
        let mut pairs = Vec::new();

        // Support plane: depth below z = 0.
        let plane_depth = world.iter().map(|p| -p.z).fold(0.0f64, f64::max);
        if plane_depth > PLACEMENT_TOLERANCE {
            worst = worst.max(plane_depth);
            pairs.push((link_id, usize::MAX));
        }

        let link_index = hand.link_index(link_id);
        for &obj_i in &surrounding {
            let obj = &scene.objects[obj_i];
            // Hand samples into the object's SDF.
            let to_obj = obj.pose.inverse().compose(link_pose);
            let local: Vec<Point3<f64>> = samples
                .iter()
                .map(|p| to_obj.transform_point(p))
                .collect();
            let mut depth = obj.object.index.max_penetration(&local);
            // Object probes into the hand link's SDF.
            let to_link = link_pose.inverse().compose(&obj.pose);
            let obj_local: Vec<Point3<f64>> = obj
                .object
                .probes
                .iter()
                .map(|p| to_link.transform_point(p))
                .collect();
            depth = depth.max(link_index.max_penetration(&obj_local));
            if depth > PLACEMENT_TOLERANCE {
                worst = worst.max(depth);
                pairs.push((link_id, obj_i));
            }
        }
        (worst, pairs)
    });

    let mut max_penetration = 0.0f64;
    let mut colliding_pairs = Vec::new();
    for (depth, pairs) in per_link {
        max_penetration = max_penetration.max(depth);
        colliding_pairs.extend(pairs);
    }
    let q2 = (max_penetration / Q2_FULL_DEPTH).clamp(0.0, 1.0);
    Ok(CollisionReport {
        max_penetration,
        colliding_pairs,
        q2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;

    fn unit_cube() -> Arc<IndexedObject> {
        Arc::new(
            IndexedObject::new(
                "unit_cube",
                primitives::box_mesh(Vector3::new(0.5, 0.5, 0.5)),
            )
            .unwrap(),
        )
    }

    #[test]
    fn separated_cubes_have_zero_depth() {
        let cube = unit_cube();
        let a = RigidTransform::identity();
        let b = RigidTransform::translation_only(Vector3::new(2.0, 0.0, 0.0));
        assert_eq!(check_collision((&cube, &a), (&cube, &b), 1e-6), 0.0);
    }

    #[test]
    fn coincident_cubes_read_half_edge_depth() {
        let cube = unit_cube();
        let pose = RigidTransform::identity();
        let depth = check_collision((&cube, &pose), (&cube, &pose), 1e-6);
        assert!((depth - 0.5).abs() < 0.05, "depth {depth}");
    }

    #[test]
    fn slab_overlap_depth() {
        let cube = unit_cube();
        let a = RigidTransform::identity();
        let b = RigidTransform::translation_only(Vector3::new(0.9, 0.0, 0.0));
        let depth = check_collision((&cube, &a), (&cube, &b), 1e-6);
        assert!((depth - 0.1).abs() < 0.01, "depth {depth}");
    }

    #[test]
    fn single_object_scene() {
        let lib = vec![Arc::new(
            IndexedObject::new(
                "small_box",
                primitives::box_mesh(Vector3::new(0.02, 0.02, 0.02)),
            )
            .unwrap(),
        )];
        let scene = generate_cluttered_scene(&lib, 1, PlacementRegion::square(0.2), 7).unwrap();
        assert_eq!(scene.objects.len(), 1);
        assert!(scene.skipped.is_empty());
        // Rests exactly on the plane.
        let obj = &scene.objects[0];
        let min_z = obj
            .object
            .mesh
            .vertices
            .iter()
            .map(|v| obj.pose.transform_point(v).z)
            .fold(f64::INFINITY, f64::min);
        assert!(min_z.abs() < 1e-12);
    }

    #[test]
    fn scene_generation_is_deterministic() {
        let lib = vec![
            Arc::new(
                IndexedObject::new(
                    "box_a",
                    primitives::box_mesh(Vector3::new(0.025, 0.02, 0.03)),
                )
                .unwrap(),
            ),
            Arc::new(
                IndexedObject::new("sphere_a", primitives::uv_sphere(0.025, 12, 24)).unwrap(),
            ),
        ];
        let region = PlacementRegion::square(0.15);
        let a = generate_cluttered_scene(&lib, 4, region, 42).unwrap();
        let b = generate_cluttered_scene(&lib, 4, region, 42).unwrap();
        assert_eq!(a.objects.len(), b.objects.len());
        for (oa, ob) in a.objects.iter().zip(&b.objects) {
            assert_eq!(oa.library_id, ob.library_id);
            assert_eq!(oa.pose.translation, ob.pose.translation);
            assert_eq!(oa.pose.rotation, ob.pose.rotation);
        }
    }

    #[test]
    fn tight_scene_respects_placement_tolerance() {
        let lib = vec![Arc::new(
            IndexedObject::new("box", primitives::box_mesh(Vector3::new(0.03, 0.03, 0.03)))
                .unwrap(),
        )];
        let scene = generate_cluttered_scene(&lib, 5, PlacementRegion::square(0.09), 3).unwrap();
        for i in 0..scene.objects.len() {
            for j in i + 1..scene.objects.len() {
                let a = &scene.objects[i];
                let b = &scene.objects[j];
                let depth = check_collision(
                    (&a.object, &a.pose),
                    (&b.object, &b.pose),
                    PLACEMENT_TOLERANCE,
                );
                assert_eq!(depth, 0.0, "pair ({i},{j}) penetrates {depth}");
            }
        }
    }
}
