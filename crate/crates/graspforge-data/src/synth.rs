//! End-to-end dataset synthesis.
//!
//! Single-object candidates are sampled per library object (approach-axis
//! sampling plus IK closing), labeled with analytic quality Q1 and the
//! ground-truth contact maps. Cluttered scenes are then built by rejection
//! placement, each object's candidates transplanted into the scene frame,
//! scored for collisions (Q2), classified, and written as records.
//!
//! Poses are quantized to f32 before any map or label is computed, so a
//! record's stored pose reproduces its stored maps bit-exactly.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use graspforge_core::contact::{
    contact_distance_map, contact_semantic_map, crop_cylinder, ContactSemanticMap, MAP_POINTS,
};
use graspforge_core::geometry::{
    primitives, sample_surface, write_obj, PointCloud, Point3, RigidTransform,
};
use graspforge_core::grasp_sampling::{sample_grasp_pose, ApproachParams};
use graspforge_core::hand::{
    four_finger_config, five_finger_config, load_hand_config, HandModel, HandPose,
};
use graspforge_core::quality::{fingertip_contacts, label_class, q1_epsilon_default};
use graspforge_core::rng::SeedStream;
use graspforge_core::scene::{
    collision_score, generate_cluttered_scene, IndexedObject, PlacementRegion,
};

use crate::error::DataError;
use crate::manifest::{Manifest, ManifestInstance, ManifestObject, ManifestScene};
use crate::record::{read_blob, read_records, write_blob, write_records, Blob, DatasetRecord};

/// Which hand drives the synthesis.
#[derive(Debug, Clone, PartialEq)]
pub enum HandSpec {
    BuiltinFive,
    BuiltinFour,
    ConfigPath(PathBuf),
}

impl HandSpec {
    pub fn build(&self) -> Result<HandModel, DataError> {
        Ok(match self {
            HandSpec::BuiltinFive => HandModel::from_config(five_finger_config())
                .expect("builtin five-finger config is valid"),
            HandSpec::BuiltinFour => HandModel::from_config(four_finger_config())
                .expect("builtin four-finger config is valid"),
            HandSpec::ConfigPath(p) => load_hand_config(p)?,
        })
    }

    pub fn spec_string(&self) -> String {
        match self {
            HandSpec::BuiltinFive => "builtin:five_finger".into(),
            HandSpec::BuiltinFour => "builtin:four_finger".into(),
            HandSpec::ConfigPath(p) => p.display().to_string(),
        }
    }

    pub fn parse(s: &str) -> HandSpec {
        match s {
            "builtin:five_finger" => HandSpec::BuiltinFive,
            "builtin:four_finger" => HandSpec::BuiltinFour,
            other => HandSpec::ConfigPath(PathBuf::from(other)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DatasetConfig {
    pub out_dir: PathBuf,
    pub hand: HandSpec,
    pub scenes: usize,
    /// Objects per scene (m).
    pub objects_per_scene: usize,
    /// Grasp candidates per library object (M).
    pub grasps_per_object: usize,
    pub tau: f64,
    pub mu: f64,
    pub crop_radius: f64,
    pub crop_height: f64,
    pub seed: u64,
    /// Half extent of the square placement region (meters).
    pub region_half_extent: f64,
}

impl DatasetConfig {
    pub fn new(out_dir: impl Into<PathBuf>, seed: u64) -> Self {
        DatasetConfig {
            out_dir: out_dir.into(),
            hand: HandSpec::BuiltinFive,
            scenes: 5,
            objects_per_scene: 5,
            grasps_per_object: 10,
            tau: graspforge_core::contact::DEFAULT_TAU,
            mu: graspforge_core::quality::DEFAULT_MU,
            crop_radius: 0.1,
            crop_height: 0.3,
            seed,
            region_half_extent: 0.16,
        }
    }

    fn validate(&self) -> Result<(), DataError> {
        if self.scenes == 0 || self.objects_per_scene == 0 || self.grasps_per_object == 0 {
            return Err(DataError::Precondition(
                "scenes, objects_per_scene and grasps_per_object must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// The bundled object library: graspable primitives, watertight by
/// construction.
pub fn builtin_object_library() -> Vec<(String, graspforge_core::geometry::TriangleMesh)> {
    vec![
        ("sphere_small".into(), primitives::uv_sphere(0.032, 32, 64)),
        (
            "box_small".into(),
            primitives::box_mesh(Vector3::new(0.022, 0.018, 0.025)),
        ),
        (
            "capsule_small".into(),
            primitives::capsule(0.016, 0.035, 8, 24),
        ),
    ]
}

/// A single-object grasp candidate with its analytic labels, in the object
/// frame, pose quantized to f32 precision.
#[derive(Debug, Clone)]
pub struct SingleObjectCandidate {
    pub pose: HandPose,
    pub quaternion: [f32; 4],
    pub translation: [f32; 3],
    pub joints: Vec<f32>,
    pub q1: f32,
    pub omega: ContactSemanticMap,
    pub omega_d: Vec<f32>,
    pub contact_fingers: usize,
}

/// Round a pose to f32 storage precision and back, so downstream maps are
/// reproducible from the stored floats.
pub fn quantize_pose(pose: &HandPose) -> (HandPose, [f32; 4], [f32; 3], Vec<f32>) {
    let q = pose.wrist.rotation.quaternion();
    let quat32 = [q.w as f32, q.i as f32, q.j as f32, q.k as f32];
    let t32 = [
        pose.wrist.translation.x as f32,
        pose.wrist.translation.y as f32,
        pose.wrist.translation.z as f32,
    ];
    let joints32: Vec<f32> = pose.joints.iter().map(|&v| v as f32).collect();
    (
        pose_from_stored(&quat32, &t32, &joints32),
        quat32,
        t32,
        joints32,
    )
}

/// Reconstruct the pose a record describes (normalizing the quaternion the
/// same way every consumer does).
pub fn pose_from_stored(quat: &[f32; 4], trans: &[f32; 3], joints: &[f32]) -> HandPose {
    let rotation = UnitQuaternion::from_quaternion(Quaternion::new(
        quat[0] as f64,
        quat[1] as f64,
        quat[2] as f64,
        quat[3] as f64,
    ));
    HandPose::new(
        RigidTransform::from_parts(
            rotation,
            Vector3::new(trans[0] as f64, trans[1] as f64, trans[2] as f64),
        ),
        joints.iter().map(|&v| v as f64).collect(),
    )
}

/// Quantize a cloud's coordinates (and normals) to f32 precision.
pub fn quantize_cloud(cloud: &PointCloud) -> PointCloud {
    PointCloud {
        points: cloud
            .points
            .iter()
            .map(|p| Point3::new(p.x as f32 as f64, p.y as f32 as f64, p.z as f32 as f64))
            .collect(),
        normals: cloud.normals.as_ref().map(|ns| {
            ns.iter()
                .map(|n| {
                    Vector3::new(n.x as f32 as f64, n.y as f32 as f64, n.z as f32 as f64)
                })
                .collect()
        }),
        labels: cloud.labels.clone(),
    }
}

/// Generate `m` grasp candidates for one object with ground-truth labels.
///
/// `object_cloud` must be the f32-quantized canonical 2048-point cloud.
pub fn synthesize_grasps_single(
    object: &IndexedObject,
    object_cloud: &PointCloud,
    hand: &HandModel,
    m: usize,
    tau: f64,
    mu: f64,
    seed: u64,
) -> Result<Vec<SingleObjectCandidate>, DataError> {
    if m == 0 {
        return Err(DataError::Precondition("M must be >= 1".into()));
    }
    if object_cloud.len() != MAP_POINTS {
        return Err(DataError::Precondition(format!(
            "object cloud must have {MAP_POINTS} points"
        )));
    }
    let params = ApproachParams {
        contact_tolerance: tau * 0.5,
        ..Default::default()
    };
    let root = SeedStream::new(seed);
    let torque_scale = object.mesh.bounding_radius().max(1e-6);

    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let sampled = sample_grasp_pose(object, hand, &params, root.child(i as u64).next_u64())?;
        let (pose_q, quaternion, translation, joints) = quantize_pose(&sampled.pose);
        let hand_cloud = hand.surface_cloud(&pose_q)?;

        let omega = contact_semantic_map(&hand_cloud, object_cloud, tau)?;
        let omega_d: Vec<f32> = contact_distance_map(&hand_cloud, object_cloud)?
            .distances
            .iter()
            .map(|&d| d as f32)
            .collect();

        let contacts = fingertip_contacts(&hand_cloud, object_cloud, tau, mu)?;
        let (q1, contact_fingers) = match contacts {
            None => (0.0, 0),
            Some(set) => (
                q1_epsilon_default(&set, torque_scale, root.child(777 + i as u64).next_u64())?,
                set.len(),
            ),
        };
        out.push(SingleObjectCandidate {
            pose: pose_q,
            quaternion,
            translation,
            joints,
            q1: q1 as f32,
            omega,
            omega_d,
            contact_fingers,
        });
    }
    Ok(out)
}

/// Scene placements written next to the records for pipeline consumption.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneFile {
    pub seed: u64,
    pub objects: Vec<SceneFileObject>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneFileObject {
    pub name: String,
    /// Mesh path relative to the directory containing the scene file.
    pub mesh: String,
    pub quaternion: [f64; 4],
    pub translation: [f64; 3],
    pub cloud_seed: u64,
}

impl SceneFile {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let path = path.as_ref();
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| DataError::io(parent.display().to_string(), e))?;
        }
        let json = serde_json::to_string_pretty(self).expect("scene file serializes");
        std::fs::write(path, json).map_err(|e| DataError::io(path.display().to_string(), e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<SceneFile, DataError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| DataError::io(path.display().to_string(), e))?;
        serde_json::from_str(&text)
            .map_err(|e| DataError::format(path.display().to_string(), e.to_string()))
    }
}

struct PreparedObject {
    name: String,
    indexed: Arc<IndexedObject>,
    cloud_seed: u64,
    cloud_blob: String,
    candidates: Vec<SingleObjectCandidate>,
}

/// Run the full synthesis; returns the manifest after everything is on
/// disk. Deterministic given the config (including at any thread count:
/// scenes draw from disjoint seed streams and are written in order).
pub fn synthesize_dataset(cfg: &DatasetConfig) -> Result<Manifest, DataError> {
    cfg.validate()?;
    let hand = cfg.hand.build()?;
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| DataError::io(cfg.out_dir.display().to_string(), e))?;
    // Fail fast on unwritable output before any compute.
    let probe = cfg.out_dir.join(".write_probe");
    std::fs::write(&probe, b"ok").map_err(|e| DataError::io(probe.display().to_string(), e))?;
    let _ = std::fs::remove_file(&probe);

    let root = SeedStream::new(cfg.seed);

    // Object library: write meshes, sample canonical clouds, generate
    // single-object candidates.
    let library = builtin_object_library();
    let objects_dir = cfg.out_dir.join("objects");
    std::fs::create_dir_all(&objects_dir)
        .map_err(|e| DataError::io(objects_dir.display().to_string(), e))?;

    let mut prepared = Vec::with_capacity(library.len());
    let mut manifest_objects = Vec::with_capacity(library.len());
    for (library_id, (name, mesh)) in library.into_iter().enumerate() {
        let mesh_rel = format!("objects/{name}.obj");
        write_obj(&mesh, cfg.out_dir.join(&mesh_rel))?;
        let cloud_seed = root.child(100 + library_id as u64).next_u64();
        let raw_cloud = sample_surface(&mesh, MAP_POINTS, cloud_seed)?;
        let cloud = quantize_cloud(&raw_cloud);
        let indexed = Arc::new(IndexedObject::new(name.clone(), mesh)?);
        let candidates = synthesize_grasps_single(
            &indexed,
            &cloud,
            &hand,
            cfg.grasps_per_object,
            cfg.tau,
            cfg.mu,
            root.child(200 + library_id as u64).next_u64(),
        )?;
        let cloud_blob = write_blob(&cfg.out_dir, &cloud_blob_of(&cloud))?;
        manifest_objects.push(ManifestObject {
            name: name.clone(),
            mesh: mesh_rel,
            cloud_seed,
        });
        prepared.push(PreparedObject {
            name,
            indexed,
            cloud_seed,
            cloud_blob,
            candidates,
        });
    }

    // Scenes in parallel from disjoint seed streams; record payloads are
    // assembled in memory and written in scene order afterwards.
    let region = PlacementRegion::square(cfg.region_half_extent);
    let scene_ids: Vec<usize> = (0..cfg.scenes).collect();
    let indexed_refs: Vec<Arc<IndexedObject>> =
        prepared.iter().map(|p| Arc::clone(&p.indexed)).collect();

    let per_scene: Vec<Result<SceneBuild, DataError>> =
        graspforge_core::parallel::map_collect(&scene_ids, |&scene_id| {
            build_scene(
                scene_id,
                cfg,
                &hand,
                &prepared,
                &indexed_refs,
                region,
                root.child(1000 + scene_id as u64).next_u64(),
            )
        });

    let mut manifest_scenes = Vec::with_capacity(cfg.scenes);
    let mut class_histogram = [0usize; 3];
    for built in per_scene {
        let built = built?;
        // Blobs and records hit disk here, in scene order.
        let mut records = built.records;
        for (record, crop, hand_blob) in records
            .iter_mut()
            .zip(built.crop_blobs.iter())
            .zip(built.hand_blobs.iter())
            .map(|((r, c), h)| (r, c, h))
        {
            record.crop_blob = write_blob(&cfg.out_dir, crop)?;
            record.hand_cloud_blob = write_blob(&cfg.out_dir, hand_blob)?;
        }
        let file_rel = format!("scenes/{}/records.bin", built.scene_id);
        write_records(cfg.out_dir.join(&file_rel), &records)?;
        built
            .scene_file
            .write(cfg.out_dir.join(format!("scenes/{}/scene.json", built.scene_id)))?;
        for r in &records {
            class_histogram[r.class as usize] += 1;
        }
        manifest_scenes.push(ManifestScene {
            id: built.scene_id,
            seed: built.seed,
            records: records.len(),
            file: file_rel,
            instances: built.instances,
        });
    }

    let manifest = Manifest {
        seed: cfg.seed,
        hand_name: hand.name.clone(),
        hand_spec: cfg.hand.spec_string(),
        tau: cfg.tau,
        mu: cfg.mu,
        crop_radius: cfg.crop_radius,
        crop_height: cfg.crop_height,
        grasps_per_object: cfg.grasps_per_object,
        objects_per_scene: cfg.objects_per_scene,
        class_histogram,
        objects: manifest_objects,
        scenes: manifest_scenes,
    };
    manifest.write(&cfg.out_dir)?;
    Ok(manifest)
}

struct SceneBuild {
    scene_id: usize,
    seed: u64,
    records: Vec<DatasetRecord>,
    crop_blobs: Vec<Blob>,
    hand_blobs: Vec<Blob>,
    instances: Vec<ManifestInstance>,
    scene_file: SceneFile,
}

fn build_scene(
    scene_id: usize,
    cfg: &DatasetConfig,
    hand: &HandModel,
    prepared: &[PreparedObject],
    library: &[Arc<IndexedObject>],
    region: PlacementRegion,
    seed: u64,
) -> Result<SceneBuild, DataError> {
    let scene = generate_cluttered_scene(library, cfg.objects_per_scene, region, seed)?;

    let mut records = Vec::new();
    let mut crop_blobs = Vec::new();
    let mut hand_blobs = Vec::new();
    let mut instances = Vec::new();
    let mut scene_objects = Vec::new();

    for (instance_idx, placed) in scene.objects.iter().enumerate() {
        let object = &prepared[placed.library_id];
        let q = placed.pose.rotation.quaternion();
        instances.push(ManifestInstance {
            library_id: placed.library_id,
            quaternion: [q.w, q.i, q.j, q.k],
            translation: [
                placed.pose.translation.x,
                placed.pose.translation.y,
                placed.pose.translation.z,
            ],
        });
        scene_objects.push(SceneFileObject {
            name: object.name.clone(),
            mesh: format!("../../objects/{}.obj", object.name),
            quaternion: [q.w, q.i, q.j, q.k],
            translation: [
                placed.pose.translation.x,
                placed.pose.translation.y,
                placed.pose.translation.z,
            ],
            cloud_seed: object.cloud_seed,
        });

        for candidate in &object.candidates {
            // Transplant: hand pose in the scene frame.
            let world_wrist = placed.pose.compose(&candidate.pose.wrist);
            let world_pose = HandPose::new(world_wrist, candidate.pose.joints.clone());
            let report = collision_score(hand, &world_pose, &scene, instance_idx)?;
            let q2 = report.q2 as f32;
            let label = label_class(candidate.q1 as f64, &report);
            // Class from the stored (f32) values so records revalidate.
            let class = if q2 > 0.0 {
                0
            } else if candidate.q1 >= 0.5 {
                2
            } else {
                1
            };
            debug_assert_eq!(class, label.class);

            let crop = crop_cylinder(
                &scene.cloud,
                &world_wrist,
                cfg.crop_radius,
                cfg.crop_height,
            )?;
            let hand_cloud_local = hand.surface_cloud(&HandPose::new(
                RigidTransform::identity(),
                candidate.pose.joints.clone(),
            ))?;

            records.push(DatasetRecord {
                scene_id: scene_id as u32,
                object_instance: instance_idx as u32,
                library_id: placed.library_id as u32,
                quaternion: candidate.quaternion,
                translation: candidate.translation,
                joints: candidate.joints.clone(),
                q1: candidate.q1,
                q2,
                class,
                omega: candidate.omega.classes.clone(),
                omega_d: candidate.omega_d.clone(),
                object_cloud_blob: object.cloud_blob.clone(),
                // Filled in by the writer once blobs are on disk.
                crop_blob: String::new(),
                hand_cloud_blob: String::new(),
            });
            crop_blobs.push(points_blob_of(&crop));
            hand_blobs.push(hand_blob_of(&hand_cloud_local));
        }
    }

    Ok(SceneBuild {
        scene_id,
        seed,
        records,
        crop_blobs,
        hand_blobs,
        instances,
        scene_file: SceneFile {
            seed,
            objects: scene_objects,
        },
    })
}

/// Object cloud blob: rows of `x y z nx ny nz`.
pub fn cloud_blob_of(cloud: &PointCloud) -> Blob {
    let normals = cloud.normals.as_ref().expect("object clouds carry normals");
    let mut data = Vec::with_capacity(cloud.len() * 6);
    for (p, n) in cloud.points.iter().zip(normals) {
        data.extend_from_slice(&[
            p.x as f32, p.y as f32, p.z as f32, n.x as f32, n.y as f32, n.z as f32,
        ]);
    }
    Blob::new(cloud.len() as u32, 6, data)
}

/// Plain xyz blob (crops).
pub fn points_blob_of(cloud: &PointCloud) -> Blob {
    let mut data = Vec::with_capacity(cloud.len() * 3);
    for p in &cloud.points {
        data.extend_from_slice(&[p.x as f32, p.y as f32, p.z as f32]);
    }
    Blob::new(cloud.len() as u32, 3, data)
}

/// Hand cloud blob: rows of `x y z label`.
pub fn hand_blob_of(cloud: &graspforge_core::hand::HandSurfaceCloud) -> Blob {
    let mut data = Vec::with_capacity(cloud.len() * 4);
    for (p, &l) in cloud.points.iter().zip(&cloud.labels) {
        data.extend_from_slice(&[p.x as f32, p.y as f32, p.z as f32, l as f32]);
    }
    Blob::new(cloud.len() as u32, 4, data)
}

/// Rebuild a `PointCloud` with normals from an object-cloud blob.
pub fn cloud_from_blob(blob: &Blob) -> Result<PointCloud, DataError> {
    if blob.cols != 6 {
        return Err(DataError::Precondition(format!(
            "object cloud blob needs 6 columns, found {}",
            blob.cols
        )));
    }
    let mut points = Vec::with_capacity(blob.rows as usize);
    let mut normals = Vec::with_capacity(blob.rows as usize);
    for r in 0..blob.rows as usize {
        let row = &blob.data[r * 6..(r + 1) * 6];
        points.push(Point3::new(row[0] as f64, row[1] as f64, row[2] as f64));
        normals.push(Vector3::new(row[3] as f64, row[4] as f64, row[5] as f64));
    }
    Ok(PointCloud {
        points,
        normals: Some(normals),
        labels: None,
    })
}

/// Re-derive every record's contact map and class from its stored pose and
/// blobs; any mismatch is an error. Returns the number of records checked.
pub fn revalidate_dataset(dataset_root: impl AsRef<Path>) -> Result<usize, DataError> {
    let root = dataset_root.as_ref();
    let manifest = Manifest::read(root)?;
    let hand = HandSpec::parse(&manifest.hand_spec).build()?;

    let mut histogram = [0usize; 3];
    let mut checked = 0usize;
    for scene in &manifest.scenes {
        let records = read_records(root.join(&scene.file))?;
        if records.len() != scene.records {
            return Err(DataError::Revalidation(format!(
                "scene {}: manifest says {} records, file has {}",
                scene.id,
                scene.records,
                records.len()
            )));
        }
        for (idx, record) in records.iter().enumerate() {
            let at = format!("scene {} record {idx}", scene.id);
            histogram[record.class as usize] += 1;

            // Class must follow the stored scores.
            let expected_class = if record.q2 > 0.0 {
                0
            } else if record.q1 >= 0.5 {
                2
            } else {
                1
            };
            if record.class != expected_class {
                return Err(DataError::Revalidation(format!(
                    "{at}: class {} but scores imply {expected_class}",
                    record.class
                )));
            }

            // Omega must recompute exactly from the stored pose + cloud.
            let blob = read_blob(root, &record.object_cloud_blob)?;
            let object_cloud = cloud_from_blob(&blob)?;
            let pose = pose_from_stored(&record.quaternion, &record.translation, &record.joints);
            let hand_cloud = hand.surface_cloud(&pose)?;
            let omega = contact_semantic_map(&hand_cloud, &object_cloud, manifest.tau)?;
            if omega.classes != record.omega {
                let diff = omega
                    .classes
                    .iter()
                    .zip(&record.omega)
                    .filter(|(a, b)| a != b)
                    .count();
                return Err(DataError::Revalidation(format!(
                    "{at}: stored omega differs from recompute at {diff} points"
                )));
            }
            checked += 1;
        }
    }
    if histogram != manifest.class_histogram {
        return Err(DataError::Revalidation(format!(
            "class histogram {:?} disagrees with manifest {:?}",
            histogram, manifest.class_histogram
        )));
    }
    Ok(checked)
}
