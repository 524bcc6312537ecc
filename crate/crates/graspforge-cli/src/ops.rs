//! Shared plumbing: error-to-exit-code mapping, hand specs, scene loading,
//! and record-to-training-sample conversion.

use std::path::Path;
use std::sync::Arc;

use graspforge_core::contact::ContactSemanticMap;
use graspforge_core::geometry::{load_mesh, PointCloud, Point3, RigidTransform};
use graspforge_core::hand::{HandModel, HandSurfaceCloud};
use graspforge_core::scene::{IndexedObject, PlacedObject, Scene};
use graspforge_core::CoreError;
use graspforge_data::record::{read_blob, Blob, DatasetRecord};
use graspforge_data::synth::{HandSpec, SceneFile};
use graspforge_data::DataError;
use graspforge_learn::evaluator::EvalSample;
use graspforge_learn::evaluator::GraspEvaluator;
use graspforge_learn::LearnError;
use nalgebra::{Quaternion, UnitQuaternion, Vector3};

pub const DOMAIN_EXIT: u8 = 1;
pub const IO_EXIT: u8 = 3;

/// CLI-level error: `Io` maps to exit 3, everything else to exit 1.
/// `Domain` carries a summary that still goes to stdout.
#[derive(Debug)]
pub enum CliError {
    Io(String),
    Failure(String),
    Domain(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Io(m) | CliError::Failure(m) | CliError::Domain(m) => write!(f, "{m}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match &e {
            CoreError::Io { .. } | CoreError::MalformedFile { .. } => CliError::Io(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match &e {
            DataError::Io { .. } | DataError::Format { .. } => CliError::Io(e.to_string()),
            DataError::Core(inner) => match inner {
                CoreError::Io { .. } | CoreError::MalformedFile { .. } => {
                    CliError::Io(e.to_string())
                }
                _ => CliError::Failure(e.to_string()),
            },
            _ => CliError::Failure(e.to_string()),
        }
    }
}

impl From<LearnError> for CliError {
    fn from(e: LearnError) -> Self {
        match &e {
            LearnError::Io { .. } | LearnError::Format { .. } => CliError::Io(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

/// `five_finger`, `four_finger`, `builtin:*`, or a config file path.
pub fn parse_hand_spec(s: &str) -> HandSpec {
    match s {
        "five_finger" | "five" => HandSpec::BuiltinFive,
        "four_finger" | "four" => HandSpec::BuiltinFour,
        other => HandSpec::parse(other),
    }
}

/// A scene rebuilt from a scene.json plus the object clouds it references.
pub struct LoadedScene {
    pub scene: Scene,
    /// Canonical (quantized) 2048-point cloud per instance, object frame.
    pub object_clouds: Vec<PointCloud>,
}

pub fn load_scene(path: &Path) -> Result<LoadedScene, CliError> {
    let file = SceneFile::read(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut placements = Vec::with_capacity(file.objects.len());
    let mut object_clouds = Vec::with_capacity(file.objects.len());
    for (i, obj) in file.objects.iter().enumerate() {
        let mesh_path = if Path::new(&obj.mesh).is_absolute() {
            Path::new(&obj.mesh).to_path_buf()
        } else {
            base.join(&obj.mesh)
        };
        let mesh = load_mesh(&mesh_path)?;
        let cloud = graspforge_data::synth::quantize_cloud(
            &graspforge_core::geometry::sample_surface(
                &mesh,
                graspforge_core::contact::MAP_POINTS,
                obj.cloud_seed,
            )?,
        );
        let indexed = Arc::new(IndexedObject::new(obj.name.clone(), mesh)?);
        let rotation = UnitQuaternion::from_quaternion(Quaternion::new(
            obj.quaternion[0],
            obj.quaternion[1],
            obj.quaternion[2],
            obj.quaternion[3],
        ));
        placements.push(PlacedObject {
            library_id: i,
            object: indexed,
            pose: RigidTransform::from_parts(
                rotation,
                Vector3::new(obj.translation[0], obj.translation[1], obj.translation[2]),
            ),
        });
        object_clouds.push(cloud);
    }
    Ok(LoadedScene {
        scene: Scene::from_placements(placements, file.seed)?,
        object_clouds,
    })
}

/// Rebuild the labeled hand cloud a record's blob describes.
pub fn hand_cloud_from_blob(blob: &Blob) -> Result<HandSurfaceCloud, CliError> {
    if blob.cols != 4 {
        return Err(CliError::Failure(format!(
            "hand cloud blob needs 4 columns, found {}",
            blob.cols
        )));
    }
    let mut points = Vec::with_capacity(blob.rows as usize);
    let mut labels = Vec::with_capacity(blob.rows as usize);
    for r in 0..blob.rows as usize {
        let row = &blob.data[r * 4..(r + 1) * 4];
        points.push(Point3::new(row[0] as f64, row[1] as f64, row[2] as f64));
        labels.push(row[3] as u32);
    }
    Ok(HandSurfaceCloud {
        source_link: vec![0; points.len()],
        fingertip_index: vec![],
        points,
        labels,
    })
}

pub fn points_from_blob(blob: &Blob) -> Result<PointCloud, CliError> {
    if blob.cols != 3 {
        return Err(CliError::Failure(format!(
            "point blob needs 3 columns, found {}",
            blob.cols
        )));
    }
    let points = (0..blob.rows as usize)
        .map(|r| {
            let row = &blob.data[r * 3..(r + 1) * 3];
            Point3::new(row[0] as f64, row[1] as f64, row[2] as f64)
        })
        .collect();
    Ok(PointCloud::from_points(points))
}

/// Extract one evaluator training sample from a record.
pub fn eval_sample_from_record(
    dataset_root: &Path,
    record: &DatasetRecord,
    evaluator: &GraspEvaluator,
) -> Result<EvalSample, CliError> {
    let crop = points_from_blob(&read_blob(dataset_root, &record.crop_blob)?)?;
    let hand_cloud = hand_cloud_from_blob(&read_blob(dataset_root, &record.hand_cloud_blob)?)?;
    let (scene, hand) = evaluator.prepare_inputs(&crop, &hand_cloud)?;
    Ok(EvalSample {
        scene,
        hand,
        label: record.class,
    })
}

/// Rebuild a record's contact map against its object cloud.
pub fn map_from_record(
    dataset_root: &Path,
    record: &DatasetRecord,
    class_count: usize,
) -> Result<(ContactSemanticMap, PointCloud), CliError> {
    let blob = read_blob(dataset_root, &record.object_cloud_blob)?;
    let cloud = graspforge_data::synth::cloud_from_blob(&blob)?;
    let map = ContactSemanticMap::from_classes(
        cloud.points.clone(),
        class_count,
        record.omega.clone(),
    )
    .map_err(CoreError::from)?;
    Ok((map, cloud))
}

/// Hand from a dataset manifest's spec string.
pub fn hand_from_manifest(manifest: &graspforge_data::Manifest) -> Result<HandModel, CliError> {
    Ok(HandSpec::parse(&manifest.hand_spec).build()?)
}
