//! End-to-end dataset synthesis: determinism, revalidation, and the
//! single-object candidate quality profile.

use graspforge_core::contact::MAP_POINTS;
use graspforge_core::geometry::{primitives, sample_surface};
use graspforge_core::hand::{five_finger_config, HandModel};
use graspforge_core::scene::IndexedObject;
use graspforge_data::record::read_records;
use graspforge_data::synth::{
    builtin_object_library, quantize_cloud, revalidate_dataset, synthesize_dataset,
    synthesize_grasps_single, DatasetConfig, HandSpec, SceneFile,
};
use graspforge_data::Manifest;

fn temp_dir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("graspforge_synth_{tag}"));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn hash_dir(dir: &std::path::Path) -> u64 {
    // Order-independent content hash over (relative path, bytes).
    let mut entries = Vec::new();
    fn walk(base: &std::path::Path, dir: &std::path::Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(base, &path, out);
            } else {
                let rel = path.strip_prefix(base).unwrap().display().to_string();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    walk(dir, dir, &mut entries);
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for (name, bytes) in entries {
        for b in name.as_bytes().iter().chain(&bytes) {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

fn small_config(dir: &std::path::Path) -> DatasetConfig {
    DatasetConfig {
        scenes: 2,
        objects_per_scene: 3,
        grasps_per_object: 4,
        ..DatasetConfig::new(dir, 42)
    }
}

#[test]
fn dataset_synthesizes_and_revalidates() {
    let dir = temp_dir("reval");
    let manifest = synthesize_dataset(&small_config(&dir)).unwrap();
    assert_eq!(manifest.scenes.len(), 2);
    let expected: usize = manifest.scenes.iter().map(|s| s.records).sum();
    assert!(expected > 0 && expected <= 2 * 3 * 4);

    let checked = revalidate_dataset(&dir).unwrap();
    assert_eq!(checked, expected);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn synthesis_is_byte_identical_across_runs() {
    let dir_a = temp_dir("det_a");
    let dir_b = temp_dir("det_b");
    synthesize_dataset(&small_config(&dir_a)).unwrap();
    synthesize_dataset(&small_config(&dir_b)).unwrap();
    // manifest.txt is identical text; compare whole trees by content.
    assert_eq!(
        std::fs::read(dir_a.join("manifest.txt")).unwrap(),
        std::fs::read(dir_b.join("manifest.txt")).unwrap()
    );
    assert_eq!(hash_dir(&dir_a), hash_dir(&dir_b));
    let _ = std::fs::remove_dir_all(&dir_a);
    let _ = std::fs::remove_dir_all(&dir_b);
}

#[test]
fn colliding_records_are_class_zero() {
    let dir = temp_dir("classes");
    let manifest = synthesize_dataset(&small_config(&dir)).unwrap();
    let mut seen = 0;
    for scene in &manifest.scenes {
        for record in read_records(dir.join(&scene.file)).unwrap() {
            if record.q2 > 0.0 {
                assert_eq!(record.class, 0, "colliding record not class 0");
            }
            assert_eq!(record.omega.len(), MAP_POINTS);
            assert_eq!(record.omega_d.len(), MAP_POINTS);
            seen += 1;
        }
    }
    assert_eq!(seen, manifest.record_total());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn manifest_histogram_matches_records() {
    let dir = temp_dir("hist");
    let manifest = synthesize_dataset(&small_config(&dir)).unwrap();
    let mut hist = [0usize; 3];
    for scene in &manifest.scenes {
        for record in read_records(dir.join(&scene.file)).unwrap() {
            hist[record.class as usize] += 1;
        }
    }
    assert_eq!(hist, manifest.class_histogram);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn scene_files_reference_loadable_meshes() {
    let dir = temp_dir("scenefiles");
    let manifest = synthesize_dataset(&small_config(&dir)).unwrap();
    for scene in &manifest.scenes {
        let scene_path = dir.join(format!("scenes/{}/scene.json", scene.id));
        let scene_file = SceneFile::read(&scene_path).unwrap();
        assert_eq!(scene_file.objects.len(), scene.instances.len());
        for obj in &scene_file.objects {
            let mesh_path = scene_path.parent().unwrap().join(&obj.mesh);
            assert!(mesh_path.exists(), "missing {}", mesh_path.display());
            graspforge_core::geometry::load_mesh(&mesh_path).unwrap();
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn manifest_roundtrips_from_disk() {
    let dir = temp_dir("manifest_rt");
    let manifest = synthesize_dataset(&small_config(&dir)).unwrap();
    let read_back = Manifest::read(&dir).unwrap();
    assert_eq!(manifest, read_back);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn graspable_sphere_yields_reliable_candidates() {
    // The harness target: on a graspable sphere at least 30% of candidates
    // reach Q1 >= 0.5.
    let hand = HandModel::from_config(five_finger_config()).unwrap();
    let (name, mesh) = builtin_object_library().swap_remove(0);
    assert_eq!(name, "sphere_small");
    let cloud = quantize_cloud(&sample_surface(&mesh, MAP_POINTS, 9001).unwrap());
    let object = IndexedObject::new(name, mesh).unwrap();
    let candidates =
        synthesize_grasps_single(&object, &cloud, &hand, 50, 0.005, 0.5, 31).unwrap();
    assert_eq!(candidates.len(), 50);
    let reliable = candidates.iter().filter(|c| c.q1 >= 0.5).count();
    eprintln!(
        "sphere candidates: {reliable}/50 reliable, contact histogram {:?}",
        candidates.iter().map(|c| c.contact_fingers).sum::<usize>() as f64 / 50.0
    );
    assert!(
        reliable * 100 >= 30 * 50,
        "only {reliable}/50 candidates reached Q1 >= 0.5"
    );
}

#[test]
fn zero_grasps_is_precondition_error() {
    let hand = HandModel::from_config(five_finger_config()).unwrap();
    let mesh = primitives::uv_sphere(0.03, 16, 32);
    let cloud = quantize_cloud(&sample_surface(&mesh, MAP_POINTS, 1).unwrap());
    let object = IndexedObject::new("s", mesh).unwrap();
    assert!(synthesize_grasps_single(&object, &cloud, &hand, 0, 0.005, 0.5, 1).is_err());
}

#[test]
fn single_object_candidates_are_deterministic() {
    let hand = HandModel::from_config(five_finger_config()).unwrap();
    let mesh = primitives::uv_sphere(0.03, 16, 32);
    let cloud = quantize_cloud(&sample_surface(&mesh, MAP_POINTS, 1).unwrap());
    let object = IndexedObject::new("s", mesh).unwrap();
    let a = synthesize_grasps_single(&object, &cloud, &hand, 6, 0.005, 0.5, 7).unwrap();
    let b = synthesize_grasps_single(&object, &cloud, &hand, 6, 0.005, 0.5, 7).unwrap();
    for (ca, cb) in a.iter().zip(&b) {
        assert_eq!(ca.quaternion, cb.quaternion);
        assert_eq!(ca.translation, cb.translation);
        assert_eq!(ca.joints, cb.joints);
        assert_eq!(ca.q1, cb.q1);
        assert_eq!(ca.omega.classes, cb.omega.classes);
    }
}

#[test]
fn four_finger_dataset_also_synthesizes() {
    let dir = temp_dir("fourfinger");
    let cfg = DatasetConfig {
        hand: HandSpec::BuiltinFour,
        scenes: 1,
        objects_per_scene: 2,
        grasps_per_object: 3,
        ..DatasetConfig::new(&dir, 5)
    };
    let manifest = synthesize_dataset(&cfg).unwrap();
    assert!(manifest.record_total() > 0);
    assert_eq!(revalidate_dataset(&dir).unwrap(), manifest.record_total());
    let _ = std::fs::remove_dir_all(&dir);
}
