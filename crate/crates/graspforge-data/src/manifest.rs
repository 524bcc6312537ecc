//! The dataset manifest: a line-oriented, diffable text file recording the
//! generation config, object library, scene tables and class statistics.

use std::collections::HashMap;
use std::path::Path;

use crate::error::DataError;

pub const MANIFEST_HEADER: &str = "graspforge-dataset v1";

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestObject {
    pub name: String,
    /// Mesh path relative to the dataset root.
    pub mesh: String,
    /// Seed of the canonical 2048-point cloud.
    pub cloud_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestInstance {
    pub library_id: usize,
    /// Wrist-frame-free placement: object pose in the scene (w x y z).
    pub quaternion: [f64; 4],
    pub translation: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestScene {
    pub id: usize,
    pub seed: u64,
    pub records: usize,
    /// Records file relative to the dataset root.
    pub file: String,
    pub instances: Vec<ManifestInstance>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub seed: u64,
    pub hand_name: String,
    /// How to reconstruct the hand: `builtin:<name>` or a config path.
    pub hand_spec: String,
    pub tau: f64,
    pub mu: f64,
    pub crop_radius: f64,
    pub crop_height: f64,
    pub grasps_per_object: usize,
    pub objects_per_scene: usize,
    pub class_histogram: [usize; 3],
    pub objects: Vec<ManifestObject>,
    pub scenes: Vec<ManifestScene>,
}

impl Manifest {
    pub fn record_total(&self) -> usize {
        self.scenes.iter().map(|s| s.records).sum()
    }

    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "{MANIFEST_HEADER}");
        let _ = writeln!(out, "seed: {}", self.seed);
        let _ = writeln!(out, "hand: {}", self.hand_name);
        let _ = writeln!(out, "hand_spec: {}", self.hand_spec);
        let _ = writeln!(out, "tau: {}", self.tau);
        let _ = writeln!(out, "mu: {}", self.mu);
        let _ = writeln!(out, "crop_radius: {}", self.crop_radius);
        let _ = writeln!(out, "crop_height: {}", self.crop_height);
        let _ = writeln!(out, "grasps_per_object: {}", self.grasps_per_object);
        let _ = writeln!(out, "objects_per_scene: {}", self.objects_per_scene);
        let _ = writeln!(out, "record_total: {}", self.record_total());
        let _ = writeln!(
            out,
            "class_histogram: {} {} {}",
            self.class_histogram[0], self.class_histogram[1], self.class_histogram[2]
        );
        for (i, o) in self.objects.iter().enumerate() {
            let _ = writeln!(
                out,
                "object {i}: name={} mesh={} cloud_seed={}",
                o.name, o.mesh, o.cloud_seed
            );
        }
        for s in &self.scenes {
            let _ = writeln!(
                out,
                "scene {}: seed={} records={} file={}",
                s.id, s.seed, s.records, s.file
            );
            for (k, inst) in s.instances.iter().enumerate() {
                let q = inst.quaternion;
                let t = inst.translation;
                let _ = writeln!(
                    out,
                    "scene {} instance {k}: object={} quat={} {} {} {} trans={} {} {}",
                    s.id, inst.library_id, q[0], q[1], q[2], q[3], t[0], t[1], t[2]
                );
            }
        }
        out
    }

    pub fn write(&self, dataset_root: impl AsRef<Path>) -> Result<(), DataError> {
        let path = dataset_root.as_ref().join("manifest.txt");
        std::fs::write(&path, self.to_text())
            .map_err(|e| DataError::io(path.display().to_string(), e))
    }

    pub fn read(dataset_root: impl AsRef<Path>) -> Result<Manifest, DataError> {
        let path = dataset_root.as_ref().join("manifest.txt");
        let text = std::fs::read_to_string(&path)
            .map_err(|e| DataError::io(path.display().to_string(), e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, path: &str) -> Result<Manifest, DataError> {
        let bad = |msg: String| DataError::format(path, msg);
        let mut lines = text.lines();
        if lines.next() != Some(MANIFEST_HEADER) {
            return Err(bad("missing manifest header".into()));
        }

        let mut fields: HashMap<String, String> = HashMap::new();
        let mut objects: Vec<ManifestObject> = Vec::new();
        let mut scenes: Vec<ManifestScene> = Vec::new();

        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("object ") {
                let (_idx, kv) = rest
                    .split_once(':')
                    .ok_or_else(|| bad(format!("bad object line: {line}")))?;
                let map = parse_kv(kv);
                objects.push(ManifestObject {
                    name: map.get("name").cloned().ok_or_else(|| bad("object missing name".into()))?,
                    mesh: map.get("mesh").cloned().ok_or_else(|| bad("object missing mesh".into()))?,
                    cloud_seed: parse_num(&map, "cloud_seed", path)?,
                });
            } else if let Some(rest) = line.strip_prefix("scene ") {
                if rest.contains(" instance ") {
                    let (ids, kv) = rest
                        .split_once(':')
                        .ok_or_else(|| bad(format!("bad instance line: {line}")))?;
                    let scene_id: usize = ids
                        .split_whitespace()
                        .next()
                        .unwrap()
                        .parse()
                        .map_err(|_| bad(format!("bad scene id in: {line}")))?;
                    let map = parse_kv(kv);
                    let quat = parse_floats(&map, "quat", 4, path)?;
                    let trans = parse_floats(&map, "trans", 3, path)?;
                    let scene = scenes
                        .iter_mut()
                        .find(|s| s.id == scene_id)
                        .ok_or_else(|| bad(format!("instance before scene {scene_id}")))?;
                    scene.instances.push(ManifestInstance {
                        library_id: parse_num(&map, "object", path)? as usize,
                        quaternion: [quat[0], quat[1], quat[2], quat[3]],
                        translation: [trans[0], trans[1], trans[2]],
                    });
                } else {
                    let (id, kv) = rest
                        .split_once(':')
                        .ok_or_else(|| bad(format!("bad scene line: {line}")))?;
                    let map = parse_kv(kv);
                    scenes.push(ManifestScene {
                        id: id.trim().parse().map_err(|_| bad(format!("bad scene id: {id}")))?,
                        seed: parse_num(&map, "seed", path)?,
                        records: parse_num(&map, "records", path)? as usize,
                        file: map.get("file").cloned().ok_or_else(|| bad("scene missing file".into()))?,
                        instances: Vec::new(),
                    });
                }
            } else if let Some((key, value)) = line.split_once(':') {
                fields.insert(key.trim().to_string(), value.trim().to_string());
            } else {
                return Err(bad(format!("unparseable line: {line}")));
            }
        }

        let get = |key: &str| -> Result<String, DataError> {
            fields
                .get(key)
                .cloned()
                .ok_or_else(|| DataError::format(path, format!("missing field '{key}'")))
        };
        let num = |key: &str| -> Result<f64, DataError> {
            get(key)?
                .parse()
                .map_err(|_| DataError::format(path, format!("bad number in '{key}'")))
        };

        let hist_text = get("class_histogram")?;
        let hist: Vec<usize> = hist_text
            .split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad("bad class histogram".into()))?;
        if hist.len() != 3 {
            return Err(bad("class histogram needs 3 entries".into()));
        }

        let manifest = Manifest {
            seed: num("seed")? as u64,
            hand_name: get("hand")?,
            hand_spec: get("hand_spec")?,
            tau: num("tau")?,
            mu: num("mu")?,
            crop_radius: num("crop_radius")?,
            crop_height: num("crop_height")?,
            grasps_per_object: num("grasps_per_object")? as usize,
            objects_per_scene: num("objects_per_scene")? as usize,
            class_histogram: [hist[0], hist[1], hist[2]],
            objects,
            scenes,
        };
        let declared = num("record_total")? as usize;
        if declared != manifest.record_total() {
            return Err(bad(format!(
                "record_total {declared} disagrees with scene table {}",
                manifest.record_total()
            )));
        }
        Ok(manifest)
    }
}

fn parse_kv(s: &str) -> HashMap<String, String> {
    // key=value tokens; `quat`/`trans` swallow following bare numbers.
    let mut out: HashMap<String, String> = HashMap::new();
    let mut current: Option<String> = None;
    for token in s.split_whitespace() {
        if let Some((k, v)) = token.split_once('=') {
            current = Some(k.to_string());
            out.insert(k.to_string(), v.to_string());
        } else if let Some(k) = &current {
            let entry = out.get_mut(k).unwrap();
            entry.push(' ');
            entry.push_str(token);
        }
    }
    out
}

fn parse_num(map: &HashMap<String, String>, key: &str, path: &str) -> Result<u64, DataError> {
    map.get(key)
        .and_then(|v| v.parse::<u64>().ok())
        .ok_or_else(|| DataError::format(path, format!("missing or bad '{key}'")))
}

fn parse_floats(
    map: &HashMap<String, String>,
    key: &str,
    count: usize,
    path: &str,
) -> Result<Vec<f64>, DataError> {
    let text = map
        .get(key)
        .ok_or_else(|| DataError::format(path, format!("missing '{key}'")))?;
    let values: Vec<f64> = text
        .split_whitespace()
        .map(|s| s.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| DataError::format(path, format!("bad floats in '{key}'")))?;
    if values.len() != count {
        return Err(DataError::format(
            path,
            format!("'{key}' needs {count} floats, found {}", values.len()),
        ));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Manifest {
        Manifest {
            seed: 42,
            hand_name: "graspforge_five_finger".into(),
            hand_spec: "builtin:five_finger".into(),
            tau: 0.005,
            mu: 0.5,
            crop_radius: 0.1,
            crop_height: 0.3,
            grasps_per_object: 10,
            objects_per_scene: 3,
            class_histogram: [3, 4, 5],
            objects: vec![ManifestObject {
                name: "sphere_small".into(),
                mesh: "objects/sphere_small.obj".into(),
                cloud_seed: 9001,
            }],
            scenes: vec![ManifestScene {
                id: 0,
                seed: 1234,
                records: 12,
                file: "scenes/0/records.bin".into(),
                instances: vec![ManifestInstance {
                    library_id: 0,
                    quaternion: [0.9238795325112867, 0.0, 0.0, 0.3826834323650898],
                    translation: [0.03, -0.0125, 0.0],
                }],
            }],
        }
    }

    #[test]
    fn text_roundtrip_is_exact() {
        let m = sample();
        let parsed = Manifest::parse(&m.to_text(), "test").unwrap();
        assert_eq!(m, parsed);
    }

    #[test]
    fn missing_header_is_format_error() {
        assert!(matches!(
            Manifest::parse("nonsense\n", "test"),
            Err(DataError::Format { .. })
        ));
    }

    #[test]
    fn inconsistent_totals_are_rejected() {
        let m = sample();
        let text = m.to_text().replace("record_total: 12", "record_total: 99");
        assert!(matches!(
            Manifest::parse(&text, "test"),
            Err(DataError::Format { .. })
        ));
    }
}
