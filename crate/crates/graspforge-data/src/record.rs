//! Binary grasp records and the content-addressed blob store.
//!
//! Record files carry an 8-byte magic, a version and a record count; each
//! record is positional (fixed field order) with little-endian scalars.
//! Poses are stored as f32 (quaternion + translation + joint vector) in the
//! grasped object's frame; contact maps as 2048 class indices (u16) and
//! 2048 f32 distances. Point-cloud blobs live in `blobs/<fnv64-hex>.f32`
//! files holding `rows, cols` and row-major f32 data.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::DataError;

pub const RECORD_MAGIC: &[u8; 8] = b"GFDS0001";
pub const RECORD_VERSION: u32 = 1;
const PER_RECORD_TAG: u32 = 0x4746_5245; // "GFRE"
pub const MAP_POINTS: usize = graspforge_core::contact::MAP_POINTS;

/// One serialized grasp sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub scene_id: u32,
    /// Instance index within the scene.
    pub object_instance: u32,
    /// Index into the manifest's object table.
    pub library_id: u32,
    /// Wrist rotation (w, x, y, z) in the object frame.
    pub quaternion: [f32; 4],
    pub translation: [f32; 3],
    pub joints: Vec<f32>,
    pub q1: f32,
    pub q2: f32,
    pub class: u8,
    /// Contact semantic map as class indices.
    pub omega: Vec<u16>,
    /// Contact distance map (meters).
    pub omega_d: Vec<f32>,
    pub object_cloud_blob: String,
    pub crop_blob: String,
    pub hand_cloud_blob: String,
}

impl DatasetRecord {
    fn write_into(&self, buf: &mut Vec<u8>) {
        buf.extend_from_slice(&PER_RECORD_TAG.to_le_bytes());
        buf.extend_from_slice(&self.scene_id.to_le_bytes());
        buf.extend_from_slice(&self.object_instance.to_le_bytes());
        buf.extend_from_slice(&self.library_id.to_le_bytes());
        for v in self.quaternion {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in self.translation {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&(self.joints.len() as u32).to_le_bytes());
        for v in &self.joints {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&self.q1.to_le_bytes());
        buf.extend_from_slice(&self.q2.to_le_bytes());
        buf.push(self.class);
        debug_assert_eq!(self.omega.len(), MAP_POINTS);
        debug_assert_eq!(self.omega_d.len(), MAP_POINTS);
        for v in &self.omega {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.omega_d {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for s in [&self.object_cloud_blob, &self.crop_blob, &self.hand_cloud_blob] {
            debug_assert_eq!(s.len(), 16, "blob refs are 16 hex chars");
            buf.extend_from_slice(s.as_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    cur: usize,
    path: &'a str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DataError> {
        if self.cur + n > self.bytes.len() {
            return Err(DataError::format(self.path, "truncated record file"));
        }
        let s = &self.bytes[self.cur..self.cur + n];
        self.cur += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, DataError> {
        let s = self.take(4)?;
        Ok(u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
    }

    fn f32(&mut self) -> Result<f32, DataError> {
        let s = self.take(4)?;
        Ok(f32::from_le_bytes([s[0], s[1], s[2], s[3]]))
    }

    fn u16(&mut self) -> Result<u16, DataError> {
        let s = self.take(2)?;
        Ok(u16::from_le_bytes([s[0], s[1]]))
    }
}

/// Write all records into one file (header + count + records).
pub fn write_records(path: impl AsRef<Path>, records: &[DatasetRecord]) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(64 + records.len() * (MAP_POINTS * 6 + 128));
    buf.extend_from_slice(RECORD_MAGIC);
    buf.extend_from_slice(&RECORD_VERSION.to_le_bytes());
    buf.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for r in records {
        r.write_into(&mut buf);
    }
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| DataError::io(parent.display().to_string(), e))?;
    }
    let mut file =
        std::fs::File::create(path).map_err(|e| DataError::io(path.display().to_string(), e))?;
    file.write_all(&buf)
        .map_err(|e| DataError::io(path.display().to_string(), e))
}

/// Read a record file written by [`write_records`]. Truncated or corrupt
/// input yields a format error and no partial records.
pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>, DataError> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| DataError::io(path.display().to_string(), e))?;
    let display = path.display().to_string();
    let mut r = Reader {
        bytes: &bytes,
        cur: 0,
        path: &display,
    };
    if r.take(8)? != RECORD_MAGIC {
        return Err(DataError::format(&display, "bad magic number"));
    }
    let version = r.u32()?;
    if version != RECORD_VERSION {
        return Err(DataError::format(
            &display,
            format!("unsupported version {version}"),
        ));
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        if r.u32()? != PER_RECORD_TAG {
            return Err(DataError::format(&display, "bad record tag"));
        }
        let scene_id = r.u32()?;
        let object_instance = r.u32()?;
        let library_id = r.u32()?;
        let mut quaternion = [0.0f32; 4];
        for q in &mut quaternion {
            *q = r.f32()?;
        }
        let mut translation = [0.0f32; 3];
        for t in &mut translation {
            *t = r.f32()?;
        }
        let dof = r.u32()? as usize;
        if dof > 256 {
            return Err(DataError::format(&display, "implausible joint count"));
        }
        let mut joints = Vec::with_capacity(dof);
        for _ in 0..dof {
            joints.push(r.f32()?);
        }
        let q1 = r.f32()?;
        let q2 = r.f32()?;
        let class = r.take(1)?[0];
        if class > 2 {
            return Err(DataError::format(&display, "class out of range"));
        }
        let mut omega = Vec::with_capacity(MAP_POINTS);
        for _ in 0..MAP_POINTS {
            omega.push(r.u16()?);
        }
        let mut omega_d = Vec::with_capacity(MAP_POINTS);
        for _ in 0..MAP_POINTS {
            omega_d.push(r.f32()?);
        }
        let mut blobs = Vec::with_capacity(3);
        for _ in 0..3 {
            let raw = r.take(16)?;
            let s = std::str::from_utf8(raw)
                .map_err(|_| DataError::format(&display, "bad blob reference"))?;
            blobs.push(s.to_string());
        }
        out.push(DatasetRecord {
            scene_id,
            object_instance,
            library_id,
            quaternion,
            translation,
            joints,
            q1,
            q2,
            class,
            omega,
            omega_d,
            object_cloud_blob: blobs[0].clone(),
            crop_blob: blobs[1].clone(),
            hand_cloud_blob: blobs[2].clone(),
        });
    }
    if r.cur != bytes.len() {
        return Err(DataError::format(&display, "trailing bytes after records"));
    }
    Ok(out)
}

/// Single-record convenience wrappers (a one-record container file).
pub fn write_record(path: impl AsRef<Path>, record: &DatasetRecord) -> Result<(), DataError> {
    write_records(path, std::slice::from_ref(record))
}

pub fn read_record(path: impl AsRef<Path>) -> Result<DatasetRecord, DataError> {
    let path = path.as_ref();
    let mut all = read_records(path)?;
    if all.len() != 1 {
        return Err(DataError::format(
            path.display().to_string(),
            format!("expected 1 record, found {}", all.len()),
        ));
    }
    Ok(all.pop().unwrap())
}

/// A row-major f32 matrix blob (clouds, with rows = points).
#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    pub rows: u32,
    pub cols: u32,
    pub data: Vec<f32>,
}

impl Blob {
    pub fn new(rows: u32, cols: u32, data: Vec<f32>) -> Self {
        assert_eq!((rows * cols) as usize, data.len());
        Blob { rows, cols, data }
    }

    fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(8 + self.data.len() * 4);
        buf.extend_from_slice(&self.rows.to_le_bytes());
        buf.extend_from_slice(&self.cols.to_le_bytes());
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Write a blob into `blobs/` under the dataset root, content-addressed;
/// returns the 16-hex-char reference. Identical content dedups to one
/// file; the temp-and-rename dance keeps concurrent writers of the same
/// hash from interleaving.
pub fn write_blob(dataset_root: impl AsRef<Path>, blob: &Blob) -> Result<String, DataError> {
    let bytes = blob.to_bytes();
    let hash = format!("{:016x}", fnv1a64(&bytes));
    let dir = dataset_root.as_ref().join("blobs");
    std::fs::create_dir_all(&dir).map_err(|e| DataError::io(dir.display().to_string(), e))?;
    let path = dir.join(format!("{hash}.f32"));
    if !path.exists() {
        let tmp = dir.join(format!(
            "{hash}.f32.tmp-{:x}",
            std::process::id() as u64 ^ (&bytes as *const _ as u64)
        ));
        std::fs::write(&tmp, &bytes).map_err(|e| DataError::io(tmp.display().to_string(), e))?;
        std::fs::rename(&tmp, &path).map_err(|e| DataError::io(path.display().to_string(), e))?;
    }
    Ok(hash)
}

pub fn blob_path(dataset_root: impl AsRef<Path>, reference: &str) -> PathBuf {
    dataset_root.as_ref().join("blobs").join(format!("{reference}.f32"))
}

pub fn read_blob(dataset_root: impl AsRef<Path>, reference: &str) -> Result<Blob, DataError> {
    let path = blob_path(dataset_root, reference);
    let bytes =
        std::fs::read(&path).map_err(|e| DataError::io(path.display().to_string(), e))?;
    let display = path.display().to_string();
    if bytes.len() < 8 {
        return Err(DataError::format(&display, "blob too short"));
    }
    let rows = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    let cols = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]);
    let need = 8 + (rows as usize) * (cols as usize) * 4;
    if bytes.len() != need {
        return Err(DataError::format(&display, "blob size mismatch"));
    }
    let mut data = Vec::with_capacity((rows * cols) as usize);
    for k in 0..(rows * cols) as usize {
        let s = &bytes[8 + 4 * k..12 + 4 * k];
        data.push(f32::from_le_bytes([s[0], s[1], s[2], s[3]]));
    }
    Ok(Blob { rows, cols, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_record(scene: u32) -> DatasetRecord {
        DatasetRecord {
            scene_id: scene,
            object_instance: 1,
            library_id: 2,
            quaternion: [1.0, 0.0, 0.0, 0.0],
            translation: [0.05, -0.02, 0.11],
            joints: vec![0.1; 15],
            q1: 0.75,
            q2: 0.0,
            class: 2,
            omega: (0..MAP_POINTS).map(|i| (i % 6) as u16).collect(),
            omega_d: (0..MAP_POINTS).map(|i| i as f32 * 1e-4).collect(),
            object_cloud_blob: "0123456789abcdef".into(),
            crop_blob: "fedcba9876543210".into(),
            hand_cloud_blob: "00000000deadbeef".into(),
        }
    }

    #[test]
    fn roundtrip_is_exact() {
        let dir = std::env::temp_dir().join("graspforge_records_roundtrip.bin");
        let records = vec![sample_record(0), sample_record(1)];
        write_records(&dir, &records).unwrap();
        let back = read_records(&dir).unwrap();
        assert_eq!(records, back);
        let _ = std::fs::remove_file(&dir);
    }

    #[test]
    fn truncated_file_is_format_error_without_partials() {
        let dir = std::env::temp_dir().join("graspforge_records_trunc.bin");
        write_records(&dir, &[sample_record(0)]).unwrap();
        let full = std::fs::read(&dir).unwrap();
        std::fs::write(&dir, &full[..full.len() - 100]).unwrap();
        assert!(matches!(
            read_records(&dir),
            Err(DataError::Format { .. })
        ));
        let _ = std::fs::remove_file(&dir);
    }

    #[test]
    fn corrupt_magic_is_format_error() {
        let dir = std::env::temp_dir().join("graspforge_records_magic.bin");
        write_records(&dir, &[sample_record(0)]).unwrap();
        let mut bytes = std::fs::read(&dir).unwrap();
        bytes[0] = b'X';
        std::fs::write(&dir, &bytes).unwrap();
        assert!(matches!(read_records(&dir), Err(DataError::Format { .. })));
        let _ = std::fs::remove_file(&dir);
    }

    #[test]
    fn single_record_wrappers() {
        let dir = std::env::temp_dir().join("graspforge_record_single.bin");
        let rec = sample_record(7);
        write_record(&dir, &rec).unwrap();
        assert_eq!(read_record(&dir).unwrap(), rec);
        let _ = std::fs::remove_file(&dir);
    }

    #[test]
    fn blob_store_dedups_and_roundtrips() {
        let root = std::env::temp_dir().join("graspforge_blob_test");
        let _ = std::fs::remove_dir_all(&root);
        let blob = Blob::new(4, 3, (0..12).map(|i| i as f32 * 0.5).collect());
        let a = write_blob(&root, &blob).unwrap();
        let b = write_blob(&root, &blob).unwrap();
        assert_eq!(a, b);
        let files: Vec<_> = std::fs::read_dir(root.join("blobs")).unwrap().collect();
        assert_eq!(files.len(), 1);
        assert_eq!(read_blob(&root, &a).unwrap(), blob);
        let _ = std::fs::remove_dir_all(&root);
    }
}
