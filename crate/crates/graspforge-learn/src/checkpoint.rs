//! Model checkpoints: versioned header plus named parameter blobs.
//!
//! Layout (all integers little-endian u32 unless noted):
//!
//! ```text
//! magic  [u8; 8] = b"GFCKPT01"
//! kind_len, kind utf-8            (model identifier)
//! cfg_len,  cfg utf-8             (model config as JSON)
//! param_count
//! per parameter:
//!   name_len, name utf-8
//!   rows, cols
//!   rows*cols f32 values, little-endian, row-major
//! ```

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::LearnError;
use crate::mat::Mat;
use crate::trainer::ParamSet;

const MAGIC: &[u8; 8] = b"GFCKPT01";

pub fn save(
    path: impl AsRef<Path>,
    kind: &str,
    cfg_json: &str,
    params: &ParamSet,
) -> Result<(), LearnError> {
    let path = path.as_ref();
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    write_str(&mut buf, kind);
    write_str(&mut buf, cfg_json);
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, mat) in params.iter() {
        write_str(&mut buf, name);
        buf.extend_from_slice(&(mat.rows as u32).to_le_bytes());
        buf.extend_from_slice(&(mat.cols as u32).to_le_bytes());
        for &v in &mat.data {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path)
        .map_err(|e| LearnError::io(path.display().to_string(), e))?;
    file.write_all(&buf)
        .map_err(|e| LearnError::io(path.display().to_string(), e))
}

/// Reads the header and all blobs. Returns `(kind, cfg_json, name -> Mat)`.
pub fn load(
    path: impl AsRef<Path>,
) -> Result<(String, String, HashMap<String, Mat>), LearnError> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| LearnError::io(path.display().to_string(), e))?;
    let p = path.display().to_string();
    let mut cur = 0usize;

    let take = |cur: &mut usize, n: usize| -> Result<&[u8], LearnError> {
        if *cur + n > bytes.len() {
            return Err(LearnError::format(&p, "truncated checkpoint"));
        }
        let s = &bytes[*cur..*cur + n];
        *cur += n;
        Ok(s)
    };

    if take(&mut cur, 8)? != MAGIC {
        return Err(LearnError::format(&p, "bad magic number"));
    }
    let kind = read_str(&bytes, &mut cur, &p)?;
    let cfg_json = read_str(&bytes, &mut cur, &p)?;
    let count = read_u32(&bytes, &mut cur, &p)? as usize;
    let mut out = HashMap::with_capacity(count);
    for _ in 0..count {
        let name = read_str(&bytes, &mut cur, &p)?;
        let rows = read_u32(&bytes, &mut cur, &p)? as usize;
        let cols = read_u32(&bytes, &mut cur, &p)? as usize;
        let need = rows * cols * 4;
        if cur + need > bytes.len() {
            return Err(LearnError::format(&p, "truncated parameter blob"));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for k in 0..rows * cols {
            let s = &bytes[cur + 4 * k..cur + 4 * k + 4];
            data.push(f32::from_le_bytes([s[0], s[1], s[2], s[3]]) as f64);
        }
        cur += need;
        out.insert(name, Mat::from_vec(rows, cols, data));
    }
    Ok((kind, cfg_json, out))
}

/// Copy loaded blobs into a freshly built parameter set, checking that
/// every expected name and shape is present.
pub fn restore_params(
    path: impl AsRef<Path>,
    params: &mut ParamSet,
    loaded: &HashMap<String, Mat>,
) -> Result<(), LearnError> {
    let p = path.as_ref().display().to_string();
    for idx in 0..params.len() {
        let name = params.name(idx).to_string();
        let found = loaded
            .get(&name)
            .ok_or_else(|| LearnError::format(&p, format!("missing parameter '{name}'")))?;
        if found.shape() != params.mat(idx).shape() {
            return Err(LearnError::format(
                &p,
                format!(
                    "parameter '{name}' has shape {:?}, expected {:?}",
                    found.shape(),
                    params.mat(idx).shape()
                ),
            ));
        }
        *params.mat_mut(idx) = found.clone();
    }
    Ok(())
}

fn write_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

fn read_u32(bytes: &[u8], cur: &mut usize, path: &str) -> Result<u32, LearnError> {
    if *cur + 4 > bytes.len() {
        return Err(LearnError::format(path, "truncated checkpoint"));
    }
    let v = u32::from_le_bytes([bytes[*cur], bytes[*cur + 1], bytes[*cur + 2], bytes[*cur + 3]]);
    *cur += 4;
    Ok(v)
}

fn read_str(bytes: &[u8], cur: &mut usize, path: &str) -> Result<String, LearnError> {
    let len = read_u32(bytes, cur, path)? as usize;
    if *cur + len > bytes.len() {
        return Err(LearnError::format(path, "truncated checkpoint"));
    }
    let s = String::from_utf8(bytes[*cur..*cur + len].to_vec())
        .map_err(|_| LearnError::format(path, "invalid utf-8 in header"))?;
    *cur += len;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_f32_values() {
        let dir = std::env::temp_dir().join("graspforge_ckpt_test.bin");
        let mut params = ParamSet::new();
        params.add("layer.weight", Mat::from_fn(3, 4, |i, j| (i * 4 + j) as f64 * 0.125));
        params.add("layer.bias", Mat::from_vec(1, 4, vec![0.5, -0.25, 0.0, 2.0]));
        save(&dir, "test_model", "{\"x\":1}", &params).unwrap();

        let (kind, cfg, loaded) = load(&dir).unwrap();
        assert_eq!(kind, "test_model");
        assert_eq!(cfg, "{\"x\":1}");
        // These values are exactly representable in f32.
        assert_eq!(loaded["layer.weight"], *params.mat(0));
        assert_eq!(loaded["layer.bias"], *params.mat(1));
        let _ = std::fs::remove_file(&dir);
    }

    #[test]
    fn corrupt_magic_is_format_error() {
        let dir = std::env::temp_dir().join("graspforge_ckpt_bad.bin");
        std::fs::write(&dir, b"NOTMAGIC rest").unwrap();
        assert!(matches!(load(&dir), Err(LearnError::Format { .. })));
        let _ = std::fs::remove_file(&dir);
    }

    #[test]
    fn truncated_file_is_format_error() {
        let dir = std::env::temp_dir().join("graspforge_ckpt_trunc.bin");
        let mut params = ParamSet::new();
        params.add("w", Mat::from_fn(8, 8, |_, _| 1.0));
        save(&dir, "m", "{}", &params).unwrap();
        let full = std::fs::read(&dir).unwrap();
        std::fs::write(&dir, &full[..full.len() - 7]).unwrap();
        assert!(matches!(load(&dir), Err(LearnError::Format { .. })));
        let _ = std::fs::remove_file(&dir);
    }
}
