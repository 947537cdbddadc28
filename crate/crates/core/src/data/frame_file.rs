//! Per-frame `.f2m` files (little-endian):
//!
//! ```text
//! "F2M1" | u32 version | u32 k | u32 M | u8 has_gt
//! k×2 f32 keypoints | k f32 scores | k×M f32 descriptors
//! [has_gt] k×3 f32 coordinates | k u8 validity
//! ```

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::frame::{DescriptorSet, GroundTruth};
use crate::error::{Error, Result};

pub const FRAME_MAGIC: &[u8; 4] = b"F2M1";
pub const FRAME_VERSION: u32 = 1;

pub fn frame_to_bytes(frame: &DescriptorSet) -> Vec<u8> {
    let k = frame.len();
    let m = frame.dim();
    let gt = frame.gt();
    let mut out = Vec::with_capacity(17 + k * (12 + 4 * m + if gt.is_some() { 13 } else { 0 }));
    out.extend_from_slice(FRAME_MAGIC);
    out.extend_from_slice(&FRAME_VERSION.to_le_bytes());
    out.extend_from_slice(&(k as u32).to_le_bytes());
    out.extend_from_slice(&(m as u32).to_le_bytes());
    out.push(gt.is_some() as u8);
    for kp in frame.keypoints() {
        for v in kp {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for s in frame.scores() {
        out.extend_from_slice(&s.to_le_bytes());
    }
    for v in frame.descriptors().iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(gt) = gt {
        for c in &gt.coords {
            for v in c {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend(gt.valid.iter().map(|v| *v as u8));
    }
    out
}

fn f32s(bytes: &[u8]) -> impl Iterator<Item = f32> + '_ {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
}

/// Parses a frame; `path` is only used in error messages.
pub fn frame_from_bytes(bytes: &[u8], frame_id: &str, path: &Path) -> Result<DescriptorSet> {
    let err = |msg: String| Error::format(path, format!("frame {frame_id}: {msg}"));
    if bytes.len() < 17 {
        return Err(err("file shorter than header".into()));
    }
    if &bytes[..4] != FRAME_MAGIC {
        return Err(err("bad magic, expected F2M1".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != FRAME_VERSION {
        return Err(err(format!("unsupported version {version}")));
    }
    let k = u32_at(8) as usize;
    let m = u32_at(12) as usize;
    let has_gt = match bytes[16] {
        0 => false,
        1 => true,
        b => return Err(err(format!("has_gt flag must be 0 or 1, got {b}"))),
    };
    if m == 0 {
        return Err(err("descriptor dimension is zero".into()));
    }
    let per_kp = 8 + 4 + 4 * m as u64 + if has_gt { 13 } else { 0 };
    let expected = 17 + k as u64 * per_kp;
    if bytes.len() as u64 != expected {
        return Err(err(format!(
            "length {} does not match header (k = {k}, M = {m}, has_gt = {has_gt}: {expected} bytes)",
            bytes.len()
        )));
    }

    let mut pos = 17;
    let mut take = |n: usize| {
        let s = &bytes[pos..pos + n];
        pos += n;
        s
    };
    let kp: Vec<f32> = f32s(take(8 * k)).collect();
    let keypoints = kp.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    let scores = f32s(take(4 * k)).collect();
    let desc = Array2::from_shape_vec((k, m), f32s(take(4 * k * m)).collect())
        .expect("length checked");
    let gt = if has_gt {
        let c: Vec<f32> = f32s(take(12 * k)).collect();
        let coords = c.chunks_exact(3).map(|v| [v[0], v[1], v[2]]).collect();
        let valid = take(k)
            .iter()
            .map(|b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(err(format!("validity byte must be 0 or 1, got {other}"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        Some(GroundTruth { coords, valid })
    } else {
        None
    };
    DescriptorSet::new(frame_id, keypoints, scores, desc, gt).map_err(|e| err(e.to_string()))
}

pub fn write_frame(frame: &DescriptorSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, frame_to_bytes(frame)).map_err(|e| Error::io(path, e))
}

pub fn read_frame(path: impl AsRef<Path>, frame_id: &str) -> Result<DescriptorSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    frame_from_bytes(&bytes, frame_id, path)
}
