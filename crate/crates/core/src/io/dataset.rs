//! `MQTD` dataset files.
//!
//! Header: `"MQTD"`, version u32, sample count u32, vertex count V u32.
//! Each record: input (3V f32), rotation (4 f32), translation (3 f32),
//! vertices (3V f32), diameter (f32). All little-endian.

use std::path::Path;

use crate::error::{MqatError, Result};
use crate::pose::PoseSample;

use super::write_atomic;

pub const DATASET_MAGIC: &[u8; 4] = b"MQTD";
pub const DATASET_VERSION: u32 = 1;

fn record_floats(v: usize) -> usize {
    3 * v + 4 + 3 + 3 * v + 1
}

pub fn encode_dataset(samples: &[PoseSample]) -> Result<Vec<u8>> {
    let v = samples.first().map_or(0, |s| s.num_vertices());
    let mut out = Vec::with_capacity(16 + samples.len() * record_floats(v) * 4);
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    out.extend_from_slice(&(samples.len() as u32).to_le_bytes());
    out.extend_from_slice(&(v as u32).to_le_bytes());
    let mut put = |x: f32| out.extend_from_slice(&x.to_le_bytes());
    for (i, s) in samples.iter().enumerate() {
        if s.num_vertices() != v || s.input.len() != 3 * v {
            return Err(MqatError::invalid(format!(
                "sample {i} does not have {v} vertices"
            )));
        }
        s.input.iter().for_each(|&x| put(x));
        s.gt_rotation.iter().for_each(|&x| put(x));
        s.gt_translation.iter().for_each(|&x| put(x));
        s.vertices.iter().flatten().for_each(|&x| put(x));
        put(s.diameter);
    }
    Ok(out)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Vec<PoseSample>> {
    if bytes.len() < 16 || &bytes[..4] != DATASET_MAGIC {
        return Err(MqatError::Format("not an MQTD dataset".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
    if word(1) != DATASET_VERSION {
        return Err(MqatError::Format(format!(
            "unsupported dataset version {}",
            word(1)
        )));
    }
    let (n, v) = (word(2) as usize, word(3) as usize);
    let per = record_floats(v);
    let expected = n
        .checked_mul(per * 4)
        .and_then(|b| b.checked_add(16))
        .ok_or_else(|| MqatError::Format("dataset header overflows".into()))?;
    if bytes.len() != expected {
        return Err(MqatError::Format(format!(
            "dataset has {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let floats: Vec<f32> = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(floats
        .chunks_exact(per.max(1))
        .take(n)
        .map(|r| {
            let (input, r) = r.split_at(3 * v);
            let (rot, r) = r.split_at(4);
            let (tr, r) = r.split_at(3);
            let (verts, r) = r.split_at(3 * v);
            PoseSample {
                input: input.to_vec(),
                gt_rotation: rot.try_into().unwrap(),
                gt_translation: tr.try_into().unwrap(),
                vertices: verts.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
                diameter: r[0],
            }
        })
        .collect())
}

pub fn save_dataset(path: &Path, samples: &[PoseSample]) -> Result<()> {
    write_atomic(path, &encode_dataset(samples)?)
}

pub fn load_dataset(path: &Path) -> Result<Vec<PoseSample>> {
    decode_dataset(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::generate_dataset;

    #[test]
    fn round_trip() {
        let d = generate_dataset(4, 5, 1.0).unwrap();
        let bytes = encode_dataset(&d).unwrap();
        assert_eq!(bytes.len(), 16 + 5 * (3 * 14 + 4 + 3 + 3 * 14 + 1) * 4);
        assert_eq!(decode_dataset(&bytes).unwrap(), d);
        assert!(decode_dataset(&bytes[..bytes.len() - 1]).is_err());
    }
}
