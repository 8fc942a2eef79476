//! `MQCK` checkpoint container.
//!
//! Layout (little-endian):
//! `"MQCK"`, version u32, topology length u32, topology JSON, layer count
//! u32, per layer `kind u8, bits u8, scale f32`, payload bit length u64,
//! payload, SHA-256 of everything before it.
//!
//! The payload is one LSB-first bit stream in layer order. Full-precision
//! layers contribute the 32 raw bits of each f32; quantized layers
//! contribute one `b`-bit level code per weight.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::autodiff::{Parameter, Tensor};
use crate::error::{MqatError, Result};
use crate::pose::{ModularModel, Topology};
use crate::quant::{QuantKind, QuantizerState};

use super::bitpack::{packed_len, BitReader, BitWriter};
use super::write_atomic;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MQCK";
pub const CHECKPOINT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

fn kind_code(k: QuantKind) -> u8 {
    match k {
        QuantKind::None => 0,
        QuantKind::Inq => 1,
        QuantKind::Lsq => 2,
    }
}

fn kind_from_code(c: u8) -> Result<QuantKind> {
    match c {
        0 => Ok(QuantKind::None),
        1 => Ok(QuantKind::Inq),
        2 => Ok(QuantKind::Lsq),
        _ => Err(MqatError::Format(format!("unknown quantizer code {c}"))),
    }
}

/// Payload size in bits: `b` per quantized weight, 32 per other weight.
pub fn payload_bits(model: &ModularModel) -> u64 {
    model.storage_bits()
}

/// Full-precision size over the stored payload size.
pub fn checkpoint_compression(model: &ModularModel) -> f64 {
    (32 * model.param_count()) as f64 / payload_bits(model) as f64
}

/// Serializes `model`. LSQ layers are stored as their quantized values (the
/// full-precision shadow weights are dropped). INQ layers must be fully
/// frozen on their grid.
pub fn encode_checkpoint(model: &ModularModel) -> Result<Vec<u8>> {
    let topo =
        serde_json::to_vec(model.topology()).map_err(|e| MqatError::Format(e.to_string()))?;
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(topo.len() as u32).to_le_bytes());
    out.extend_from_slice(&topo);
    out.extend_from_slice(&(model.layers().len() as u32).to_le_bytes());
    let mut bits = BitWriter::new();
    for (p, q) in model.params().iter().zip(model.quant()) {
        out.push(kind_code(q.kind));
        out.push(q.storage_bits());
        out.extend_from_slice(&q.scale.to_le_bytes());
        let layer = p.layer_id.0;
        match q.kind {
            QuantKind::None => {
                for &w in p.value.data() {
                    bits.push(w.to_bits(), 32);
                }
            }
            QuantKind::Inq => {
                if p.frozen_count() != p.len() {
                    return Err(MqatError::invalid(format!(
                        "layer {layer} is partially frozen ({} of {} weights); finish INQ before saving",
                        p.frozen_count(),
                        p.len()
                    )));
                }
                let range = q.range()?;
                for &w in p.value.data() {
                    let level = range.level(w, q.scale);
                    if (level as f32 * q.scale).to_bits() != w.to_bits() {
                        return Err(MqatError::invalid(format!(
                            "layer {layer} holds an off-grid INQ weight {w}"
                        )));
                    }
                    bits.push(range.encode(level), q.bits);
                }
            }
            QuantKind::Lsq => {
                let range = q.range()?;
                for &w in p.value.data() {
                    bits.push(range.encode(range.level(w, q.scale)), q.bits);
                }
            }
        }
    }
    out.extend_from_slice(&bits.bit_len().to_le_bytes());
    out.extend_from_slice(&bits.finish());
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| MqatError::Format("checkpoint truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Parses a checkpoint. Any corruption is an error; no partial model is
/// returned.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<ModularModel> {
    if bytes.len() < 4 + DIGEST_LEN || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(MqatError::Format("not an MQCK checkpoint".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(MqatError::Format("checkpoint checksum mismatch".into()));
    }
    let mut c = Cursor { buf: body, pos: 4 };
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(MqatError::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let topo_len = c.u32()? as usize;
    let topo: Topology = serde_json::from_slice(c.take(topo_len)?)
        .map_err(|e| MqatError::Format(format!("topology: {e}")))?;
    topo.validate()?;
    let n_layers = c.u32()? as usize;
    if n_layers != topo.layers.len() {
        return Err(MqatError::Format(
            "layer count differs from topology".into(),
        ));
    }
    let mut states = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let kind = kind_from_code(c.u8()?)?;
        let bits = c.u8()?;
        let scale = c.f32()?;
        let state = match kind {
            QuantKind::None if bits == 32 => QuantizerState::full_precision(),
            QuantKind::None => {
                return Err(MqatError::Format(format!(
                    "full-precision layer with {bits} bits"
                )))
            }
            _ => {
                if !(scale.is_finite() && scale > 0.0) {
                    return Err(MqatError::Format(format!("invalid scale {scale}")));
                }
                QuantizerState {
                    kind,
                    bits,
                    scale,
                    inq_fraction_done: if kind == QuantKind::Inq { 1.0 } else { 0.0 },
                    step_grad: 0.0,
                }
            }
        };
        if state.is_active() {
            state
                .range()
                .map_err(|e| MqatError::Format(e.to_string()))?;
        }
        states.push(state);
    }
    let n_bits = c.u64()?;
    let payload = c.take(packed_len(n_bits))?;
    if c.pos != body.len() {
        return Err(MqatError::Format("trailing bytes after payload".into()));
    }
    let mut r = BitReader::new(payload);
    let mut params = Vec::with_capacity(n_layers);
    for (l, q) in topo.layers.iter().zip(&states) {
        let n = l.n_params();
        let mut data = Vec::with_capacity(n);
        if q.is_active() {
            let range = q.range()?;
            for _ in 0..n {
                let level = range
                    .decode(r.read(q.bits)?)
                    .map_err(|e| MqatError::Format(e.to_string()))?;
                data.push(level as f32 * q.scale);
            }
        } else {
            for _ in 0..n {
                data.push(f32::from_bits(r.read(32)?));
            }
        }
        let mut p = Parameter::new(
            Tensor::new([l.in_dim + 1, l.out_dim], data)?,
            l.id,
            l.module,
        );
        if q.kind == QuantKind::Inq {
            p.freeze_all();
        }
        params.push(p);
    }
    if r.position() != n_bits {
        return Err(MqatError::Format(
            "payload length does not match layer sizes".into(),
        ));
    }
    ModularModel::from_parts(topo, params, Some(states))
}

pub fn save_checkpoint(path: &Path, model: &ModularModel) -> Result<()> {
    write_atomic(path, &encode_checkpoint(model)?)
}

pub fn load_checkpoint(path: &Path) -> Result<ModularModel> {
    decode_checkpoint(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::LayerId;
    use crate::pose::{build_model, cube_vertices, ArchConfig};
    use crate::quant::{inq_advance, PartitionStrategy};
    use rand::SeedableRng;

    fn small() -> ModularModel {
        let arch = ArchConfig {
            backbone: vec![8],
            aggregator: vec![4],
            head: vec![6],
        };
        build_model(&arch, &cube_vertices(), 1).unwrap()
    }

    #[test]
    fn full_precision_round_trip() {
        let m = small();
        let back = decode_checkpoint(&encode_checkpoint(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn two_bit_layer_payload_size() {
        let mut m = small();
        let l = LayerId(0);
        let n = m.param(l).len() as u64;
        let q = QuantizerState::lsq(&m.param(l).value, 2).unwrap();
        m.set_quant(l, q);
        let bytes = encode_checkpoint(&m).unwrap();
        let fp: u64 = 32 * (m.param_count() - n);
        assert_eq!(payload_bits(&m), 2 * n + fp);
        let fixed = 4
            + 4
            + 4
            + serde_json::to_vec(m.topology()).unwrap().len()
            + 4
            + 6 * m.layers().len()
            + 8;
        assert_eq!(bytes.len(), fixed + packed_len(2 * n + fp) + 32);
    }

    #[test]
    fn partial_inq_is_rejected() {
        let mut m = small();
        let l = LayerId(1);
        let q = QuantizerState::inq(&m.param(l).value, 4).unwrap();
        m.set_quant(l, q);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let (p, q) = m.layer_mut(l);
        inq_advance(p, q, 0.5, PartitionStrategy::Magnitude, &mut rng).unwrap();
        assert!(encode_checkpoint(&m).is_err());
        let (p, q) = m.layer_mut(l);
        inq_advance(p, q, 1.0, PartitionStrategy::Magnitude, &mut rng).unwrap();
        let back = decode_checkpoint(&encode_checkpoint(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = encode_checkpoint(&small()).unwrap();
        for i in [0, 5, 12, bytes.len() / 2, bytes.len() - 1] {
            let mut b = bytes.clone();
            b[i] ^= 0x10;
            assert!(decode_checkpoint(&b).is_err(), "byte {i}");
        }
        assert!(decode_checkpoint(&bytes[..bytes.len() - 3]).is_err());
    }
}
