use serde::{Deserialize, Serialize};

use super::levels::LevelRange;
use crate::autodiff::Tensor;
use crate::error::{MqatError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantKind {
    None,
    Inq,
    Lsq,
}

impl QuantKind {
    pub fn as_str(self) -> &'static str {
        match self {
            QuantKind::None => "none",
            QuantKind::Inq => "inq",
            QuantKind::Lsq => "lsq",
        }
    }
}

impl std::str::FromStr for QuantKind {
    type Err = MqatError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(QuantKind::None),
            "inq" => Ok(QuantKind::Inq),
            "lsq" => Ok(QuantKind::Lsq),
            other => Err(MqatError::invalid(format!(
                "unknown quantizer `{other}` (expected none, inq or lsq)"
            ))),
        }
    }
}

/// Smallest step size a layer may hold.
pub const MIN_STEP: f32 = 1e-8;

/// Per-layer quantization state.
///
/// For LSQ the owning [`Parameter`](crate::autodiff::Parameter) value is the
/// full-precision shadow copy and `scale` is the learned step. For INQ the
/// parameter's trainable mask is the frozen set.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizerState {
    pub kind: QuantKind,
    pub bits: u8,
    pub scale: f32,
    pub inq_fraction_done: f64,
    /// Accumulated d(loss)/d(scale) from the last backward pass (LSQ).
    pub step_grad: f32,
}

impl Default for QuantizerState {
    fn default() -> Self {
        Self::full_precision()
    }
}

impl QuantizerState {
    pub fn full_precision() -> Self {
        Self {
            kind: QuantKind::None,
            bits: 32,
            scale: 1.0,
            inq_fraction_done: 0.0,
            step_grad: 0.0,
        }
    }

    /// LSQ state with `s = 2·mean|w| / √Q_P`.
    pub fn lsq(weights: &Tensor, bits: u8) -> Result<Self> {
        let range = LevelRange::new(bits)?;
        Ok(Self {
            kind: QuantKind::Lsq,
            bits,
            scale: lsq_init_scale(weights.data(), range),
            inq_fraction_done: 0.0,
            step_grad: 0.0,
        })
    }

    /// INQ state whose top level sits at `max|w|`.
    pub fn inq(weights: &Tensor, bits: u8) -> Result<Self> {
        let range = LevelRange::new(bits)?;
        Ok(Self {
            kind: QuantKind::Inq,
            bits,
            scale: inq_init_scale(weights.data(), range),
            inq_fraction_done: 0.0,
            step_grad: 0.0,
        })
    }

    pub fn is_active(&self) -> bool {
        self.kind != QuantKind::None
    }

    pub fn range(&self) -> Result<LevelRange> {
        LevelRange::new(self.bits)
    }

    /// (Q_N, Q_P)
    pub fn lsq_bounds(&self) -> Result<(i32, i32)> {
        let r = self.range()?;
        Ok((r.neg, r.pos))
    }

    /// Bits each weight of this layer occupies when stored.
    pub fn storage_bits(&self) -> u8 {
        if self.is_active() {
            self.bits
        } else {
            32
        }
    }
}

pub fn lsq_init_scale(weights: &[f32], range: LevelRange) -> f32 {
    let mean = weights.iter().map(|w| w.abs() as f64).sum::<f64>() / weights.len().max(1) as f64;
    ((2.0 * mean / (range.pos as f64).sqrt()) as f32).max(MIN_STEP)
}

pub fn inq_init_scale(weights: &[f32], range: LevelRange) -> f32 {
    let max = weights.iter().fold(0f32, |m, w| m.max(w.abs()));
    (max / range.pos as f32).max(MIN_STEP)
}
