//! Symmetric uniform level sets.

use serde::{Deserialize, Serialize};

use crate::error::{MqatError, Result};

/// Integer multipliers of the step size that a `bits`-wide weight may take.
///
/// `bits = 1` is binary `{-1, +1}` (no zero level); wider codes are the
/// symmetric range `-(2^(b-1)-1) ..= 2^(b-1)-1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelRange {
    pub bits: u8,
    /// Q_N (magnitude of the most negative level).
    pub neg: i32,
    /// Q_P
    pub pos: i32,
}

pub const MAX_BITS: u8 = 16;

impl LevelRange {
    pub fn new(bits: u8) -> Result<Self> {
        if bits == 0 || bits > MAX_BITS {
            return Err(MqatError::invalid(format!(
                "bit width {bits} outside 1..={MAX_BITS}"
            )));
        }
        let q = if bits == 1 {
            1
        } else {
            (1i32 << (bits - 1)) - 1
        };
        Ok(Self {
            bits,
            neg: q,
            pos: q,
        })
    }

    pub fn is_binary(&self) -> bool {
        self.bits == 1
    }

    pub fn levels(&self) -> Vec<i32> {
        if self.is_binary() {
            vec![-1, 1]
        } else {
            (-self.neg..=self.pos).collect()
        }
    }

    /// Nearest level to `w / step` (round half away from zero, then clamp).
    pub fn level(&self, w: f32, step: f32) -> i32 {
        let v = w / step;
        if self.is_binary() {
            if v >= 0.0 {
                1
            } else {
                -1
            }
        } else {
            (v.round() as i32).clamp(-self.neg, self.pos)
        }
    }

    pub fn quantize(&self, w: f32, step: f32) -> f32 {
        self.level(w, step) as f32 * step
    }

    /// Straight-through rule: `(inside clamp range, d ŵ / d s)` where the
    /// step derivative is `level - w/s` inside and the clamped level outside.
    pub fn ste(&self, w: f32, step: f32) -> (bool, f32) {
        let v = w / step;
        let level = self.level(w, step) as f32;
        let inside = v >= -(self.neg as f32) && v <= self.pos as f32;
        if inside {
            (true, level - v)
        } else {
            (false, level)
        }
    }

    /// Unsigned b-bit code for a level.
    pub fn encode(&self, level: i32) -> u32 {
        if self.is_binary() {
            u32::from(level > 0)
        } else {
            (level + self.neg) as u32
        }
    }

    pub fn decode(&self, code: u32) -> Result<i32> {
        let level = if self.is_binary() {
            if code == 0 {
                -1
            } else {
                1
            }
        } else {
            code as i32 - self.neg
        };
        if self.is_binary() && code > 1 || level > self.pos {
            return Err(MqatError::Format(format!(
                "code {code} outside {}-bit level range",
                self.bits
            )));
        }
        Ok(level)
    }
}

/// Ordered level set for `bits`.
pub fn uniform_levels(bits: u8) -> Result<Vec<i32>> {
    Ok(LevelRange::new(bits)?.levels())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ternary_and_binary() {
        assert_eq!(uniform_levels(2).unwrap(), vec![-1, 0, 1]);
        assert_eq!(uniform_levels(1).unwrap(), vec![-1, 1]);
    }

    #[test]
    fn four_bit_has_fifteen_levels() {
        let l = uniform_levels(4).unwrap();
        assert_eq!(l.len(), 15);
        assert_eq!(l, (-7..=7).collect::<Vec<_>>());
    }

    #[test]
    fn zero_bits_rejected() {
        assert!(uniform_levels(0).is_err());
    }

    #[test]
    fn rounding_boundary_and_clamp() {
        let r = LevelRange::new(2).unwrap();
        assert_eq!(r.quantize(0.49, 1.0), 0.0);
        assert_eq!(r.quantize(0.51, 1.0), 1.0);
        assert_eq!(r.quantize(10.0, 1.0), 1.0);
        assert_eq!(r.ste(10.0, 1.0), (false, 1.0));
        assert!(r.ste(0.51, 1.0).0);
    }

    #[test]
    fn codes_round_trip() {
        for bits in 1..=8u8 {
            let r = LevelRange::new(bits).unwrap();
            for l in r.levels() {
                let c = r.encode(l);
                assert!(c < (1u32 << bits));
                assert_eq!(r.decode(c).unwrap(), l);
            }
        }
    }
}
