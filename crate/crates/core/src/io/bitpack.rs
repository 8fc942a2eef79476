//! LSB-first bit streams.

use crate::error::{MqatError, Result};

/// Appends fixed-width codes, least significant bit first. Codes of one
/// layer follow the previous layer without padding.
#[derive(Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    bits: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Writes the low `width` bits of `code`.
    pub fn push(&mut self, code: u32, width: u8) {
        debug_assert!(width >= 1 && width <= 32);
        debug_assert!(width == 32 || code >> width == 0);
        for i in 0..width {
            let byte = (self.bits / 8) as usize;
            if byte == self.bytes.len() {
                self.bytes.push(0);
            }
            if (code >> i) & 1 == 1 {
                self.bytes[byte] |= 1 << (self.bits % 8);
            }
            self.bits += 1;
        }
    }

    pub fn bit_len(&self) -> u64 {
        self.bits
    }

    /// Bytes with the final partial byte zero-padded.
    pub fn finish(self) -> Vec<u8> {
        self.bytes
    }
}

#[derive(Debug)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn read(&mut self, width: u8) -> Result<u32> {
        if self.pos + width as u64 > self.bytes.len() as u64 * 8 {
            return Err(MqatError::Format("bit stream truncated".into()));
        }
        let mut code = 0u32;
        for i in 0..width {
            let byte = self.bytes[(self.pos / 8) as usize];
            code |= (((byte >> (self.pos % 8)) & 1) as u32) << i;
            self.pos += 1;
        }
        Ok(code)
    }

    pub fn position(&self) -> u64 {
        self.pos
    }
}

/// Bytes needed for `bits` bits.
pub fn packed_len(bits: u64) -> usize {
    bits.div_ceil(8) as usize
}
