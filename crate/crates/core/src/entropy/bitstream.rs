use crate::{Error, Result};

/// A packed bit sequence, least-significant bit first within each byte.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bitstream {
    bytes: Vec<u8>,
    bit_len: u64,
}

impl Bitstream {
    pub fn new() -> Self {
        Self::default()
    }

    /// Wraps whole bytes; the bit length is `8 * bytes.len()`.
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        let bit_len = bytes.len() as u64 * 8;
        Self { bytes, bit_len }
    }

    /// Wraps `bytes` holding exactly `bit_len` meaningful bits.
    pub fn from_raw(bytes: Vec<u8>, bit_len: u64) -> Result<Self> {
        if bit_len > bytes.len() as u64 * 8 || bit_len + 8 <= bytes.len() as u64 * 8 {
            return Err(Error::corrupt(format!(
                "{bit_len} bits do not fill {} bytes",
                bytes.len()
            )));
        }
        Ok(Self { bytes, bit_len })
    }

    pub fn bit_len(&self) -> u64 {
        self.bit_len
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn is_empty(&self) -> bool {
        self.bit_len == 0
    }

    pub fn push_bit(&mut self, bit: bool) {
        let offset = (self.bit_len % 8) as u32;
        if offset == 0 {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().expect("byte pushed") |= 1 << offset;
        }
        self.bit_len += 1;
    }

    /// Appends the low `width` bits of `value`, least significant first.
    pub fn push_bits(&mut self, value: u64, width: u32) {
        debug_assert!(width <= 64);
        debug_assert!(width == 64 || value >> width == 0);
        let mut remaining = width;
        let mut v = value;
        while remaining > 0 {
            let offset = (self.bit_len % 8) as u32;
            if offset == 0 {
                self.bytes.push(0);
            }
            let take = remaining.min(8 - offset);
            let chunk = (v & ((1u64 << take) - 1)) as u8;
            *self.bytes.last_mut().expect("byte pushed") |= chunk << offset;
            v = if take == 64 { 0 } else { v >> take };
            remaining -= take;
            self.bit_len += take as u64;
        }
    }

    pub fn reader(&self) -> BitReader<'_> {
        BitReader {
            stream: self,
            pos: 0,
        }
    }
}

pub struct BitReader<'a> {
    stream: &'a Bitstream,
    pos: u64,
}

impl BitReader<'_> {
    pub fn position(&self) -> u64 {
        self.pos
    }

    pub fn remaining(&self) -> u64 {
        self.stream.bit_len - self.pos
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        if self.pos >= self.stream.bit_len {
            return Err(Error::corrupt("bitstream ended early"));
        }
        let byte = self.stream.bytes[(self.pos / 8) as usize];
        let bit = (byte >> (self.pos % 8)) & 1 == 1;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_bits(&mut self, width: u32) -> Result<u64> {
        if self.remaining() < width as u64 {
            return Err(Error::corrupt("bitstream ended early"));
        }
        let mut value = 0u64;
        let mut filled = 0u32;
        while filled < width {
            let offset = (self.pos % 8) as u32;
            let take = (width - filled).min(8 - offset);
            let byte = self.stream.bytes[(self.pos / 8) as usize] as u64;
            value |= ((byte >> offset) & ((1 << take) - 1)) << filled;
            filled += take;
            self.pos += take as u64;
        }
        Ok(value)
    }
}
