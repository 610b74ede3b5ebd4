use crate::error::{Error, Result};

/// MSB-first bit packer.
#[derive(Default)]
pub(crate) struct BitWriter {
    bytes: Vec<u8>,
    acc: u64,
    filled: u32,
}

impl BitWriter {
    pub fn put(&mut self, value: u32, bits: u32) {
        debug_assert!(bits <= 32);
        if bits == 0 {
            return;
        }
        self.acc = (self.acc << bits) | (value as u64 & ((1u64 << bits) - 1));
        self.filled += bits;
        while self.filled >= 8 {
            self.filled -= 8;
            self.bytes.push((self.acc >> self.filled) as u8);
        }
        self.acc &= (1u64 << self.filled) - 1;
    }

    /// `count` one-bits followed by a zero.
    pub fn unary(&mut self, mut count: u32) {
        while count >= 32 {
            self.put(u32::MAX, 32);
            count -= 32;
        }
        self.put((1u32 << count) - 1, count);
        self.put(0, 1);
    }

    pub fn finish(mut self) -> Vec<u8> {
        if self.filled > 0 {
            let pad = 8 - self.filled;
            self.put(0, pad);
        }
        self.bytes
    }
}

pub(crate) struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    pub fn position(&self) -> u64 {
        self.pos
    }

    fn total_bits(&self) -> u64 {
        self.bytes.len() as u64 * 8
    }

    fn eof(&self, wanted: &str) -> Error {
        Error::Bitstream {
            bit_offset: self.pos,
            message: format!("payload ends while reading {wanted}"),
        }
    }

    #[inline]
    fn bit(&mut self) -> Option<u32> {
        if self.pos >= self.total_bits() {
            return None;
        }
        let byte = self.bytes[(self.pos >> 3) as usize];
        let b = (byte >> (7 - (self.pos & 7))) & 1;
        self.pos += 1;
        Some(b as u32)
    }

    pub fn get(&mut self, bits: u32, what: &str) -> Result<u32> {
        if self.pos + bits as u64 > self.total_bits() {
            return Err(self.eof(what));
        }
        let mut v = 0u32;
        for _ in 0..bits {
            v = (v << 1) | self.bit().expect("bounds checked above");
        }
        Ok(v)
    }

    /// Reads a unary run, failing once it exceeds `limit`.
    pub fn unary(&mut self, limit: u32) -> Result<u32> {
        let start = self.pos;
        let mut n = 0u32;
        loop {
            match self.bit() {
                Some(0) => return Ok(n),
                Some(_) => {
                    n += 1;
                    if n > limit {
                        return Err(Error::Bitstream {
                            bit_offset: start,
                            message: format!("unary prefix longer than {limit}"),
                        });
                    }
                }
                None => return Err(self.eof("a unary prefix")),
            }
        }
    }

    /// Bits left after the current position that are not byte padding.
    pub fn trailing_bytes(&self) -> u64 {
        let used_bytes = self.pos.div_ceil(8);
        self.bytes.len() as u64 - used_bytes
    }
}
