//! Built-in lossless plane coder.
//!
//! Samples are visited in raster order and predicted with the median edge
//! detector from their left (`a`), top (`b`) and top-left (`c`) neighbours,
//! with zeros outside the plane. Residuals are zigzag-mapped and
//! Golomb-Rice coded. The plane is tiled into 16×16 blocks; each block
//! signals its Rice parameter in 4 bits:
//!
//! ```text
//! [k of block 0] [k of block 1] ... (raster block order, 4 bits each)
//! [codes of all samples in raster sample order]
//! ```
//!
//! `k ∈ [0, 14]` is the Rice parameter minimizing the block's length;
//! `k = 15` marks a block whose residuals are all zero and emits no codes.

use super::bits::{BitReader, BitWriter};
use crate::error::{Error, Result};
use crate::plane::Plane;
use crate::quantizer::MAX_INDEX;

pub const BLOCK: usize = 16;
const MAX_RICE: u32 = 14;
const ZERO_BLOCK: u32 = 15;
/// Largest zigzag value a 14-bit residual can produce.
const MAX_ZIGZAG: u32 = 2 * MAX_INDEX as u32;

#[inline]
pub fn med_predict(a: i32, b: i32, c: i32) -> i32 {
    if c >= a.max(b) {
        a.min(b)
    } else if c <= a.min(b) {
        a.max(b)
    } else {
        a + b - c
    }
}

#[inline]
fn neighbours(data: &[u16], width: usize, row: usize, col: usize) -> (i32, i32, i32) {
    let at = |r: usize, c: usize| data[r * width + c] as i32;
    let a = if col > 0 { at(row, col - 1) } else { 0 };
    let b = if row > 0 { at(row - 1, col) } else { 0 };
    let c = if row > 0 && col > 0 { at(row - 1, col - 1) } else { 0 };
    (a, b, c)
}

/// Prediction residuals in raster order.
pub fn med_residuals(plane: &Plane<u16>) -> Vec<i32> {
    let mut out = Vec::with_capacity(plane.len());
    for row in 0..plane.height {
        for col in 0..plane.width {
            let (a, b, c) = neighbours(&plane.data, plane.width, row, col);
            out.push(plane.get(row, col) as i32 - med_predict(a, b, c));
        }
    }
    out
}

#[inline]
fn zigzag(r: i32) -> u32 {
    if r >= 0 {
        (r as u32) << 1
    } else {
        ((-r as u32) << 1) - 1
    }
}

#[inline]
fn unzigzag(n: u32) -> i32 {
    if n & 1 == 0 {
        (n >> 1) as i32
    } else {
        -(((n + 1) >> 1) as i32)
    }
}

fn blocks(width: usize, height: usize) -> (usize, usize) {
    (width.div_ceil(BLOCK), height.div_ceil(BLOCK))
}

fn block_of(row: usize, col: usize, blocks_x: usize) -> usize {
    (row / BLOCK) * blocks_x + col / BLOCK
}

pub fn encode(plane: &Plane<u16>) -> Vec<u8> {
    debug_assert!(plane.data.iter().all(|&v| v <= MAX_INDEX));
    let (bx, by) = blocks(plane.width, plane.height);
    let mapped: Vec<u32> = med_residuals(plane).into_iter().map(zigzag).collect();

    let mut cost = vec![[0u64; MAX_RICE as usize + 1]; bx * by];
    let mut nonzero = vec![false; bx * by];
    for row in 0..plane.height {
        for col in 0..plane.width {
            let b = block_of(row, col, bx);
            let n = mapped[row * plane.width + col];
            nonzero[b] |= n != 0;
            for (k, c) in cost[b].iter_mut().enumerate() {
                *c += (n >> k) as u64 + 1 + k as u64;
            }
        }
    }
    let params: Vec<u32> = cost
        .iter()
        .zip(&nonzero)
        .map(|(c, &nz)| {
            if !nz {
                return ZERO_BLOCK;
            }
            let mut best = 0;
            for k in 1..c.len() {
                if c[k] < c[best] {
                    best = k;
                }
            }
            best as u32
        })
        .collect();

    let mut w = BitWriter::default();
    for &k in &params {
        w.put(k, 4);
    }
    for row in 0..plane.height {
        for col in 0..plane.width {
            let k = params[block_of(row, col, bx)];
            if k == ZERO_BLOCK {
                continue;
            }
            let n = mapped[row * plane.width + col];
            w.unary(n >> k);
            w.put(n & ((1 << k) - 1), k);
        }
    }
    w.finish()
}

pub fn decode(payload: &[u8], width: usize, height: usize) -> Result<Plane<u16>> {
    let (bx, by) = blocks(width, height);
    let mut r = BitReader::new(payload);
    let mut params = Vec::with_capacity(bx * by);
    for _ in 0..bx * by {
        params.push(r.get(4, "block parameters")?);
    }
    let mut data = vec![0u16; width * height];
    for row in 0..height {
        for col in 0..width {
            let k = params[block_of(row, col, bx)];
            let residual = if k == ZERO_BLOCK {
                0
            } else {
                let start = r.position();
                let q = r.unary(MAX_ZIGZAG >> k)?;
                let low = r.get(k, "a Rice remainder")?;
                let n = (q << k) | low;
                if n > MAX_ZIGZAG {
                    return Err(Error::Bitstream {
                        bit_offset: start,
                        message: format!("residual code {n} out of range"),
                    });
                }
                unzigzag(n)
            };
            let (a, b, c) = neighbours(&data, width, row, col);
            let v = med_predict(a, b, c) + residual;
            if !(0..=MAX_INDEX as i32).contains(&v) {
                return Err(Error::Bitstream {
                    bit_offset: r.position(),
                    message: format!("decoded sample {v} outside the 14-bit range"),
                });
            }
            data[row * width + col] = v as u16;
        }
    }
    if r.trailing_bytes() != 0 {
        return Err(Error::Bitstream {
            bit_offset: r.position(),
            message: format!("{} unexpected trailing bytes", r.trailing_bytes()),
        });
    }
    Ok(Plane::from_vec(width, height, data))
}
