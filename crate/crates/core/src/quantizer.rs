//! Per-channel uniform scalar quantization to 14-bit indices.
//!
//! `step = σ/α`, `offset = min(values)`, `index = round((v − offset)/step)`
//! clamped to `[0, 16383]`. Step and offset are rounded to `f32` when the
//! metadata is built so that the decoder sees exactly what the encoder used.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::plane::Plane;
use crate::scalar::Real;

pub const MAX_INDEX: u16 = (1 << 14) - 1;

/// Channels whose standard deviation is at or below this are treated as
/// constant (`step = 1`).
pub const DEGENERATE_SIGMA: f64 = 1e-6;

/// Parameter class of a transformed plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChannelClass {
    Depth,
    OffsetXy,
    Scale,
    Rotation,
    Color,
    Opacity,
}

impl ChannelClass {
    pub const ALL: [ChannelClass; 6] = [
        ChannelClass::Depth,
        ChannelClass::OffsetXy,
        ChannelClass::Scale,
        ChannelClass::Rotation,
        ChannelClass::Color,
        ChannelClass::Opacity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChannelClass::Depth => "depth",
            ChannelClass::OffsetXy => "offset_xy",
            ChannelClass::Scale => "scale",
            ChannelClass::Rotation => "rotation",
            ChannelClass::Color => "color",
            ChannelClass::Opacity => "opacity",
        }
    }
}

impl fmt::Display for ChannelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChannelClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ChannelClass::ALL
            .into_iter()
            .find(|c| c.name() == s || (s == "offset" && *c == ChannelClass::OffsetXy))
            .ok_or_else(|| Error::UnknownChannel(s.to_string()))
    }
}

/// Tuned `α` per channel class.
pub fn default_alpha(channel: ChannelClass) -> f64 {
    match channel {
        ChannelClass::Depth => 2048.0,
        ChannelClass::OffsetXy => 256.0,
        ChannelClass::Scale => 256.0,
        ChannelClass::Rotation => 256.0,
        ChannelClass::Color => 1024.0,
        ChannelClass::Opacity => 256.0,
    }
}

/// `default_alpha` keyed by channel name.
pub fn default_alpha_by_name(channel: &str) -> Result<f64> {
    Ok(default_alpha(channel.parse()?))
}

/// `α` for each channel class, defaulting to [`default_alpha`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaTable([f64; 6]);

impl Default for AlphaTable {
    fn default() -> Self {
        AlphaTable(ChannelClass::ALL.map(default_alpha))
    }
}

impl AlphaTable {
    pub fn get(&self, channel: ChannelClass) -> f64 {
        self.0[channel as usize]
    }

    pub fn set(&mut self, channel: ChannelClass, alpha: f64) -> Result<()> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!("alpha for {channel} must be positive, got {alpha}")));
        }
        self.0[channel as usize] = alpha;
        Ok(())
    }

    /// Every class set to the same value.
    pub fn uniform(alpha: f64) -> Result<Self> {
        let mut t = AlphaTable::default();
        for c in ChannelClass::ALL {
            t.set(c, alpha)?;
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelQuantMeta {
    pub step: f32,
    pub offset: f32,
    pub alpha: f32,
    pub count_truncated: u32,
}

/// Population standard deviation, accumulated in `f64`.
pub fn population_std<'a, T: Real>(values: impl IntoIterator<Item = &'a T>) -> f64 {
    let mut n = 0usize;
    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    for v in values {
        let x = v.as_f64();
        n += 1;
        let delta = x - mean;
        mean += delta / n as f64;
        m2 += delta * (x - mean);
    }
    if n == 0 {
        0.0
    } else {
        (m2 / n as f64).max(0.0).sqrt()
    }
}

/// Largest `f32` not above `v`.
fn f32_floor(v: f64) -> f32 {
    let f = v as f32;
    if f as f64 > v {
        f.next_down()
    } else {
        f
    }
}

/// Quantizes one plane. `shared_sigma` replaces the plane's own standard
/// deviation when present.
pub fn quantize_plane<T: Real>(
    values: &Plane<T>,
    alpha: f64,
    shared_sigma: Option<f64>,
) -> Result<(Plane<u16>, ChannelQuantMeta)> {
    if values.is_empty() {
        return Err(Error::InvalidPlane("cannot quantize an empty plane".into()));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Config(format!("alpha must be positive, got {alpha}")));
    }
    if let Some(index) = values.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let sigma = shared_sigma.unwrap_or_else(|| population_std(&values.data));
    let step = if sigma > DEGENERATE_SIGMA {
        let s = (sigma / alpha) as f32;
        if s > 0.0 {
            s
        } else {
            f32::MIN_POSITIVE
        }
    } else {
        1.0
    };
    let min = values.data.iter().fold(f64::INFINITY, |m, v| m.min(v.as_f64()));
    let offset = f32_floor(min);

    let (step64, offset64) = (step as f64, offset as f64);
    let mut count_truncated = 0u32;
    let mut data = Vec::with_capacity(values.len());
    for v in &values.data {
        let q = ((v.as_f64() - offset64) / step64).round();
        if q > MAX_INDEX as f64 {
            count_truncated += 1;
            data.push(MAX_INDEX);
        } else {
            data.push(q.max(0.0) as u16);
        }
    }
    let indices = Plane::from_vec(values.width, values.height, data);
    Ok((
        indices,
        ChannelQuantMeta {
            step,
            offset,
            alpha: alpha as f32,
            count_truncated,
        },
    ))
}

/// `v̂ = offset + index·step`
pub fn dequantize_plane<T: Real>(indices: &Plane<u16>, meta: &ChannelQuantMeta) -> Plane<T> {
    let (step, offset) = (meta.step as f64, meta.offset as f64);
    indices.map(|i| T::lit(offset + i as f64 * step))
}
