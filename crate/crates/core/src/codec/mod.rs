//! Per-plane picture coding backends.

mod bits;
pub mod hevc;
pub mod lossless;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::plane::Plane;
use crate::quantizer::{ChannelClass, MAX_INDEX};

pub use hevc::HevcConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum BackendId {
    InternalLossless = 0,
    InternalLossy = 1,
    Hevc = 2,
}

impl BackendId {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(BackendId::InternalLossless),
            1 => Some(BackendId::InternalLossy),
            2 => Some(BackendId::Hevc),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BackendId::InternalLossless => "internal-lossless",
            BackendId::InternalLossy => "internal-lossy",
            BackendId::Hevc => "hevc",
        }
    }
}

impl fmt::Display for BackendId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BackendId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [BackendId::InternalLossless, BackendId::InternalLossy, BackendId::Hevc]
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown backend `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedPlane {
    pub backend: BackendId,
    pub width: usize,
    pub height: usize,
    pub payload: Vec<u8>,
    /// QP the plane was coded at; 0 for the lossless backend.
    pub qp_used: i32,
}

/// Per-channel QP offset added to the global QP.
pub fn default_qc(channel: ChannelClass) -> i32 {
    match channel {
        ChannelClass::Depth => -4,
        ChannelClass::OffsetXy => 12,
        ChannelClass::Scale => 0,
        ChannelClass::Rotation => 9,
        ChannelClass::Color => 3,
        ChannelClass::Opacity => 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QpConfig {
    pub qg: i32,
    qc: [i32; 6],
}

impl QpConfig {
    pub fn new(qg: i32) -> Self {
        QpConfig {
            qg,
            qc: ChannelClass::ALL.map(default_qc),
        }
    }

    pub fn qc(&self, channel: ChannelClass) -> i32 {
        self.qc[channel as usize]
    }

    pub fn set_qc(&mut self, channel: ChannelClass, qc: i32) {
        self.qc[channel as usize] = qc;
    }

    /// `Q_c + Q_g`
    pub fn effective(&self, channel: ChannelClass) -> i32 {
        self.qc(channel) + self.qg
    }
}

impl Default for QpConfig {
    fn default() -> Self {
        QpConfig::new(0)
    }
}

/// Index divisor of the internal lossy backend, `max(1, round(2^(qp/6)))`.
pub fn lossy_divisor(qp: i32) -> u32 {
    let d = 2f64.powf(qp as f64 / 6.0).round();
    d.clamp(1.0, MAX_INDEX as f64 + 1.0) as u32
}

fn check_range(plane: &Plane<u16>) -> Result<()> {
    match plane.data.iter().position(|&v| v > MAX_INDEX) {
        Some(i) => Err(Error::InvalidPlane(format!(
            "sample {} at index {i} exceeds 14 bits",
            plane.data[i]
        ))),
        None => Ok(()),
    }
}

pub fn encode_plane_lossless(plane: &Plane<u16>) -> Result<EncodedPlane> {
    check_range(plane)?;
    Ok(EncodedPlane {
        backend: BackendId::InternalLossless,
        width: plane.width,
        height: plane.height,
        payload: lossless::encode(plane),
        qp_used: 0,
    })
}

/// Divides indices by [`lossy_divisor`] (rounding half to even, which keeps
/// even divisors unbiased) and codes the reduced plane losslessly.
pub fn encode_plane_lossy(plane: &Plane<u16>, qp: i32) -> Result<EncodedPlane> {
    check_range(plane)?;
    let div = lossy_divisor(qp);
    let reduced = plane.map(|v| reduce(v as u32, div) as u16);
    Ok(EncodedPlane {
        backend: BackendId::InternalLossy,
        width: plane.width,
        height: plane.height,
        payload: lossless::encode(&reduced),
        qp_used: qp,
    })
}

fn reduce(v: u32, div: u32) -> u32 {
    let (q, r) = (v / div, v % div);
    if 2 * r > div || (2 * r == div && q % 2 == 1) {
        q + 1
    } else {
        q
    }
}

pub fn encode_plane_hevc(plane: &Plane<u16>, qp: i32, config: &HevcConfig) -> Result<EncodedPlane> {
    check_range(plane)?;
    let payload = hevc::encode(plane, qp, config)?;
    Ok(EncodedPlane {
        backend: BackendId::Hevc,
        width: plane.width,
        height: plane.height,
        payload,
        qp_used: qp,
    })
}

/// Decodes any backend; `hevc` is required only for external payloads.
pub fn decode_plane(ep: &EncodedPlane, hevc: Option<&HevcConfig>) -> Result<Plane<u16>> {
    match ep.backend {
        BackendId::InternalLossless => lossless::decode(&ep.payload, ep.width, ep.height),
        BackendId::InternalLossy => {
            let div = lossy_divisor(ep.qp_used);
            let reduced = lossless::decode(&ep.payload, ep.width, ep.height)?;
            Ok(reduced.map(|v| (v as u32 * div).min(MAX_INDEX as u32) as u16))
        }
        BackendId::Hevc => {
            let config = hevc.ok_or_else(|| {
                Error::BackendUnavailable("no external decoder configured for HEVC planes".into())
            })?;
            hevc::decode(&ep.payload, ep.width, ep.height, config)
        }
    }
}
