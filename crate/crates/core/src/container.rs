//! `.tspl` compressed-scene container.
//!
//! All fields little-endian, floats as `f32`:
//!
//! ```text
//! header   "TSPL" | version u32 | views u32 | W u32 | H u32 | sh_degree u32
//!          | k u32 | flags u32 | plane count u32                  (36 bytes)
//! cameras  views × (fx fy cx cy | R 3×3 | T 3 | W u32 | H u32)    (72 bytes each)
//! basis    lambda (d × f32) | W (d·k × f32, column-major)
//! quant    per plane: step f32 | offset f32 | alpha f32 | truncated u32
//! planes   per plane: backend u8 | qp i16 | length u32 | payload
//! ```
//!
//! Planes are ordered per view as depth, dx, dy, s1..s3, q1..q4, c1..ck,
//! opacity. With the VPT disabled the first slots hold world-space
//! `x y z`, scales and rotations instead.

use std::fmt::Write as _;
use std::path::Path;

use crate::bytes::{ByteReader, ByteWriter, Truncated};
use crate::codec::{BackendId, EncodedPlane};
use crate::error::{Error, Result};
use crate::model::native::{read_camera, write_camera};
use crate::model::{sh_dim, CameraView, NATIVE_CAMERA_BYTES};
use crate::quantizer::{ChannelClass, ChannelQuantMeta};
use crate::vabr::VabrBasis;

pub const MAGIC: [u8; 4] = *b"TSPL";
pub const VERSION: u32 = 1;
pub const HEADER_BYTES: usize = 36;
pub const QUANT_META_BYTES: usize = 16;
pub const PLANE_FRAME_BYTES: usize = 7;
/// Planes per view besides the color components.
pub const GEOMETRY_PLANES: usize = 11;

pub mod flags {
    /// Offsets are measured from half-pixel centers `(j+0.5)/W`.
    pub const HALF_PIXEL_CENTERS: u32 = 1 << 0;
    /// Basis fitted on the mean-centered covariance.
    pub const CENTERED_BASIS: u32 = 1 << 1;
    /// Geometry stored in world space.
    pub const NO_VPT: u32 = 1 << 2;
    /// Raw SH planes (identity basis).
    pub const NO_VABR: u32 = 1 << 3;
    /// Channel standard deviations pooled over all views.
    pub const JOINT_SIGMA: u32 = 1 << 4;

    pub const KNOWN: u32 = HALF_PIXEL_CENTERS | CENTERED_BASIS | NO_VPT | NO_VABR | JOINT_SIGMA;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContainerHeader {
    pub version: u32,
    pub views: u32,
    pub width: u32,
    pub height: u32,
    pub sh_degree: u32,
    pub k: u32,
    pub flags: u32,
}

impl ContainerHeader {
    pub fn planes_per_view(&self) -> usize {
        GEOMETRY_PLANES + self.k as usize
    }

    pub fn plane_count(&self) -> usize {
        self.views as usize * self.planes_per_view()
    }

    pub fn has(&self, flag: u32) -> bool {
        self.flags & flag != 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressedScene {
    pub header: ContainerHeader,
    pub cameras: Vec<CameraView<f32>>,
    pub basis: VabrBasis<f32>,
    pub quant: Vec<ChannelQuantMeta>,
    pub planes: Vec<EncodedPlane>,
}

/// Class and short label of each plane slot within a view.
pub fn plane_layout(k: usize) -> Vec<(ChannelClass, String)> {
    let mut out = vec![
        (ChannelClass::Depth, "depth".to_string()),
        (ChannelClass::OffsetXy, "dx".to_string()),
        (ChannelClass::OffsetXy, "dy".to_string()),
    ];
    out.extend((1..=3).map(|i| (ChannelClass::Scale, format!("s{i}"))));
    out.extend((1..=4).map(|i| (ChannelClass::Rotation, format!("q{i}"))));
    out.extend((1..=k).map(|i| (ChannelClass::Color, format!("c{i}"))));
    out.push((ChannelClass::Opacity, "opacity".to_string()));
    out
}

impl CompressedScene {
    /// Checks the structural invariants shared by writer and reader.
    pub fn validate(&self) -> Result<()> {
        let h = &self.header;
        let corrupt = |section: &'static str, message: String| Error::Corrupt { section, message };
        if h.version != VERSION {
            return Err(Error::UnsupportedVersion(h.version));
        }
        let d = sh_dim(h.sh_degree);
        if h.k == 0 || h.k as usize > d {
            return Err(corrupt("header", format!("k = {} outside [1, {d}]", h.k)));
        }
        if h.flags & !flags::KNOWN != 0 {
            return Err(corrupt("header", format!("unknown flag bits {:#x}", h.flags & !flags::KNOWN)));
        }
        if self.cameras.len() != h.views as usize {
            return Err(corrupt("cameras", format!("{} cameras for {} views", self.cameras.len(), h.views)));
        }
        for (i, cam) in self.cameras.iter().enumerate() {
            if cam.width != h.width || cam.height != h.height {
                return Err(corrupt(
                    "cameras",
                    format!("camera {i} is {}x{}, header says {}x{}", cam.width, cam.height, h.width, h.height),
                ));
            }
            cam.validate(i)?;
        }
        if self.basis.degree != h.sh_degree || self.basis.k != h.k as usize {
            return Err(corrupt("basis", "basis shape disagrees with header".into()));
        }
        self.basis.validate()?;
        let n = h.plane_count();
        if self.quant.len() != n {
            return Err(corrupt("quant", format!("{} entries, expected {n}", self.quant.len())));
        }
        if self.planes.len() != n {
            return Err(corrupt("planes", format!("{} planes, expected {n}", self.planes.len())));
        }
        for (i, p) in self.planes.iter().enumerate() {
            if p.width != h.width as usize || p.height != h.height as usize {
                return Err(corrupt("planes", format!("plane {i} is {}x{}", p.width, p.height)));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let h = &self.header;
        let mut w = ByteWriter::default();
        w.bytes(&MAGIC);
        for v in [h.version, h.views, h.width, h.height, h.sh_degree, h.k, h.flags] {
            w.u32(v);
        }
        w.u32(h.plane_count() as u32);
        for cam in &self.cameras {
            write_camera(&mut w, cam);
        }
        for v in self.basis.lambda.iter().chain(&self.basis.wmat) {
            w.f32(*v);
        }
        for q in &self.quant {
            w.f32(q.step);
            w.f32(q.offset);
            w.f32(q.alpha);
            w.u32(q.count_truncated);
        }
        for p in &self.planes {
            w.u8(p.backend as u8);
            let qp = i16::try_from(p.qp_used).map_err(|_| Error::Config(format!("QP {} out of range", p.qp_used)))?;
            w.i16(qp);
            w.u32(p.payload.len() as u32);
            w.bytes(&p.payload);
        }
        Ok(w.buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        fn cut(section: &'static str) -> impl Fn(Truncated) -> Error {
            move |t| Error::Corrupt {
                section,
                message: format!("file truncated at byte {} (needed {} more bytes)", t.offset, t.wanted),
            }
        }
        let mut r = ByteReader::new(bytes);
        let magic: [u8; 4] = r.array().map_err(|_| Error::Format("file too short for a TSPL header".into()))?;
        if magic != MAGIC {
            return Err(Error::Format(format!("bad magic {magic:?}, not a TSPL container")));
        }
        let version = r.u32().map_err(cut("header"))?;
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let mut fields = [0u32; 7];
        for f in fields.iter_mut() {
            *f = r.u32().map_err(cut("header"))?;
        }
        let [views, width, height, sh_degree, k, flag_bits, plane_count] = fields;
        let header = ContainerHeader {
            version,
            views,
            width,
            height,
            sh_degree,
            k,
            flags: flag_bits,
        };
        if sh_degree > 16 {
            return Err(Error::Corrupt {
                section: "header",
                message: format!("implausible SH degree {sh_degree}"),
            });
        }
        if plane_count as usize != header.plane_count() {
            return Err(Error::Corrupt {
                section: "header",
                message: format!(
                    "plane count {plane_count} does not match {views} views × {} planes",
                    header.planes_per_view()
                ),
            });
        }
        if (views as usize).saturating_mul(NATIVE_CAMERA_BYTES) > r.remaining() {
            return Err(Error::Corrupt {
                section: "cameras",
                message: format!("file truncated at byte {}", bytes.len()),
            });
        }
        let mut cameras = Vec::with_capacity(views as usize);
        for _ in 0..views {
            cameras.push(read_camera::<f32>(&mut r).map_err(cut("cameras"))?);
        }
        let d = sh_dim(sh_degree);
        let lambda = (0..d).map(|_| r.f32()).collect::<Result<Vec<_>, _>>().map_err(cut("basis"))?;
        let wmat = (0..d * k as usize)
            .map(|_| r.f32())
            .collect::<Result<Vec<_>, _>>()
            .map_err(cut("basis"))?;
        let basis = VabrBasis {
            degree: sh_degree,
            lambda,
            wmat,
            k: k as usize,
            uncentered: !header.has(flags::CENTERED_BASIS),
        };
        let n = header.plane_count();
        if n.saturating_mul(QUANT_META_BYTES) > r.remaining() {
            return Err(Error::Corrupt {
                section: "quant",
                message: format!("file truncated at byte {}", bytes.len()),
            });
        }
        let mut quant = Vec::with_capacity(n);
        for _ in 0..n {
            let read = |r: &mut ByteReader<'_>| -> Result<ChannelQuantMeta, Truncated> {
                Ok(ChannelQuantMeta {
                    step: r.f32()?,
                    offset: r.f32()?,
                    alpha: r.f32()?,
                    count_truncated: r.u32()?,
                })
            };
            quant.push(read(&mut r).map_err(cut("quant"))?);
        }
        let mut planes = Vec::with_capacity(n);
        for i in 0..n {
            let id = r.u8().map_err(cut("planes"))?;
            let backend = BackendId::from_u8(id).ok_or_else(|| Error::Corrupt {
                section: "planes",
                message: format!("plane {i} has unknown backend id {id}"),
            })?;
            let qp_used = r.i16().map_err(cut("planes"))? as i32;
            let len = r.u32().map_err(cut("planes"))? as usize;
            let payload = r.take(len).map_err(cut("planes"))?.to_vec();
            planes.push(EncodedPlane {
                backend,
                width: width as usize,
                height: height as usize,
                payload,
                qp_used,
            });
        }
        if r.remaining() != 0 {
            return Err(Error::Corrupt {
                section: "planes",
                message: format!("{} trailing bytes", r.remaining()),
            });
        }
        let cs = CompressedScene {
            header,
            cameras,
            basis,
            quant,
            planes,
        };
        cs.validate()?;
        Ok(cs)
    }

    /// Size of everything except plane payloads: header, cameras, basis,
    /// quantization metadata and per-plane framing.
    pub fn overhead_bytes(&self) -> (u64, u64) {
        let d = self.basis.dim();
        let meta = self.cameras.len() * NATIVE_CAMERA_BYTES
            + 4 * (d + d * self.basis.k)
            + self.quant.len() * QUANT_META_BYTES
            + self.planes.len() * PLANE_FRAME_BYTES;
        (HEADER_BYTES as u64, meta as u64)
    }

    pub fn byte_size(&self) -> u64 {
        let (h, m) = self.overhead_bytes();
        h + m + self.planes.iter().map(|p| p.payload.len() as u64).sum::<u64>()
    }
}

pub fn write_container(cs: &CompressedScene, path: &Path) -> Result<u64> {
    let bytes = cs.to_bytes()?;
    std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    Ok(bytes.len() as u64)
}

pub fn read_container(path: &Path) -> Result<CompressedScene> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    CompressedScene::from_bytes(&bytes)
}

/// Components of the bit-allocation report, in display order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    Position,
    Scale,
    Rotation,
    Color,
    Opacity,
    Metadata,
    Header,
}

impl Component {
    pub const ALL: [Component; 7] = [
        Component::Position,
        Component::Scale,
        Component::Rotation,
        Component::Color,
        Component::Opacity,
        Component::Metadata,
        Component::Header,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Component::Position => "position",
            Component::Scale => "scale",
            Component::Rotation => "rotation",
            Component::Color => "color",
            Component::Opacity => "opacity",
            Component::Metadata => "metadata",
            Component::Header => "header",
        }
    }

    fn of(class: ChannelClass) -> Self {
        match class {
            ChannelClass::Depth | ChannelClass::OffsetXy => Component::Position,
            ChannelClass::Scale => Component::Scale,
            ChannelClass::Rotation => Component::Rotation,
            ChannelClass::Color => Component::Color,
            ChannelClass::Opacity => Component::Opacity,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationRow {
    pub component: Component,
    pub bytes: u64,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BitAllocation {
    pub rows: Vec<AllocationRow>,
    pub total_bytes: u64,
}

impl BitAllocation {
    pub fn bytes(&self, component: Component) -> u64 {
        self.rows
            .iter()
            .find(|r| r.component == component)
            .map_or(0, |r| r.bytes)
    }

    /// Payload bytes of the five parameter classes.
    pub fn plane_bytes(&self) -> u64 {
        self.rows
            .iter()
            .filter(|r| !matches!(r.component, Component::Metadata | Component::Header))
            .map(|r| r.bytes)
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("component,bytes,percent\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{:.3}", r.component.name(), r.bytes, r.percent);
        }
        let _ = writeln!(out, "total,{},100.000", self.total_bytes);
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{:<10} {:>12} {:>8}\n", "component", "bytes", "share");
        for r in &self.rows {
            let _ = writeln!(out, "{:<10} {:>12} {:>7.2}%", r.component.name(), r.bytes, r.percent);
        }
        let _ = writeln!(out, "{:<10} {:>12} {:>7.2}%", "total", self.total_bytes, 100.0);
        out
    }
}

/// Groups bytes by parameter class; rows sum exactly to the file size.
pub fn bit_allocation_report(cs: &CompressedScene) -> BitAllocation {
    let layout = plane_layout(cs.header.k as usize);
    let per_view = layout.len();
    let mut bytes = [0u64; 7];
    for (i, p) in cs.planes.iter().enumerate() {
        let component = Component::of(layout[i % per_view].0);
        bytes[component as usize] += p.payload.len() as u64;
    }
    let (header, meta) = cs.overhead_bytes();
    bytes[Component::Metadata as usize] = meta;
    bytes[Component::Header as usize] = header;
    let total: u64 = bytes.iter().sum();
    let rows = Component::ALL
        .into_iter()
        .map(|c| AllocationRow {
            component: c,
            bytes: bytes[c as usize],
            percent: if total > 0 {
                100.0 * bytes[c as usize] as f64 / total as f64
            } else {
                0.0
            },
        })
        .collect();
    BitAllocation {
        rows,
        total_bytes: total,
    }
}

/// Human-readable header summary.
pub fn describe(cs: &CompressedScene) -> String {
    let h = &cs.header;
    let mut out = String::new();
    let _ = writeln!(out, "format      TSPL v{}", h.version);
    let _ = writeln!(out, "views       {}", h.views);
    let _ = writeln!(out, "resolution  {}x{}", h.width, h.height);
    let _ = writeln!(out, "sh_degree   {} (d = {})", h.sh_degree, sh_dim(h.sh_degree));
    let _ = writeln!(out, "k           {}", h.k);
    let _ = writeln!(out, "planes      {}", h.plane_count());
    let mut flag_names = Vec::new();
    for (bit, name) in [
        (flags::HALF_PIXEL_CENTERS, "half-pixel-centers"),
        (flags::CENTERED_BASIS, "centered-basis"),
        (flags::NO_VPT, "no-vpt"),
        (flags::NO_VABR, "no-vabr"),
        (flags::JOINT_SIGMA, "joint-sigma"),
    ] {
        if h.has(bit) {
            flag_names.push(name);
        }
    }
    let _ = writeln!(out, "flags       {}", flag_names.join(", "));
    let mut backends: Vec<&str> = cs.planes.iter().map(|p| p.backend.name()).collect();
    backends.sort_unstable();
    backends.dedup();
    let _ = writeln!(out, "backends    {}", backends.join(", "));
    let truncated: u64 = cs.quant.iter().map(|q| q.count_truncated as u64).sum();
    let _ = writeln!(out, "truncated   {truncated}");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::encode_plane_lossless;
    use crate::plane::Plane;

    fn camera(w: u32, h: u32) -> CameraView<f32> {
        CameraView {
            fx: 50.0,
            fy: 50.0,
            cx: w as f32 / 2.0,
            cy: h as f32 / 2.0,
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0, 0.0, 1.0],
            width: w,
            height: h,
        }
    }

    fn sample(views: usize) -> CompressedScene {
        let (w, h, k) = (5u32, 3u32, 2usize);
        let n = views * (GEOMETRY_PLANES + k);
        let mut basis = VabrBasis::<f32>::identity(0);
        basis.k = k;
        basis.wmat.truncate(3 * k);
        CompressedScene {
            header: ContainerHeader {
                version: VERSION,
                views: views as u32,
                width: w,
                height: h,
                sh_degree: 0,
                k: k as u32,
                flags: flags::HALF_PIXEL_CENTERS | flags::JOINT_SIGMA,
            },
            cameras: vec![camera(w, h); views],
            basis,
            quant: (0..n)
                .map(|i| ChannelQuantMeta {
                    step: 0.5 + i as f32,
                    offset: -(i as f32),
                    alpha: 256.0,
                    count_truncated: i as u32,
                })
                .collect(),
            planes: (0..n)
                .map(|i| encode_plane_lossless(&Plane::filled(w as usize, h as usize, i as u16)).unwrap())
                .collect(),
        }
    }

    #[test]
    fn round_trip() {
        let cs = sample(2);
        let bytes = cs.to_bytes().unwrap();
        assert_eq!(bytes.len() as u64, cs.byte_size());
        assert_eq!(CompressedScene::from_bytes(&bytes).unwrap(), cs);
    }

    #[test]
    fn header_layout() {
        let bytes = sample(1).to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"TSPL");
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
        assert_eq!([word(0), word(1), word(2), word(3), word(4), word(5)], [1, 1, 5, 3, 0, 2]);
        assert_eq!(word(7), 13);
    }

    #[test]
    fn zero_view_container() {
        let cs = sample(0);
        let bytes = cs.to_bytes().unwrap();
        assert_eq!(bytes.len(), HEADER_BYTES + 4 * (3 + 3 * 2));
        let back = CompressedScene::from_bytes(&bytes).unwrap();
        assert!(back.planes.is_empty());
        let report = bit_allocation_report(&back);
        assert_eq!(report.total_bytes, bytes.len() as u64);
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = sample(1).to_bytes().unwrap();
        bytes[0] = b'X';
        assert!(matches!(CompressedScene::from_bytes(&bytes), Err(Error::Format(_))));
        let mut bytes = sample(1).to_bytes().unwrap();
        bytes[4] = 2;
        assert!(matches!(
            CompressedScene::from_bytes(&bytes),
            Err(Error::UnsupportedVersion(2))
        ));
        assert!(matches!(CompressedScene::from_bytes(b"TS"), Err(Error::Format(_))));
    }

    #[test]
    fn truncation_names_section() {
        let bytes = sample(1).to_bytes().unwrap();
        let cases = [
            (20, "header"),
            (HEADER_BYTES + 10, "cameras"),
            (HEADER_BYTES + NATIVE_CAMERA_BYTES + 4, "basis"),
            (bytes.len() - 1, "planes"),
        ];
        for (len, want) in cases {
            match CompressedScene::from_bytes(&bytes[..len]) {
                Err(Error::Corrupt { section, .. }) => assert_eq!(section, want, "cut at {len}"),
                other => panic!("cut at {len}: {other:?}"),
            }
        }
    }

    #[test]
    fn plane_count_mismatch() {
        let mut bytes = sample(1).to_bytes().unwrap();
        bytes[32] = 12;
        assert!(matches!(
            CompressedScene::from_bytes(&bytes),
            Err(Error::Corrupt { section: "header", .. })
        ));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = sample(1).to_bytes().unwrap();
        bytes.push(0);
        assert!(matches!(
            CompressedScene::from_bytes(&bytes),
            Err(Error::Corrupt { section: "planes", .. })
        ));
    }

    #[test]
    fn unknown_backend_rejected() {
        let cs = sample(1);
        let mut bytes = cs.to_bytes().unwrap();
        let first_plane = bytes.len() - cs.planes.iter().map(|p| p.payload.len() + PLANE_FRAME_BYTES).sum::<usize>();
        bytes[first_plane] = 9;
        assert!(matches!(
            CompressedScene::from_bytes(&bytes),
            Err(Error::Corrupt { section: "planes", .. })
        ));
    }

    #[test]
    fn allocation_sums_to_file_size() {
        let cs = sample(3);
        let report = bit_allocation_report(&cs);
        let sum: u64 = report.rows.iter().map(|r| r.bytes).sum();
        assert_eq!(sum, cs.to_bytes().unwrap().len() as u64);
        assert_eq!(report.total_bytes, sum);
        let layout = plane_layout(2);
        let color: u64 = cs
            .planes
            .iter()
            .enumerate()
            .filter(|(i, _)| layout[i % layout.len()].0 == ChannelClass::Color)
            .map(|(_, p)| p.payload.len() as u64)
            .sum();
        assert_eq!(report.bytes(Component::Color), color);
        let csv = report.to_csv();
        assert!(csv.starts_with("component,bytes,percent\n"));
        assert_eq!(csv.lines().count(), 9);
    }

    #[test]
    fn writer_rejects_inconsistent_scene() {
        let mut cs = sample(1);
        cs.quant.pop();
        assert!(cs.to_bytes().is_err());
        let mut cs = sample(1);
        cs.header.k = 4;
        assert!(cs.to_bytes().is_err());
    }
}
