//! `.gsmap`: little-endian binary scene file.
//!
//! ```text
//! header   magic "GSMP" | version u32 | view count u32 | sh_degree u32
//! per view fx fy cx cy f32 | R (9 × f32, row-major) | T (3 × f32) | W u32 | H u32
//!          W·H records: mu(3) q(4) s(3) sh(d) sigma(1), all f32
//! ```

use super::{sh_dim, CameraView, GaussianRecord, SceneModel, ViewMap};
use crate::bytes::{ByteReader, ByteWriter, Truncated};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const NATIVE_MAGIC: [u8; 4] = *b"GSMP";
pub const NATIVE_VERSION: u32 = 1;
pub const NATIVE_HEADER_BYTES: usize = 16;
pub const NATIVE_CAMERA_BYTES: usize = 72;

/// Highest SH degree accepted from files; guards allocation on corrupt headers.
const MAX_SH_DEGREE: u32 = 16;

fn truncated(t: Truncated) -> Error {
    Error::Parse {
        offset: t.offset,
        message: format!("unexpected end of file (needed {} more bytes)", t.wanted),
    }
}

pub(crate) fn write_camera<T: Real>(w: &mut ByteWriter, cam: &CameraView<T>) {
    for v in [cam.fx, cam.fy, cam.cx, cam.cy] {
        w.f32(v.as_f32());
    }
    for v in cam.rotation.iter().flatten() {
        w.f32(v.as_f32());
    }
    for v in &cam.translation {
        w.f32(v.as_f32());
    }
    w.u32(cam.width);
    w.u32(cam.height);
}

pub(crate) fn read_camera<T: Real>(r: &mut ByteReader<'_>) -> Result<CameraView<T>, Truncated> {
    let mut f = || r.f32().map(|v| T::lit(v as f64));
    let (fx, fy, cx, cy) = (f()?, f()?, f()?, f()?);
    let mut rotation = [[T::zero(); 3]; 3];
    for row in rotation.iter_mut() {
        for cell in row.iter_mut() {
            *cell = f()?;
        }
    }
    let translation = [f()?, f()?, f()?];
    let width = r.u32()?;
    let height = r.u32()?;
    Ok(CameraView {
        fx,
        fy,
        cx,
        cy,
        rotation,
        translation,
        width,
        height,
    })
}

pub fn encode<T: Real>(scene: &SceneModel<T>) -> Result<Vec<u8>> {
    let d = scene.sh_dim();
    let mut w = ByteWriter::default();
    w.bytes(&NATIVE_MAGIC);
    w.u32(NATIVE_VERSION);
    w.u32(scene.views.len() as u32);
    w.u32(scene.sh_degree);
    let mut base = 0;
    for (vi, view) in scene.views.iter().enumerate() {
        if view.records.len() != view.camera.pixel_count() {
            return Err(Error::Validation {
                what: "view",
                index: vi,
                message: "record count does not match the camera resolution".into(),
            });
        }
        write_camera(&mut w, &view.camera);
        for (ri, rec) in view.records.iter().enumerate() {
            if rec.sh.len() != d {
                return Err(Error::Validation {
                    what: "record",
                    index: base + ri,
                    message: format!("expected {d} SH coefficients, found {}", rec.sh.len()),
                });
            }
            for v in rec.mu.iter().chain(&rec.q).chain(&rec.s).chain(&rec.sh) {
                w.f32(v.as_f32());
            }
            w.f32(rec.sigma.as_f32());
        }
        base += view.records.len();
    }
    Ok(w.buf)
}

pub fn decode<T: Real>(bytes: &[u8]) -> Result<SceneModel<T>> {
    let mut r = ByteReader::new(bytes);
    let magic: [u8; 4] = r.array().map_err(truncated)?;
    if magic != NATIVE_MAGIC {
        return Err(Error::Parse {
            offset: 0,
            message: format!("bad magic {magic:?}, expected \"GSMP\""),
        });
    }
    let version = r.u32().map_err(truncated)?;
    if version != NATIVE_VERSION {
        return Err(Error::Parse {
            offset: 4,
            message: format!("unsupported version {version}"),
        });
    }
    let view_count = r.u32().map_err(truncated)? as usize;
    let sh_degree = r.u32().map_err(truncated)?;
    if sh_degree > MAX_SH_DEGREE {
        return Err(Error::Parse {
            offset: 12,
            message: format!("implausible SH degree {sh_degree}"),
        });
    }
    let d = sh_dim(sh_degree);
    let record_bytes = (3 + 4 + 3 + d + 1) * 4;

    let mut views = Vec::with_capacity(view_count.min(1024));
    for _ in 0..view_count {
        let camera: CameraView<T> = read_camera(&mut r).map_err(truncated)?;
        let n = camera.pixel_count();
        if n.saturating_mul(record_bytes) > r.remaining() {
            return Err(Error::Parse {
                offset: r.offset(),
                message: format!(
                    "view of {}x{} needs {} record bytes, only {} remain",
                    camera.width,
                    camera.height,
                    n.saturating_mul(record_bytes),
                    r.remaining()
                ),
            });
        }
        let mut records = Vec::with_capacity(n);
        for _ in 0..n {
            let mut f = || r.f32().map(|v| T::lit(v as f64)).map_err(truncated);
            let mu = [f()?, f()?, f()?];
            let q = [f()?, f()?, f()?, f()?];
            let s = [f()?, f()?, f()?];
            let sh = (0..d).map(|_| f()).collect::<Result<Vec<_>>>()?;
            let sigma = f()?;
            records.push(GaussianRecord { mu, q, s, sh, sigma });
        }
        views.push(ViewMap { camera, records });
    }
    if r.remaining() != 0 {
        return Err(Error::Parse {
            offset: r.offset(),
            message: format!("{} trailing bytes after last view", r.remaining()),
        });
    }
    Ok(SceneModel { sh_degree, views })
}
