//! Pixel-aligned Gaussian scene types and their file formats.
//!
//! A [`SceneModel`] holds one Gaussian per pixel per input view. Records are
//! stored row-major, so record `row * width + col` belongs to pixel
//! `(row, col)` of its view. SH coefficients are interleaved by basis
//! function: `sh[3 * i + c]` is basis `i`, color channel `c` (RGB).

pub(crate) mod native;
mod ply;

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{self, Mat3, Quat, Vec3};
use crate::scalar::Real;

pub use native::{NATIVE_CAMERA_BYTES, NATIVE_HEADER_BYTES, NATIVE_MAGIC, NATIVE_VERSION};

/// Number of SH coefficients per color channel for a degree.
pub const fn sh_basis_count(degree: u32) -> usize {
    ((degree + 1) * (degree + 1)) as usize
}

/// Length of the RGB SH vector `d = 3·(N_l+1)²`.
pub const fn sh_dim(degree: u32) -> usize {
    3 * sh_basis_count(degree)
}

/// Pinhole camera with a world-to-camera rigid transform.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraView<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    /// World-to-camera rotation.
    pub rotation: Mat3<T>,
    /// World-to-camera translation.
    pub translation: Vec3<T>,
    pub width: u32,
    pub height: u32,
}

impl<T: Real> CameraView<T> {
    pub fn validate(&self, index: usize) -> Result<()> {
        let fail = |message: String| Error::Validation {
            what: "camera",
            index,
            message,
        };
        if !(self.fx > T::zero() && self.fy > T::zero()) {
            return Err(fail(format!("focal lengths must be positive, got ({}, {})", self.fx, self.fy)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(fail(format!("empty image size {}x{}", self.width, self.height)));
        }
        let finite = [self.cx, self.cy]
            .iter()
            .chain(self.rotation.iter().flatten())
            .chain(self.translation.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(fail("non-finite camera parameter".into()));
        }
        let tol = T::lit(1e-6);
        let ortho = geometry::orthonormality_error(&self.rotation);
        if ortho > tol {
            return Err(fail(format!("rotation is not orthonormal (error {ortho})")));
        }
        let det = geometry::determinant(&self.rotation);
        if (det - T::one()).abs() > tol {
            return Err(fail(format!("rotation determinant {det} is not +1")));
        }
        Ok(())
    }

    /// Geometric mean focal length `sqrt(fx·fy)`.
    pub fn focal(&self) -> T {
        (self.fx * self.fy).sqrt()
    }

    /// Camera center in world space, `−Rᵀ·T`.
    pub fn center(&self) -> Vec3<T> {
        let c = geometry::mat_t_vec(&self.rotation, &self.translation);
        [-c[0], -c[1], -c[2]]
    }

    pub fn world_to_camera(&self, p: &Vec3<T>) -> Vec3<T> {
        let r = geometry::mat_vec(&self.rotation, p);
        [
            r[0] + self.translation[0],
            r[1] + self.translation[1],
            r[2] + self.translation[2],
        ]
    }

    pub fn camera_to_world(&self, p: &Vec3<T>) -> Vec3<T> {
        let shifted = [
            p[0] - self.translation[0],
            p[1] - self.translation[1],
            p[2] - self.translation[2],
        ];
        geometry::mat_t_vec(&self.rotation, &shifted)
    }

    /// Same pose and field of view at a different image size.
    pub fn resized(&self, width: u32, height: u32) -> Self {
        let sx = T::lit(width as f64 / self.width as f64);
        let sy = T::lit(height as f64 / self.height as f64);
        CameraView {
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: self.cx * sx,
            cy: self.cy * sy,
            rotation: self.rotation,
            translation: self.translation,
            width,
            height,
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn cast<U: Real>(&self) -> CameraView<U> {
        CameraView {
            fx: U::lit(self.fx.as_f64()),
            fy: U::lit(self.fy.as_f64()),
            cx: U::lit(self.cx.as_f64()),
            cy: U::lit(self.cy.as_f64()),
            rotation: geometry::cast_mat(&self.rotation),
            translation: geometry::cast_vec(&self.translation),
            width: self.width,
            height: self.height,
        }
    }
}

/// One Gaussian primitive.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianRecord<T> {
    /// World-space center.
    pub mu: Vec3<T>,
    /// Unit rotation quaternion `(w, x, y, z)`.
    pub q: Quat<T>,
    /// Positive per-axis scales.
    pub s: Vec3<T>,
    /// SH color coefficients, basis-major RGB interleaved.
    pub sh: Vec<T>,
    /// Opacity in `[0, 1]`.
    pub sigma: T,
}

impl<T: Real> GaussianRecord<T> {
    pub fn validate(&self, index: usize, sh_len: usize) -> Result<()> {
        let fail = |message: String| Error::Validation {
            what: "record",
            index,
            message,
        };
        if self.sh.len() != sh_len {
            return Err(fail(format!("expected {sh_len} SH coefficients, found {}", self.sh.len())));
        }
        let all_finite = self
            .mu
            .iter()
            .chain(&self.q)
            .chain(&self.s)
            .chain(&self.sh)
            .chain(std::iter::once(&self.sigma))
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(fail("non-finite field".into()));
        }
        let qn = geometry::quat_norm(&self.q);
        if (qn - T::one()).abs() > T::lit(1e-5) {
            return Err(fail(format!("quaternion norm {qn} is not 1")));
        }
        if self.q != geometry::quat_canonical(&self.q) {
            return Err(fail("quaternion sign is not canonical".into()));
        }
        if self.s.iter().any(|&v| v <= T::zero()) {
            return Err(fail(format!("non-positive scale {:?}", self.s)));
        }
        if !(self.sigma >= T::zero() && self.sigma <= T::one()) {
            return Err(fail(format!("opacity {} outside [0, 1]", self.sigma)));
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> GaussianRecord<U> {
        GaussianRecord {
            mu: geometry::cast_vec(&self.mu),
            q: [
                U::lit(self.q[0].as_f64()),
                U::lit(self.q[1].as_f64()),
                U::lit(self.q[2].as_f64()),
                U::lit(self.q[3].as_f64()),
            ],
            s: geometry::cast_vec(&self.s),
            sh: self.sh.iter().map(|v| U::lit(v.as_f64())).collect(),
            sigma: U::lit(self.sigma.as_f64()),
        }
    }
}

/// One input view: its camera and its `height × width` Gaussian grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewMap<T> {
    pub camera: CameraView<T>,
    pub records: Vec<GaussianRecord<T>>,
}

impl<T: Real> ViewMap<T> {
    #[inline]
    pub fn record(&self, row: usize, col: usize) -> &GaussianRecord<T> {
        &self.records[row * self.camera.width as usize + col]
    }
}

/// Per-view pixel-aligned Gaussian feature maps.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneModel<T> {
    pub sh_degree: u32,
    pub views: Vec<ViewMap<T>>,
}

/// On-disk scene encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneFormat {
    /// Little-endian `.gsmap` binary.
    Native,
    /// Splat-style PLY plus a `.cams` camera sidecar.
    Ply,
}

impl SceneFormat {
    /// `.ply` selects PLY; anything else is native.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("ply") => SceneFormat::Ply,
            _ => SceneFormat::Native,
        }
    }
}

impl<T: Real> SceneModel<T> {
    pub fn new(sh_degree: u32) -> Self {
        SceneModel {
            sh_degree,
            views: Vec::new(),
        }
    }

    pub fn sh_dim(&self) -> usize {
        sh_dim(self.sh_degree)
    }

    pub fn record_count(&self) -> usize {
        self.views.iter().map(|v| v.records.len()).sum()
    }

    pub fn cameras(&self) -> Vec<CameraView<T>> {
        self.views.iter().map(|v| v.camera.clone()).collect()
    }

    pub fn records(&self) -> impl Iterator<Item = &GaussianRecord<T>> {
        self.views.iter().flat_map(|v| v.records.iter())
    }

    /// Size of the scene as raw float32 records: `(3+4+3+d+1)·4` bytes each.
    pub fn raw_f32_bytes(&self) -> u64 {
        let per_record = (3 + 4 + 3 + self.sh_dim() + 1) * 4;
        (self.record_count() * per_record) as u64
    }

    /// Checks every scene invariant; errors name the offending record's
    /// global index.
    pub fn validate(&self) -> Result<()> {
        let d = self.sh_dim();
        let mut base = 0usize;
        for (vi, view) in self.views.iter().enumerate() {
            view.camera.validate(vi)?;
            let expected = view.camera.pixel_count();
            if view.records.len() != expected {
                return Err(Error::Validation {
                    what: "view",
                    index: vi,
                    message: format!(
                        "{} records for a {}x{} view (expected {expected})",
                        view.records.len(),
                        view.camera.width,
                        view.camera.height
                    ),
                });
            }
            for (ri, rec) in view.records.iter().enumerate() {
                rec.validate(base + ri, d)?;
            }
            base += expected;
        }
        Ok(())
    }

    /// Forces `w ≥ 0` on every quaternion.
    pub fn canonicalize_quaternions(&mut self) {
        for view in &mut self.views {
            for rec in &mut view.records {
                rec.q = geometry::quat_canonical(&rec.q);
            }
        }
    }

    pub fn cast<U: Real>(&self) -> SceneModel<U> {
        SceneModel {
            sh_degree: self.sh_degree,
            views: self
                .views
                .iter()
                .map(|v| ViewMap {
                    camera: v.camera.cast(),
                    records: v.records.iter().map(GaussianRecord::cast).collect(),
                })
                .collect(),
        }
    }
}

/// Loads and validates a scene, canonicalizing quaternion signs.
pub fn load_scene<T: Real>(path: &Path, format: SceneFormat) -> Result<SceneModel<T>> {
    let mut scene: SceneModel<T> = match format {
        SceneFormat::Native => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            native::decode(&bytes)?
        }
        SceneFormat::Ply => ply::read(path)?,
    };
    scene.canonicalize_quaternions();
    scene.validate()?;
    Ok(scene)
}

/// Writes a scene and returns the number of bytes written (for PLY, the
/// `.ply` file only).
pub fn save_scene<T: Real>(scene: &SceneModel<T>, path: &Path, format: SceneFormat) -> Result<u64> {
    match format {
        SceneFormat::Native => {
            let bytes = native::encode(scene)?;
            std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
            Ok(bytes.len() as u64)
        }
        SceneFormat::Ply => ply::write(scene, path),
    }
}

pub use native::{decode as decode_native, encode as encode_native};
pub use ply::sidecar_path;
