//! View-projection transform: Gaussian geometry between world space and the
//! generating camera's space.
//!
//! Pixel `(row i, col j)` has its center at normalized image coordinates
//! `((j + 0.5)/W, (i + 0.5)/H)`; positions are stored as camera depth plus
//! offsets from that center. Rotations become `quat(R) ⊗ q` and scales are
//! divided by depth and multiplied by `f = sqrt(fx·fy)`.

use crate::error::{Error, Result};
use crate::geometry::{self, Quat, Vec3};
use crate::model::{CameraView, GaussianRecord};
use crate::plane::Plane;
use crate::scalar::Real;

/// Camera-space planes for one view.
#[derive(Debug, Clone, PartialEq)]
pub struct VptPlanes<T> {
    pub depth: Plane<T>,
    pub dx: Plane<T>,
    pub dy: Plane<T>,
    pub qhat: [Plane<T>; 4],
    pub shat: [Plane<T>; 3],
}

/// Position, rotation and scale of a Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianGeometry<T> {
    pub mu: Vec3<T>,
    pub q: Quat<T>,
    pub s: Vec3<T>,
}

impl<T: Real> VptPlanes<T> {
    fn zeros(width: usize, height: usize) -> Self {
        let z = Plane::filled(width, height, T::zero());
        VptPlanes {
            depth: z.clone(),
            dx: z.clone(),
            dy: z.clone(),
            qhat: [z.clone(), z.clone(), z.clone(), z.clone()],
            shat: [z.clone(), z.clone(), z],
        }
    }

    pub fn width(&self) -> usize {
        self.depth.width
    }

    pub fn height(&self) -> usize {
        self.depth.height
    }
}

#[inline]
fn pixel_center<T: Real>(index: usize, extent: u32) -> T {
    (T::from_usize_lossy(index) + T::lit(0.5)) / T::lit(extent as f64)
}

/// World → camera space. Fails on the first Gaussian with `z ≤ 0`.
///
/// The returned error reports view 0; callers that know the view index
/// should rewrite it.
pub fn vpt_forward<T: Real>(camera: &CameraView<T>, records: &[GaussianRecord<T>]) -> Result<VptPlanes<T>> {
    let (w, h) = (camera.width as usize, camera.height as usize);
    if records.len() != w * h {
        return Err(Error::Shape(format!(
            "{} records for a {w}x{h} view",
            records.len()
        )));
    }
    let rq = geometry::mat_to_quat(&camera.rotation);
    let f = camera.focal();
    let (wf, hf) = (T::lit(w as f64), T::lit(h as f64));
    let mut out = VptPlanes::zeros(w, h);
    for i in 0..h {
        for j in 0..w {
            let idx = i * w + j;
            let rec = &records[idx];
            let pc = camera.world_to_camera(&rec.mu);
            let z = pc[2];
            if !(z > T::zero()) {
                return Err(Error::BehindCamera {
                    view: 0,
                    row: i,
                    col: j,
                    depth: z.as_f64(),
                });
            }
            let u = camera.fx * pc[0] / z + camera.cx;
            let v = camera.fy * pc[1] / z + camera.cy;
            out.depth.data[idx] = z;
            out.dx.data[idx] = u / wf - pixel_center(j, camera.width);
            out.dy.data[idx] = v / hf - pixel_center(i, camera.height);
            let qhat = geometry::quat_canonical(&geometry::quat_normalize(&geometry::quat_mul(&rq, &rec.q)));
            for (c, plane) in out.qhat.iter_mut().enumerate() {
                plane.data[idx] = qhat[c];
            }
            for (c, plane) in out.shat.iter_mut().enumerate() {
                plane.data[idx] = f * rec.s[c] / z;
            }
        }
    }
    Ok(out)
}

/// Camera → world space.
pub fn vpt_inverse<T: Real>(camera: &CameraView<T>, planes: &VptPlanes<T>) -> Result<Vec<GaussianGeometry<T>>> {
    let (w, h) = (camera.width as usize, camera.height as usize);
    if planes.width() != w || planes.height() != h {
        return Err(Error::Shape(format!(
            "planes are {}x{}, camera is {w}x{h}",
            planes.width(),
            planes.height()
        )));
    }
    let rq_inv = geometry::quat_conj(&geometry::mat_to_quat(&camera.rotation));
    let f = camera.focal();
    let (wf, hf) = (T::lit(w as f64), T::lit(h as f64));
    let mut out = Vec::with_capacity(w * h);
    for i in 0..h {
        for j in 0..w {
            let idx = i * w + j;
            let z = planes.depth.data[idx];
            if !(z > T::zero()) {
                return Err(Error::InvalidPlane(format!(
                    "non-positive depth {z} at pixel (row {i}, col {j})"
                )));
            }
            let u = (planes.dx.data[idx] + pixel_center(j, camera.width)) * wf;
            let v = (planes.dy.data[idx] + pixel_center(i, camera.height)) * hf;
            let pc = [(u - camera.cx) * z / camera.fx, (v - camera.cy) * z / camera.fy, z];
            let mu = camera.camera_to_world(&pc);
            let qhat = [
                planes.qhat[0].data[idx],
                planes.qhat[1].data[idx],
                planes.qhat[2].data[idx],
                planes.qhat[3].data[idx],
            ];
            let q = geometry::quat_canonical(&geometry::quat_normalize(&geometry::quat_mul(
                &rq_inv,
                &geometry::quat_normalize(&qhat),
            )));
            let s = [
                planes.shat[0].data[idx] * z / f,
                planes.shat[1].data[idx] * z / f,
                planes.shat[2].data[idx] * z / f,
            ];
            out.push(GaussianGeometry { mu, q, s });
        }
    }
    Ok(out)
}
