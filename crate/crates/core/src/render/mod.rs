//! CPU Gaussian splatting rasterizer and image metrics.
//!
//! Each Gaussian is projected with the first-order (EWA) approximation,
//! dilated by 0.3 px, and alpha-composited front to back after a global
//! depth sort. Pixel `(row, col)` samples the image plane at
//! `(col + 0.5, row + 0.5)`.

mod image_io;
mod metrics;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{self, Mat3};
use crate::model::{CameraView, GaussianRecord, SceneModel};
use crate::scalar::Real;
use crate::sh::ShBasis;

pub use image_io::{save_pfm, save_png};
pub use metrics::{mse, psnr, ssim};

pub const DILATION: f64 = 0.3;
pub const MAX_ALPHA: f64 = 0.99;
pub const MIN_ALPHA: f64 = 1.0 / 255.0;
pub const NEAR_PLANE: f64 = 0.01;
pub const MIN_TRANSMITTANCE: f64 = 1e-4;
const TILE: usize = 16;

/// Interleaved RGB image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Image { width, height, data }
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f32; 3] {
        let i = 3 * (row * self.width + col);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

#[derive(Debug, Clone)]
pub struct RenderTarget<T> {
    pub camera: CameraView<T>,
    pub background: [f32; 3],
}

impl<T: Real> RenderTarget<T> {
    /// Renders at the camera's native resolution over black.
    pub fn new(camera: CameraView<T>) -> Self {
        RenderTarget {
            camera,
            background: [0.0; 3],
        }
    }

    /// Same pose and field of view, rescaled to `width × height`.
    pub fn with_size(camera: &CameraView<T>, width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config(format!("render size {width}x{height} must be at least 1x1")));
        }
        Ok(Self::new(camera.resized(width, height)))
    }

    pub fn background(mut self, rgb: [f32; 3]) -> Self {
        self.background = rgb;
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RenderStats {
    pub drawn: usize,
    pub culled: usize,
    /// Gaussians whose projected covariance was not invertible.
    pub skipped_degenerate: usize,
}

struct Splat {
    depth: f64,
    index: usize,
    u: f64,
    v: f64,
    conic: [f64; 3],
    opacity: f64,
    color: [f64; 3],
    bbox: [usize; 4],
}

fn covariance(q: &[f64; 4], s: &[f64; 3]) -> Mat3<f64> {
    let r = geometry::quat_to_mat(&geometry::quat_normalize(q));
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = (0..3).map(|k| r[i][k] * s[k] * s[k] * r[j][k]).sum();
        }
    }
    m
}

fn project<T: Real>(
    g: &GaussianRecord<T>,
    index: usize,
    cam: &CameraView<f64>,
    center: &[f64; 3],
    sh: &ShBasis,
    basis_buf: &mut [f64],
    stats: &mut RenderStats,
) -> Option<Splat> {
    let mu: [f64; 3] = geometry::cast_vec(&g.mu);
    let p = cam.world_to_camera(&mu);
    let z = p[2];
    if !(z > NEAR_PLANE) {
        stats.culled += 1;
        return None;
    }
    let (w, h) = (cam.width as f64, cam.height as f64);
    let u = cam.fx * p[0] / z + cam.cx;
    let v = cam.fy * p[1] / z + cam.cy;

    let q = [g.q[0].as_f64(), g.q[1].as_f64(), g.q[2].as_f64(), g.q[3].as_f64()];
    let s = [g.s[0].as_f64(), g.s[1].as_f64(), g.s[2].as_f64()];
    let world = covariance(&q, &s);
    let rw = &cam.rotation;
    let cam_cov = geometry::mat_mul(&geometry::mat_mul(rw, &world), &geometry::transpose(rw));
    let j = [
        [cam.fx / z, 0.0, -cam.fx * p[0] / (z * z)],
        [0.0, cam.fy / z, -cam.fy * p[1] / (z * z)],
    ];
    let mut c2 = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let mut acc = 0.0;
            for k in 0..3 {
                for l in 0..3 {
                    acc += j[a][k] * cam_cov[k][l] * j[b][l];
                }
            }
            c2[a][b] = acc;
        }
    }
    let (ca, cb, cc) = (c2[0][0] + DILATION, c2[0][1], c2[1][1] + DILATION);
    let det = ca * cc - cb * cb;
    if !(det > 0.0) || !det.is_finite() {
        stats.skipped_degenerate += 1;
        return None;
    }
    let conic = [cc / det, -cb / det, ca / det];
    let mid = 0.5 * (ca + cc);
    let lmax = mid + (mid * mid - det).max(0.1).sqrt();
    let radius = (3.0 * lmax.sqrt()).ceil();
    if u + radius < 0.0 || v + radius < 0.0 || u - radius > w || v - radius > h {
        stats.culled += 1;
        return None;
    }
    let clampi = |x: f64, hi: f64| x.max(0.0).min(hi) as usize;
    let bbox = [
        clampi((u - radius - 0.5).floor(), w),
        clampi((u + radius + 0.5).ceil(), w),
        clampi((v - radius - 0.5).floor(), h),
        clampi((v + radius + 0.5).ceil(), h),
    ];
    if bbox[0] >= bbox[1] || bbox[2] >= bbox[3] {
        stats.culled += 1;
        return None;
    }

    let dir = geometry::normalize(&geometry::sub(&mu, center));
    sh.eval_into(&dir, basis_buf);
    let mut color = [0.5f64; 3];
    for (i, y) in basis_buf.iter().enumerate() {
        for (c, out) in color.iter_mut().enumerate() {
            *out += y * g.sh[3 * i + c].as_f64();
        }
    }
    for c in color.iter_mut() {
        *c = c.clamp(0.0, 1.0);
    }
    Some(Splat {
        depth: z,
        index,
        u,
        v,
        conic,
        opacity: g.sigma.as_f64(),
        color,
        bbox,
    })
}

fn composite(splats: &[&Splat], x: f64, y: f64, background: [f32; 3]) -> [f32; 3] {
    let mut t = 1.0f64;
    let mut rgb = [0.0f64; 3];
    for s in splats {
        let (dx, dy) = (s.u - x, s.v - y);
        let power = -0.5 * (s.conic[0] * dx * dx + s.conic[2] * dy * dy) - s.conic[1] * dx * dy;
        if power > 0.0 {
            continue;
        }
        let alpha = (s.opacity * power.exp()).min(MAX_ALPHA);
        if alpha < MIN_ALPHA {
            continue;
        }
        let next = t * (1.0 - alpha);
        if next < MIN_TRANSMITTANCE {
            break;
        }
        for c in 0..3 {
            rgb[c] += s.color[c] * alpha * t;
        }
        t = next;
    }
    let mut out = [0f32; 3];
    for c in 0..3 {
        out[c] = (rgb[c] + t * background[c] as f64).clamp(0.0, 1.0) as f32;
    }
    out
}

/// Renders a list of Gaussians whose SH vectors have degree `sh_degree`.
pub fn render<T: Real>(
    gaussians: &[GaussianRecord<T>],
    sh_degree: u32,
    target: &RenderTarget<T>,
) -> Result<(Image, RenderStats)> {
    let cam: CameraView<f64> = target.camera.cast();
    cam.validate(0)?;
    if cam.width == 0 || cam.height == 0 {
        return Err(Error::Config("render target must be at least 1x1".into()));
    }
    let sh = ShBasis::new(sh_degree)?;
    let sh_len = 3 * sh.len();
    if let Some(i) = gaussians.iter().position(|g| g.sh.len() != sh_len) {
        return Err(Error::Shape(format!(
            "Gaussian {i} has {} SH coefficients, expected {sh_len}",
            gaussians[i].sh.len()
        )));
    }
    let center = cam.center();
    let mut stats = RenderStats::default();
    let mut buf = vec![0.0f64; sh.len()];
    let mut splats: Vec<Splat> = gaussians
        .iter()
        .enumerate()
        .filter_map(|(i, g)| project(g, i, &cam, &center, &sh, &mut buf, &mut stats))
        .collect();
    splats.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.index.cmp(&b.index)));
    stats.drawn = splats.len();

    let (w, h) = (cam.width as usize, cam.height as usize);
    let (tw, th) = (w.div_ceil(TILE), h.div_ceil(TILE));
    let mut bins: Vec<Vec<&Splat>> = vec![Vec::new(); tw * th];
    for s in &splats {
        for ty in s.bbox[2] / TILE..=(s.bbox[3] - 1) / TILE {
            for tx in s.bbox[0] / TILE..=(s.bbox[1] - 1) / TILE {
                bins[ty * tw + tx].push(s);
            }
        }
    }
    let background = target.background;
    let tiles: Vec<Vec<[f32; 3]>> = bins
        .par_iter()
        .enumerate()
        .map(|(t, list)| {
            let (x0, y0) = ((t % tw) * TILE, (t / tw) * TILE);
            let (x1, y1) = ((x0 + TILE).min(w), (y0 + TILE).min(h));
            let mut out = Vec::with_capacity((x1 - x0) * (y1 - y0));
            for row in y0..y1 {
                for col in x0..x1 {
                    out.push(composite(list, col as f64 + 0.5, row as f64 + 0.5, background));
                }
            }
            out
        })
        .collect();

    let mut image = Image::filled(w, h, [0.0; 3]);
    for (t, px) in tiles.into_iter().enumerate() {
        let (x0, y0) = ((t % tw) * TILE, (t / tw) * TILE);
        let x1 = (x0 + TILE).min(w);
        let tile_w = x1 - x0;
        for (k, rgb) in px.into_iter().enumerate() {
            let (row, col) = (y0 + k / tile_w, x0 + k % tile_w);
            let i = 3 * (row * w + col);
            image.data[i..i + 3].copy_from_slice(&rgb);
        }
    }
    Ok((image, stats))
}

/// Renders every record of every view of `scene` through `target`.
pub fn render_scene<T: Real>(scene: &SceneModel<T>, target: &RenderTarget<T>) -> Result<Image> {
    let all: Vec<GaussianRecord<T>> = scene.records().cloned().collect();
    Ok(render(&all, scene.sh_degree, target)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sh::C0;

    fn camera(w: u32, h: u32) -> CameraView<f64> {
        CameraView {
            fx: 100.0,
            fy: 100.0,
            cx: w as f64 / 2.0,
            cy: h as f64 / 2.0,
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
            width: w,
            height: h,
        }
    }

    fn white_at(x: f64, y: f64, z: f64, scale: f64, sigma: f64) -> GaussianRecord<f64> {
        GaussianRecord {
            mu: [x, y, z],
            q: [1.0, 0.0, 0.0, 0.0],
            s: [scale; 3],
            sh: vec![0.5 / C0; 3],
            sigma,
        }
    }

    #[test]
    fn empty_list_is_background() {
        let t = RenderTarget::new(camera(8, 6)).background([0.2, 0.4, 0.6]);
        let (img, stats) = render::<f64>(&[], 0, &t).unwrap();
        assert_eq!(stats.drawn, 0);
        for row in 0..6 {
            for col in 0..8 {
                assert_eq!(img.pixel(row, col), [0.2, 0.4, 0.6]);
            }
        }
    }

    #[test]
    fn centered_gaussian_center_pixel() {
        // Pixel (4,4) center is (4.5,4.5): the mean projects exactly there.
        let cam = camera(9, 9);
        let z = 2.0;
        let x = (4.5 - cam.cx) * z / cam.fx;
        let g = white_at(x, x, z, 0.01, 0.99);
        let (img, _) = render(&[g], 0, &RenderTarget::new(cam)).unwrap();
        // Oracle: one splat at the pixel center, weight = sigma exactly.
        let expected = 0.99f32;
        for c in img.pixel(4, 4) {
            assert!((c - expected).abs() < 1e-6, "{c}");
            assert!(c >= 0.95);
        }
    }

    #[test]
    fn dilation_alone_gives_half_pixel_blob() {
        // A vanishing Gaussian has Σ' = 0.3·I; one pixel off-center the
        // weight is sigma·exp(-0.5/0.3).
        let cam = camera(9, 9);
        let z = 2.0;
        let x = (4.5 - cam.cx) * z / cam.fx;
        let g = white_at(x, x, z, 1e-9, 0.5);
        let (img, _) = render(&[g], 0, &RenderTarget::new(cam)).unwrap();
        let expected = 0.5 * (-0.5f64 / 0.3).exp();
        assert!((img.pixel(4, 5)[0] as f64 - expected).abs() < 1e-6);
    }

    #[test]
    fn behind_and_near_are_culled() {
        let t = RenderTarget::new(camera(8, 8));
        let gs = vec![white_at(0.0, 0.0, -1.0, 0.1, 0.9), white_at(0.0, 0.0, 0.005, 0.1, 0.9)];
        let (img, stats) = render(&gs, 0, &t).unwrap();
        assert_eq!(stats.culled, 2);
        assert!(img.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn degenerate_covariance_is_counted() {
        let t = RenderTarget::new(camera(8, 8));
        let mut g = white_at(0.0, 0.0, 1.0, 0.1, 0.9);
        g.s = [f64::INFINITY, 1.0, 1.0];
        let (_, stats) = render(&[g], 0, &t).unwrap();
        assert_eq!(stats.skipped_degenerate, 1);
    }

    #[test]
    fn front_occludes_back() {
        let t = RenderTarget::new(camera(16, 16));
        let mut front = white_at(0.0, 0.0, 1.0, 0.2, 0.99);
        front.sh = vec![-0.5 / C0; 3];
        let back = white_at(0.0, 0.0, 3.0, 0.5, 0.99);
        let (a, _) = render(&[front.clone(), back.clone()], 0, &t).unwrap();
        let (b, _) = render(&[back, front], 0, &t).unwrap();
        assert_eq!(a, b);
        assert!(a.pixel(8, 8)[0] < 0.02);
    }

    #[test]
    fn wrong_sh_length_is_rejected() {
        let t = RenderTarget::new(camera(4, 4));
        let g = white_at(0.0, 0.0, 1.0, 0.1, 0.9);
        assert!(matches!(render(&[g], 1, &t), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_render_size_is_rejected() {
        assert!(RenderTarget::with_size(&camera(4, 4), 0, 4).is_err());
    }
}
