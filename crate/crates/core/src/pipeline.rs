//! Whole-scene encode, decode and evaluation.

use rayon::prelude::*;

use crate::codec::{self, BackendId, EncodedPlane, HevcConfig, QpConfig};
use crate::container::{self, flags, CompressedScene, ContainerHeader, GEOMETRY_PLANES};
use crate::error::{Error, Result};
use crate::geometry;
use crate::model::{CameraView, GaussianRecord, SceneModel, ViewMap};
use crate::plane::Plane;
use crate::quantizer::{self, AlphaTable, ChannelClass, ChannelQuantMeta};
use crate::render::{self, Image, RenderTarget};
use crate::scalar::Real;
use crate::vabr::{self, Centering, CoeffMatrix, VabrBasis};
use crate::vpt::{self, VptPlanes};

#[derive(Debug, Clone)]
pub struct EncodeConfig {
    pub qp: QpConfig,
    /// Retained color components; clamped to the SH dimension.
    pub k: usize,
    pub alphas: AlphaTable,
    pub backend: BackendId,
    pub hevc: Option<HevcConfig>,
    /// Use the internal lossy backend when the external one is missing.
    pub hevc_fallback: bool,
    pub vpt: bool,
    pub vabr: bool,
    pub centering: Centering,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        EncodeConfig {
            qp: QpConfig::default(),
            k: vabr::DEFAULT_K,
            alphas: AlphaTable::default(),
            backend: BackendId::InternalLossy,
            hevc: None,
            hevc_fallback: false,
            vpt: true,
            vabr: true,
            centering: Centering::Uncentered,
        }
    }
}

impl EncodeConfig {
    pub fn with_qg(mut self, qg: i32) -> Self {
        self.qp.qg = qg;
        self
    }

    pub fn with_backend(mut self, backend: BackendId) -> Self {
        self.backend = backend;
        self
    }
}

/// Quantization class of plane slot `slot` in a view of `11 + k` slots.
///
/// Without the VPT the first three slots hold world coordinates and all
/// use the depth settings.
pub fn slot_class(slot: usize, k: usize, vpt: bool) -> ChannelClass {
    match slot {
        0 => ChannelClass::Depth,
        1 | 2 if vpt => ChannelClass::OffsetXy,
        1 | 2 => ChannelClass::Depth,
        3..=5 => ChannelClass::Scale,
        6..=9 => ChannelClass::Rotation,
        s if s < 10 + k => ChannelClass::Color,
        _ => ChannelClass::Opacity,
    }
}

fn geometry_planes<T: Real>(view: usize, map: &ViewMap<T>, camera: &CameraView<T>, use_vpt: bool) -> Result<Vec<Plane<T>>> {
    let (w, h) = (camera.width as usize, camera.height as usize);
    if use_vpt {
        let p = vpt::vpt_forward(camera, &map.records).map_err(|e| match e {
            Error::BehindCamera { row, col, depth, .. } => Error::BehindCamera { view, row, col, depth },
            other => other,
        })?;
        let [q0, q1, q2, q3] = p.qhat;
        let [s0, s1, s2] = p.shat;
        return Ok(vec![p.depth, p.dx, p.dy, s0, s1, s2, q0, q1, q2, q3]);
    }
    let mut planes = vec![Plane::filled(w, h, T::zero()); GEOMETRY_PLANES - 1];
    for (idx, r) in map.records.iter().enumerate() {
        let q = geometry::quat_canonical(&geometry::quat_normalize(&r.q));
        let vals = [r.mu[0], r.mu[1], r.mu[2], r.s[0], r.s[1], r.s[2], q[0], q[1], q[2], q[3]];
        for (p, v) in planes.iter_mut().zip(vals) {
            p.data[idx] = v;
        }
    }
    Ok(planes)
}

fn all_coefficients<T: Real>(scene: &SceneModel<T>) -> CoeffMatrix<f64> {
    let d = scene.sh_dim();
    let mut data = Vec::with_capacity(d * scene.record_count());
    for r in scene.records() {
        data.extend(r.sh.iter().map(|v| v.as_f64()));
    }
    CoeffMatrix { dim: d, data }
}

fn encode_one(
    plane: &Plane<u16>,
    backend: BackendId,
    qp: i32,
    hevc: Option<&HevcConfig>,
) -> Result<EncodedPlane> {
    match backend {
        BackendId::InternalLossless => codec::encode_plane_lossless(plane),
        BackendId::InternalLossy => codec::encode_plane_lossy(plane, qp),
        BackendId::Hevc => {
            let cfg = hevc.ok_or_else(|| Error::BackendUnavailable("no HEVC encoder configured".into()))?;
            codec::encode_plane_hevc(plane, qp, cfg)
        }
    }
}

/// Transforms, quantizes and codes a scene.
pub fn encode_scene<T: Real>(scene: &SceneModel<T>, cfg: &EncodeConfig) -> Result<CompressedScene> {
    scene.validate()?;
    let first = scene
        .views
        .first()
        .ok_or_else(|| Error::Config("cannot encode a scene without views".into()))?;
    let (width, height) = (first.camera.width, first.camera.height);
    if let Some(v) = scene.views.iter().position(|v| v.camera.width != width || v.camera.height != height) {
        return Err(Error::Shape(format!(
            "view {v} is {}x{}, view 0 is {width}x{height}",
            scene.views[v].camera.width, scene.views[v].camera.height
        )));
    }
    let d = scene.sh_dim();
    let cameras32: Vec<CameraView<f32>> = scene.views.iter().map(|v| v.camera.cast()).collect();

    let backend = match cfg.backend {
        BackendId::Hevc => match cfg.hevc.as_ref().map(HevcConfig::check_available) {
            Some(Ok(())) => BackendId::Hevc,
            Some(Err(e)) if cfg.hevc_fallback && e.is_backend() => BackendId::InternalLossy,
            Some(Err(e)) => return Err(e),
            None if cfg.hevc_fallback => BackendId::InternalLossy,
            None => return Err(Error::BackendUnavailable("no HEVC encoder configured".into())),
        },
        b => b,
    };

    // Geometry, using the cameras exactly as they will be stored.
    let geo: Vec<Vec<Plane<f64>>> = scene
        .views
        .par_iter()
        .enumerate()
        .map(|(v, map)| {
            let map64: ViewMap<f64> = ViewMap {
                camera: cameras32[v].cast(),
                records: map.records.iter().map(GaussianRecord::cast).collect(),
            };
            geometry_planes(v, &map64, &map64.camera, cfg.vpt)
        })
        .collect::<Result<_>>()?;

    // Color.
    let x = all_coefficients(scene);
    let basis: VabrBasis<f64> = if cfg.vabr {
        let cams64: Vec<CameraView<f64>> = cameras32.iter().map(CameraView::cast).collect();
        let dirs = vabr::sample_directions(&cams64);
        let lambda = vabr::visibility_weights(&dirs, scene.sh_degree)?;
        let k = cfg.k.clamp(1, d);
        let fit = vabr::fit_basis_with_spectrum(&x, &lambda, k, cfg.centering, scene.sh_degree)?;
        fit.basis.cast::<f32>().cast()
    } else {
        VabrBasis::identity(scene.sh_degree)
    };
    let k = basis.k;
    let z = vabr::vabr_forward(&x, &basis)?;

    let per_view = GEOMETRY_PLANES + k;
    let pixels = (width * height) as usize;
    let mut planes: Vec<Plane<f64>> = Vec::with_capacity(scene.views.len() * per_view);
    for (v, (g, map)) in geo.into_iter().zip(&scene.views).enumerate() {
        planes.extend(g);
        for j in 0..k {
            let data = (0..pixels).map(|p| z.column(v * pixels + p)[j]).collect();
            planes.push(Plane::from_vec(width as usize, height as usize, data));
        }
        let data = map.records.iter().map(|r| r.sigma.as_f64()).collect();
        planes.push(Plane::from_vec(width as usize, height as usize, data));
    }

    // Joint standard deviation per slot; color slots share the largest.
    let views = scene.views.len();
    let mut sigma: Vec<f64> = (0..per_view)
        .map(|s| quantizer::population_std((0..views).flat_map(|v| planes[v * per_view + s].data.iter())))
        .collect();
    let color_sigma = (10..10 + k).map(|s| sigma[s]).fold(0.0, f64::max);
    for s in sigma.iter_mut().skip(10).take(k) {
        *s = color_sigma;
    }

    let quantized: Vec<(Plane<u16>, ChannelQuantMeta, ChannelClass)> = planes
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let slot = i % per_view;
            let class = slot_class(slot, k, cfg.vpt);
            let (idx, meta) = quantizer::quantize_plane(p, cfg.alphas.get(class), Some(sigma[slot]))?;
            Ok((idx, meta, class))
        })
        .collect::<Result<_>>()?;
    let encoded: Vec<EncodedPlane> = quantized
        .par_iter()
        .map(|(idx, _, class)| encode_one(idx, backend, cfg.qp.effective(*class), cfg.hevc.as_ref()))
        .collect::<Result<_>>()?;

    let mut flag_bits = flags::HALF_PIXEL_CENTERS | flags::JOINT_SIGMA;
    if !basis.uncentered {
        flag_bits |= flags::CENTERED_BASIS;
    }
    if !cfg.vpt {
        flag_bits |= flags::NO_VPT;
    }
    if !cfg.vabr {
        flag_bits |= flags::NO_VABR;
    }
    let cs = CompressedScene {
        header: ContainerHeader {
            version: container::VERSION,
            views: views as u32,
            width,
            height,
            sh_degree: scene.sh_degree,
            k: k as u32,
            flags: flag_bits,
        },
        cameras: cameras32,
        basis: basis.cast(),
        quant: quantized.into_iter().map(|(_, m, _)| m).collect(),
        planes: encoded,
    };
    cs.validate()?;
    Ok(cs)
}

/// Reconstructs a scene; `hevc` is needed only for externally coded planes.
pub fn decode_scene<T: Real>(cs: &CompressedScene, hevc: Option<&HevcConfig>) -> Result<SceneModel<T>> {
    cs.validate()?;
    let h = &cs.header;
    let (w, ht) = (h.width as usize, h.height as usize);
    let pixels = w * ht;
    let k = h.k as usize;
    let per_view = h.planes_per_view();
    let use_vpt = !h.has(flags::NO_VPT);

    let planes: Vec<Plane<T>> = cs
        .planes
        .par_iter()
        .zip(&cs.quant)
        .map(|(ep, meta)| Ok(quantizer::dequantize_plane(&codec::decode_plane(ep, hevc)?, meta)))
        .collect::<Result<_>>()?;

    let mut z = CoeffMatrix::zeros(k, h.views as usize * pixels);
    for v in 0..h.views as usize {
        for j in 0..k {
            let p = &planes[v * per_view + 10 + j];
            for (i, val) in p.data.iter().enumerate() {
                z.column_mut(v * pixels + i)[j] = *val;
            }
        }
    }
    let basis: VabrBasis<T> = cs.basis.cast();
    let x = vabr::vabr_inverse(&z, &basis)?;

    let min_scale = T::min_positive_value();
    let views = cs
        .cameras
        .par_iter()
        .enumerate()
        .map(|(v, cam32)| {
            let camera: CameraView<T> = cam32.cast();
            let base = v * per_view;
            let slot = |s: usize| &planes[base + s];
            let geo: Vec<(geometry::Vec3<T>, geometry::Quat<T>, geometry::Vec3<T>)> = if use_vpt {
                let vp = VptPlanes {
                    depth: slot(0).clone(),
                    dx: slot(1).clone(),
                    dy: slot(2).clone(),
                    shat: [slot(3).clone(), slot(4).clone(), slot(5).clone()],
                    qhat: [slot(6).clone(), slot(7).clone(), slot(8).clone(), slot(9).clone()],
                };
                vpt::vpt_inverse(&camera, &vp)?
                    .into_iter()
                    .map(|g| (g.mu, g.q, g.s))
                    .collect()
            } else {
                (0..pixels)
                    .map(|i| {
                        let at = |s: usize| slot(s).data[i];
                        let q = [at(6), at(7), at(8), at(9)];
                        (
                            [at(0), at(1), at(2)],
                            geometry::quat_canonical(&geometry::quat_normalize(&q)),
                            [at(3), at(4), at(5)],
                        )
                    })
                    .collect()
            };
            let opacity = slot(GEOMETRY_PLANES + k - 1);
            let records = geo
                .into_iter()
                .enumerate()
                .map(|(i, (mu, q, s))| GaussianRecord {
                    mu,
                    q,
                    s: s.map(|v| v.max(min_scale)),
                    sh: x.column(v * pixels + i).to_vec(),
                    sigma: opacity.data[i].max(T::zero()).min(T::one()),
                })
                .collect();
            Ok(ViewMap { camera, records })
        })
        .collect::<Result<Vec<_>>>()?;
    let scene = SceneModel {
        sh_degree: h.sh_degree,
        views,
    };
    scene.validate()?;
    Ok(scene)
}

#[derive(Debug, Clone)]
pub struct ViewEval {
    pub view: usize,
    pub psnr: f64,
    pub ssim: f64,
    pub original: Image,
    pub decoded: Image,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub views: Vec<ViewEval>,
    pub raw_bytes: u64,
    pub container_bytes: Option<u64>,
}

impl EvalReport {
    pub fn mean_psnr(&self) -> f64 {
        mean(self.views.iter().map(|v| v.psnr))
    }

    pub fn min_psnr(&self) -> f64 {
        self.views.iter().map(|v| v.psnr).fold(f64::INFINITY, f64::min)
    }

    pub fn mean_ssim(&self) -> f64 {
        mean(self.views.iter().map(|v| v.ssim))
    }

    /// Raw float32 scene bytes over container bytes.
    pub fn compression_ratio(&self) -> Option<f64> {
        self.container_bytes.map(|c| self.raw_bytes as f64 / c as f64)
    }

    pub fn to_table(&self) -> String {
        use std::fmt::Write as _;
        let mut out = format!("{:<6} {:>10} {:>8}\n", "view", "psnr_db", "ssim");
        for v in &self.views {
            let _ = writeln!(out, "{:<6} {:>10.3} {:>8.5}", v.view, v.psnr, v.ssim);
        }
        let _ = writeln!(out, "{:<6} {:>10.3} {:>8.5}", "mean", self.mean_psnr(), self.mean_ssim());
        let _ = writeln!(out, "raw_bytes        {}", self.raw_bytes);
        if let (Some(c), Some(r)) = (self.container_bytes, self.compression_ratio()) {
            let _ = writeln!(out, "container_bytes  {c}");
            let _ = writeln!(out, "ratio            {r:.2}x");
        }
        out
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Renders both scenes from every camera and compares them.
pub fn evaluate<T: Real>(
    original: &SceneModel<T>,
    decoded: &SceneModel<T>,
    cameras: &[CameraView<T>],
    render_size: Option<(u32, u32)>,
    container_bytes: Option<u64>,
) -> Result<EvalReport> {
    if original.sh_degree != decoded.sh_degree {
        return Err(Error::Shape(format!(
            "SH degree {} vs {}",
            original.sh_degree, decoded.sh_degree
        )));
    }
    let a: Vec<GaussianRecord<T>> = original.records().cloned().collect();
    let b: Vec<GaussianRecord<T>> = decoded.records().cloned().collect();
    let mut views = Vec::with_capacity(cameras.len());
    for (i, cam) in cameras.iter().enumerate() {
        let target = match render_size {
            Some((w, h)) => RenderTarget::with_size(cam, w, h)?,
            None => RenderTarget::new(cam.clone()),
        };
        let (ia, _) = render::render(&a, original.sh_degree, &target)?;
        let (ib, _) = render::render(&b, decoded.sh_degree, &target)?;
        views.push(ViewEval {
            view: i,
            psnr: render::psnr(&ia, &ib)?,
            ssim: render::ssim(&ia, &ib)?,
            original: ia,
            decoded: ib,
        });
    }
    Ok(EvalReport {
        views,
        raw_bytes: original.raw_f32_bytes(),
        container_bytes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub qg: i32,
    pub bytes: u64,
    pub psnr: f64,
    pub ssim: f64,
}

/// Encodes, decodes and evaluates once per global QP.
pub fn sweep<T: Real>(
    scene: &SceneModel<T>,
    base: &EncodeConfig,
    qgs: &[i32],
    render_size: Option<(u32, u32)>,
) -> Result<Vec<SweepRow>> {
    let cameras = scene.cameras();
    qgs.iter()
        .map(|&qg| {
            let cfg = base.clone().with_qg(qg);
            let cs = encode_scene(scene, &cfg)?;
            let bytes = cs.byte_size();
            let decoded: SceneModel<T> = decode_scene(&cs, cfg.hevc.as_ref())?;
            let report = evaluate(scene, &decoded, &cameras, render_size, Some(bytes))?;
            Ok(SweepRow {
                qg,
                bytes,
                psnr: report.mean_psnr(),
                ssim: report.mean_ssim(),
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("qg,bytes,psnr,ssim\n");
    for r in rows {
        out.push_str(&format!("{},{},{:.4},{:.6}\n", r.qg, r.bytes, r.psnr, r.ssim));
    }
    out
}
