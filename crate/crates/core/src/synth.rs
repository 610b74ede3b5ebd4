//! Deterministic synthetic pixel-aligned scenes.
//!
//! Cameras sit on a ring looking at a common point. For every pixel a ray
//! through the (optionally jittered) pixel center is intersected with an
//! analytic surface and a Gaussian is placed exactly at the hit point,
//! flattened along the surface normal, with scale `c·z/f`.
//!
//! Color comes from two smooth scalar fields `u`, `w` over world space:
//! the SH vector is `u·A + w·B` for fixed vectors `A`, `B`, so the
//! coefficient matrix has rank two and view dependence scales with `u`.

use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{self, Mat3, Vec3};
use crate::model::{sh_basis_count, CameraView, GaussianRecord, SceneModel, ViewMap};
use crate::scalar::Real;
use crate::sh::{C0, MAX_DEGREE};

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based generator: every draw is a pure function of
/// `(seed, stream, counter)`.
#[derive(Debug, Clone, Copy)]
pub struct CounterRng {
    seed: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng { seed }
    }

    pub fn u64(&self, stream: u64, counter: u64) -> u64 {
        mix(mix(self.seed ^ mix(stream)).wrapping_add(counter))
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&self, stream: u64, counter: u64) -> f64 {
        (self.u64(stream, counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn range(&self, stream: u64, counter: u64, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit(stream, counter)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    /// Textured ground plane `y = 0`.
    Plane,
    /// Sphere resting on the ground plane.
    Sphere,
    /// Cameras inside a box room with a block in the middle.
    Room,
}

impl Geometry {
    pub fn name(self) -> &'static str {
        match self {
            Geometry::Plane => "plane",
            Geometry::Sphere => "sphere",
            Geometry::Room => "room",
        }
    }
}

impl FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "plane" => Ok(Geometry::Plane),
            "sphere" => Ok(Geometry::Sphere),
            "room" | "box" => Ok(Geometry::Room),
            other => Err(Error::Config(format!(
                "unknown geometry '{other}' (expected plane, sphere or room)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraRing {
    pub count: usize,
    /// Distance from the look-at point.
    pub radius: f64,
    pub look_at: Vec3<f64>,
    /// Angle above the horizontal, degrees.
    pub elevation_deg: f64,
    /// Horizontal field of view, degrees.
    pub fov_deg: f64,
    /// Azimuth span covered by the views, degrees; 360 is a full ring.
    pub arc_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub ring: CameraRing,
    pub width: u32,
    pub height: u32,
    pub sh_degree: u32,
    pub geometry: Geometry,
    /// Pixel-center jitter as a fraction of a pixel.
    pub offset_jitter: f64,
    /// Relative scale jitter.
    pub scale_jitter: f64,
    /// Magnitude of the higher-order SH terms relative to the DC term.
    pub view_dependence: f64,
}

impl SynthSpec {
    /// Geometry-specific camera ring with no jitter.
    pub fn new(geometry: Geometry, views: usize, width: u32, height: u32, sh_degree: u32, seed: u64) -> Self {
        let ring = match geometry {
            Geometry::Plane => CameraRing {
                count: views,
                radius: 3.0,
                look_at: [0.0, 0.0, 0.0],
                elevation_deg: 50.0,
                fov_deg: 50.0,
                arc_deg: DEFAULT_ARC,
            },
            Geometry::Sphere => CameraRing {
                count: views,
                radius: 3.0,
                look_at: [0.0, 0.5, 0.0],
                elevation_deg: 35.0,
                fov_deg: 50.0,
                arc_deg: DEFAULT_ARC,
            },
            Geometry::Room => CameraRing {
                count: views,
                radius: 1.0,
                look_at: [0.0, 0.9, 0.0],
                elevation_deg: 10.0,
                fov_deg: 70.0,
                arc_deg: DEFAULT_ARC,
            },
        };
        SynthSpec {
            seed,
            ring,
            width,
            height,
            sh_degree,
            geometry,
            offset_jitter: 0.0,
            scale_jitter: 0.0,
            view_dependence: 0.15,
        }
    }

    /// Sets both offset and scale jitter.
    pub fn noise(mut self, amount: f64) -> Self {
        self.offset_jitter = amount;
        self.scale_jitter = amount;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 4 || self.height < 4 {
            return Err(Error::Config(format!(
                "resolution {}x{} is below the 4x4 minimum",
                self.width, self.height
            )));
        }
        if self.ring.count == 0 {
            return Err(Error::Config("at least one view is required".into()));
        }
        if self.sh_degree > MAX_DEGREE {
            return Err(Error::Config(format!("SH degree {} exceeds {MAX_DEGREE}", self.sh_degree)));
        }
        if !(self.ring.arc_deg >= 0.0 && self.ring.arc_deg <= 360.0) {
            return Err(Error::Config(format!("arc {} outside [0, 360]", self.ring.arc_deg)));
        }
        if !(self.ring.radius > 0.0) || !(self.ring.fov_deg > 0.0 && self.ring.fov_deg < 180.0) {
            return Err(Error::Config("camera ring needs a positive radius and a field of view in (0, 180)".into()));
        }
        for (name, v) in [
            ("offset jitter", self.offset_jitter),
            ("scale jitter", self.scale_jitter),
            ("view dependence", self.view_dependence),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} {v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Camera `view` of the ring, OpenCV convention (x right, y down, z
/// forward), world up `+y`.
pub fn ring_camera(ring: &CameraRing, view: usize, width: u32, height: u32) -> CameraView<f64> {
    let az = ring.arc_deg.to_radians() * ((view as f64 + 0.5) / ring.count as f64 - 0.5);
    let el = ring.elevation_deg.to_radians();
    let c = [
        ring.look_at[0] + ring.radius * el.cos() * az.sin(),
        ring.look_at[1] + ring.radius * el.sin(),
        ring.look_at[2] + ring.radius * el.cos() * az.cos(),
    ];
    let forward = geometry::normalize(&geometry::sub(&ring.look_at, &c));
    let right = geometry::normalize(&geometry::cross(&forward, &[0.0, 1.0, 0.0]));
    let down = geometry::cross(&forward, &right);
    let rotation: Mat3<f64> = [right, down, forward];
    let rc = geometry::mat_vec(&rotation, &c);
    let f = width as f64 / (2.0 * (ring.fov_deg.to_radians() / 2.0).tan());
    CameraView {
        fx: f,
        fy: f,
        cx: width as f64 / 2.0,
        cy: height as f64 / 2.0,
        rotation,
        translation: [-rc[0], -rc[1], -rc[2]],
        width,
        height,
    }
}

/// Views of a close-baseline capture.
pub const DEFAULT_ARC: f64 = 40.0;

const BACKDROP_RADIUS: f64 = 40.0;
const SPHERE_RADIUS: f64 = 0.5;
const ROOM_HALF: f64 = 2.5;
const ROOM_HEIGHT: f64 = 2.5;
const BLOCK_HALF: f64 = 0.45;
const BLOCK_HEIGHT: f64 = 0.7;
/// Tangential extent of a Gaussian in pixels at unit jitter.
const FOOTPRINT: f64 = 0.8;
const FLATTEN: f64 = 0.1;

struct Hit {
    t: f64,
    normal: Vec3<f64>,
}

fn closer(best: Option<Hit>, candidate: Option<Hit>) -> Option<Hit> {
    match (best, candidate) {
        (Some(b), Some(c)) => Some(if c.t < b.t { c } else { b }),
        (b, c) => b.or(c),
    }
}

fn hit_ground(o: &Vec3<f64>, d: &Vec3<f64>) -> Option<Hit> {
    (d[1] < -1e-12 && o[1] > 0.0).then(|| Hit {
        t: -o[1] / d[1],
        normal: [0.0, 1.0, 0.0],
    })
}

fn hit_sphere(o: &Vec3<f64>, d: &Vec3<f64>, center: &Vec3<f64>, r: f64, inside: bool) -> Option<Hit> {
    let oc = geometry::sub(o, center);
    let a = geometry::dot(d, d);
    let b = geometry::dot(&oc, d);
    let c = geometry::dot(&oc, &oc) - r * r;
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t = if inside { (-b + sq) / a } else { (-b - sq) / a };
    if t <= 0.0 {
        return None;
    }
    let p = [o[0] + t * d[0], o[1] + t * d[1], o[2] + t * d[2]];
    let mut n = geometry::normalize(&geometry::sub(&p, center));
    if inside {
        n = [-n[0], -n[1], -n[2]];
    }
    Some(Hit { t, normal: n })
}

/// Ray against an axis-aligned box; `inside` returns the exit point.
fn hit_box(o: &Vec3<f64>, d: &Vec3<f64>, lo: &Vec3<f64>, hi: &Vec3<f64>, inside: bool) -> Option<Hit> {
    let (mut t_near, mut t_far) = (f64::NEG_INFINITY, f64::INFINITY);
    let (mut near_axis, mut far_axis) = (0usize, 0usize);
    for a in 0..3 {
        if d[a].abs() < 1e-15 {
            if o[a] < lo[a] || o[a] > hi[a] {
                return None;
            }
            continue;
        }
        let (t0, t1) = ((lo[a] - o[a]) / d[a], (hi[a] - o[a]) / d[a]);
        let (t0, t1) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
        if t0 > t_near {
            t_near = t0;
            near_axis = a;
        }
        if t1 < t_far {
            t_far = t1;
            far_axis = a;
        }
    }
    if t_near > t_far {
        return None;
    }
    let (t, axis) = if inside { (t_far, far_axis) } else { (t_near, near_axis) };
    if t <= 0.0 || !t.is_finite() {
        return None;
    }
    let mut normal = [0.0; 3];
    normal[axis] = -d[axis].signum();
    Some(Hit { t, normal })
}

fn trace(geometry: Geometry, look_at: &Vec3<f64>, o: &Vec3<f64>, d: &Vec3<f64>) -> Hit {
    let backdrop = || hit_sphere(o, d, look_at, BACKDROP_RADIUS, true);
    let hit = match geometry {
        Geometry::Plane => closer(hit_ground(o, d), backdrop()),
        Geometry::Sphere => {
            let s = hit_sphere(o, d, &[0.0, SPHERE_RADIUS, 0.0], SPHERE_RADIUS, false);
            closer(closer(hit_ground(o, d), s), backdrop())
        }
        Geometry::Room => {
            let room = hit_box(
                o,
                d,
                &[-ROOM_HALF, 0.0, -ROOM_HALF],
                &[ROOM_HALF, ROOM_HEIGHT, ROOM_HALF],
                true,
            );
            let block = hit_box(
                o,
                d,
                &[-BLOCK_HALF, 0.0, -BLOCK_HALF],
                &[BLOCK_HALF, BLOCK_HEIGHT, BLOCK_HALF],
                false,
            );
            closer(closer(room, block), backdrop())
        }
    };
    hit.expect("rays from inside the backdrop sphere always hit it")
}

/// Frame whose third column is the normal.
fn surface_frame(n: &Vec3<f64>) -> Mat3<f64> {
    let helper = if n[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let t1 = geometry::normalize(&geometry::cross(&helper, n));
    let t2 = geometry::cross(n, &t1);
    [[t1[0], t2[0], n[0]], [t1[1], t2[1], n[1]], [t1[2], t2[2], n[2]]]
}

struct Texture {
    u_dir: Vec3<f64>,
    u_freq: f64,
    u_phase: f64,
    w_dir: Vec3<f64>,
    w_freq: f64,
    w_phase: f64,
    /// Per-coefficient loadings, length `3·basis_count`.
    a: Vec<f64>,
    b: Vec<f64>,
}

const STREAM_TEXTURE: u64 = 1;
const STREAM_JITTER: u64 = 2;

impl Texture {
    fn new(rng: &CounterRng, sh_degree: u32, view_dependence: f64) -> Self {
        let dir = |base: u64| {
            let theta = rng.range(STREAM_TEXTURE, base, 0.0, std::f64::consts::TAU);
            let y = rng.range(STREAM_TEXTURE, base + 1, -0.3, 0.3);
            geometry::normalize(&[theta.cos(), y, theta.sin()])
        };
        let n = sh_basis_count(sh_degree);
        let mut a = vec![0.0; 3 * n];
        let mut b = vec![0.0; 3 * n];
        for c in 0..3 {
            a[c] = rng.range(STREAM_TEXTURE, 10 + c as u64, 0.15, 0.3) / C0;
            b[c] = rng.range(STREAM_TEXTURE, 20 + c as u64, -0.12, 0.12) / C0;
        }
        for i in 3..3 * n {
            a[i] = view_dependence * rng.range(STREAM_TEXTURE, 100 + i as u64, -1.0, 1.0);
        }
        Texture {
            u_dir: dir(0),
            u_freq: rng.range(STREAM_TEXTURE, 2, 0.5, 0.8),
            u_phase: rng.range(STREAM_TEXTURE, 3, 0.0, std::f64::consts::TAU),
            w_dir: dir(4),
            w_freq: rng.range(STREAM_TEXTURE, 6, 0.6, 1.0),
            w_phase: rng.range(STREAM_TEXTURE, 7, 0.0, std::f64::consts::TAU),
            a,
            b,
        }
    }

    fn fields(&self, p: &Vec3<f64>) -> (f64, f64) {
        let u = (self.u_freq * geometry::dot(&self.u_dir, p) + self.u_phase).sin();
        let w = (self.w_freq * geometry::dot(&self.w_dir, p) + self.w_phase).sin();
        (u, w)
    }
}

fn generate_view(spec: &SynthSpec, tex: &Texture, rng: &CounterRng, view: usize) -> ViewMap<f64> {
    let cam = ring_camera(&spec.ring, view, spec.width, spec.height);
    let origin = cam.center();
    let f = cam.focal();
    let (w, h) = (spec.width as usize, spec.height as usize);
    let mut records = Vec::with_capacity(w * h);
    for row in 0..h {
        for col in 0..w {
            let pixel = (view * h + row) * w + col;
            let counter = 4 * pixel as u64;
            let jx = spec.offset_jitter * (rng.unit(STREAM_JITTER, counter) - 0.5);
            let jy = spec.offset_jitter * (rng.unit(STREAM_JITTER, counter + 1) - 0.5);
            let js = 1.0 + spec.scale_jitter * (rng.unit(STREAM_JITTER, counter + 2) - 0.5);
            let ray_cam = [
                (col as f64 + 0.5 + jx - cam.cx) / cam.fx,
                (row as f64 + 0.5 + jy - cam.cy) / cam.fy,
                1.0,
            ];
            // Unit camera-z, so the hit parameter is the depth.
            let dir = geometry::mat_t_vec(&cam.rotation, &ray_cam);
            let hit = trace(spec.geometry, &spec.ring.look_at, &origin, &dir);
            let z = hit.t;
            let mu = [
                origin[0] + z * dir[0],
                origin[1] + z * dir[1],
                origin[2] + z * dir[2],
            ];
            let tangential = FOOTPRINT * js * z / f;
            let q = geometry::mat_to_quat(&surface_frame(&hit.normal));
            let (u, wv) = tex.fields(&mu);
            let sh = tex.a.iter().zip(&tex.b).map(|(a, b)| u * a + wv * b).collect();
            records.push(GaussianRecord {
                mu,
                q,
                s: [tangential, tangential, FLATTEN * tangential],
                sh,
                sigma: 0.75 + 0.2 * u,
            });
        }
    }
    ViewMap { camera: cam, records }
}

/// Builds the scene described by `spec`; output depends only on `spec`.
pub fn generate<T: Real>(spec: &SynthSpec) -> Result<SceneModel<T>> {
    spec.validate()?;
    let rng = CounterRng::new(spec.seed);
    let tex = Texture::new(&rng, spec.sh_degree, spec.view_dependence);
    let views: Vec<ViewMap<f64>> = (0..spec.ring.count)
        .into_par_iter()
        .map(|v| generate_view(spec, &tex, &rng, v))
        .collect();
    let scene = SceneModel {
        sh_degree: spec.sh_degree,
        views,
    };
    let mut out: SceneModel<T> = scene.cast();
    out.canonicalize_quaternions();
    out.validate()?;
    Ok(out)
}
