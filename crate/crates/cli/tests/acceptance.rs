//! Acceptance suite. One PASS/FAIL line per criterion; exits non-zero if
//! any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use gsplat_codec::codec::{self, default_qc, QpConfig};
use gsplat_codec::container::Component;
use gsplat_codec::geometry::{self, Mat3, Vec3};
use gsplat_codec::quantizer::{default_alpha, dequantize_plane, quantize_plane, ChannelClass, MAX_INDEX};
use gsplat_codec::render::{psnr, render, RenderTarget};
use gsplat_codec::synth::{generate, Geometry, SynthSpec};
use gsplat_codec::vabr::{self, CoeffMatrix};
use gsplat_codec::vpt::{vpt_forward, vpt_inverse};
use gsplat_codec::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = std::result::Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome, Duration);

fn check(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn gspc(args: &[&str]) -> std::result::Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_gspc"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("gspc {args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn allocation(csv: &str) -> Vec<(String, u64)> {
    csv.lines()
        .skip(1)
        .map(|l| {
            let mut cols = l.split(',');
            let name = cols.next().unwrap().to_string();
            (name, cols.next().unwrap().parse().unwrap())
        })
        .collect()
}

fn criterion_1() -> Outcome {
    use ChannelClass::*;
    let expect = [
        (Depth, 2048.0, -4),
        (OffsetXy, 256.0, 12),
        (Scale, 256.0, 0),
        (Rotation, 256.0, 9),
        (Color, 1024.0, 3),
        (Opacity, 256.0, 0),
    ];
    let qp = QpConfig::default();
    for (c, alpha, qc) in expect {
        if default_alpha(c) != alpha || default_qc(c) != qc || qp.qc(c) != qc || QpConfig::new(7).effective(c) != qc + 7 {
            return Err(format!("{}: alpha {} qc {}", c.name(), default_alpha(c), qp.qc(c)));
        }
    }
    Ok("six channel classes match".into())
}

fn look_at(center: Vec3<f64>, target: Vec3<f64>, f: f64, w: u32, h: u32) -> CameraView<f64> {
    let fwd = geometry::normalize(&geometry::sub(&target, &center));
    let right = geometry::normalize(&geometry::cross(&fwd, &[0.0, 1.0, 0.0]));
    let down = geometry::cross(&fwd, &right);
    let rotation: Mat3<f64> = [right, down, fwd];
    let rc = geometry::mat_vec(&rotation, &center);
    CameraView {
        fx: f,
        fy: f,
        cx: w as f64 / 2.0,
        cy: h as f64 / 2.0,
        rotation,
        translation: [-rc[0], -rc[1], -rc[2]],
        width: w,
        height: h,
    }
}

fn unit_quat(rng: &mut ChaCha8Rng) -> [f64; 4] {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n = geometry::quat_norm(&q);
        if n > 0.1 && n < 1.0 {
            return geometry::quat_normalize(&q);
        }
    }
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (w, h) = (25u32, 20u32);
    let mut cams = Vec::new();
    let mut originals = Vec::new();
    let mut rebuilt = Vec::new();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let dir = geometry::normalize(&[rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.8), rng.gen_range(-1.0..1.0)]);
        let dist = rng.gen_range(4.0..6.0);
        let target = [rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)];
        let cam = look_at(dir.map(|v| v * dist), target, rng.gen_range(20.0..40.0), w, h);
        let mut records = Vec::with_capacity((w * h) as usize);
        for row in 0..h {
            for col in 0..w {
                let z = rng.gen_range(dist - 1.5..dist + 1.5);
                let u = col as f64 + 0.5 + rng.gen_range(-0.5..0.5);
                let v = row as f64 + 0.5 + rng.gen_range(-0.5..0.5);
                let pc = [(u - cam.cx) / cam.fx * z, (v - cam.cy) / cam.fy * z, z];
                let size = z / cam.fx;
                records.push(GaussianRecord {
                    mu: cam.camera_to_world(&pc),
                    q: unit_quat(&mut rng),
                    s: std::array::from_fn(|_| size * rng.gen_range(0.2..1.5)),
                    sh: (0..3).map(|_| rng.gen_range(-1.0..1.5)).collect(),
                    sigma: rng.gen_range(0.3..1.0),
                });
            }
        }
        let planes = vpt_forward(&cam, &records).map_err(|e| e.to_string())?;
        let geo = vpt_inverse(&cam, &planes).map_err(|e| e.to_string())?;
        for (a, b) in records.iter().zip(&geo) {
            let mu_n = geometry::norm(&a.mu);
            for i in 0..3 {
                worst = worst.max((a.mu[i] - b.mu[i]).abs() / mu_n);
                worst = worst.max((a.s[i] - b.s[i]).abs() / a.s[i]);
            }
            let dq: f64 = a.q.iter().zip(&b.q).map(|(x, y)| x * y).sum();
            let sign = if dq < 0.0 { -1.0 } else { 1.0 };
            for i in 0..4 {
                worst = worst.max((a.q[i] - sign * b.q[i]).abs());
            }
            let mut r = a.clone();
            r.mu = b.mu;
            r.q = b.q;
            r.s = b.s;
            rebuilt.push(r);
        }
        originals.extend(records);
        cams.push(cam);
    }
    let mut min_psnr = f64::INFINITY;
    for cam in &cams {
        let t = RenderTarget::with_size(cam, 128, 128).map_err(|e| e.to_string())?;
        let (a, _) = render(&originals, 0, &t).map_err(|e| e.to_string())?;
        let (b, _) = render(&rebuilt, 0, &t).map_err(|e| e.to_string())?;
        min_psnr = min_psnr.min(psnr(&a, &b).map_err(|e| e.to_string())?);
    }
    check(
        worst <= 1e-5 && min_psnr >= 80.0,
        format!("{} Gaussians, max rel err {worst:.2e} (<= 1e-5), min PSNR {min_psnr:.1} dB (>= 80)", originals.len()),
    )
}

fn criterion_3() -> Outcome {
    let mut worst = 0.0f64;
    for g in [Geometry::Plane, Geometry::Sphere, Geometry::Room] {
        for seed in 0..2 {
            let scene: Scene64 = generate(&SynthSpec::new(g, 2, 64, 48, 1, seed)).map_err(|e| e.to_string())?;
            for v in &scene.views {
                let planes = vpt_forward(&v.camera, &v.records).map_err(|e| e.to_string())?;
                for d in planes.dx.data.iter().chain(&planes.dy.data) {
                    worst = worst.max(d.abs());
                }
            }
        }
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scene = dir.path().join("s.gsmap");
    let with = dir.path().join("vpt.tspl");
    let without = dir.path().join("novpt.tspl");
    gspc(&["synth", p(&scene), "--geometry", "sphere", "--res", "64x64"])?;
    gspc(&["encode", p(&scene), p(&with)])?;
    gspc(&["encode", p(&scene), p(&without), "--no-vpt"])?;
    let pos = |path: &Path| -> std::result::Result<u64, String> {
        let csv = gspc(&["info", p(path), "--csv"])?;
        allocation(&csv)
            .into_iter()
            .find(|(n, _)| n == Component::Position.name())
            .map(|(_, b)| b)
            .ok_or_else(|| "no position row".to_string())
    };
    let (a, b) = (pos(&with)?, pos(&without)?);
    check(
        worst <= 1e-6 && b > a,
        format!("max |dx|,|dy| {worst:.1e} px (<= 1e-6); position bytes {a} with VPT, {b} without"),
    )
}

fn delta_error(x: &CoeffMatrix<f64>, lambda: &[f64], w: &[f64], k: usize) -> f64 {
    let d = x.dim;
    let mut total = 0.0;
    for m in 0..x.cols() {
        let y: Vec<f64> = x.column(m).iter().zip(lambda).map(|(v, l)| v * l).collect();
        let mut r = y.clone();
        for j in 0..k {
            let c = &w[j * d..(j + 1) * d];
            let z: f64 = c.iter().zip(&y).map(|(a, b)| a * b).sum();
            r.iter_mut().zip(c).for_each(|(ri, ci)| *ri -= z * ci);
        }
        total += r.iter().map(|v| v * v).sum::<f64>();
    }
    total
}

fn random_orthonormal(rng: &mut ChaCha8Rng, d: usize, k: usize) -> Vec<f64> {
    let mut cols: Vec<Vec<f64>> = Vec::new();
    while cols.len() < k {
        let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for c in &cols {
            let dp: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(c).for_each(|(a, b)| *a -= dp * b);
        }
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-3 {
            cols.push(v.into_iter().map(|a| a / n).collect());
        }
    }
    cols.concat()
}

fn random_dirs(rng: &mut ChaCha8Rng) -> Vec<Vec3<f64>> {
    (0..rng.gen_range(1..64))
        .map(|_| geometry::normalize(&[rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]))
        .collect()
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let c0 = 0.5 / std::f64::consts::PI.sqrt();
    for degree in 0..=3 {
        for _ in 0..25 {
            let lambda = vabr::visibility_weights(&random_dirs(&mut rng), degree).map_err(|e| e.to_string())?;
            if (lambda[0] - 0.2820948).abs() > 1e-6 || (lambda[0] - c0).abs() > 1e-12 {
                return Err(format!("lambda_0 = {}", lambda[0]));
            }
        }
    }

    let mut worst_rt = 0.0f64;
    let mut monotone_ok = 0;
    for t in 0..100 {
        let degree = (t % 4) as u32;
        let d = 3 * ((degree + 1) * (degree + 1)) as usize;
        let lambda = vabr::visibility_weights(&random_dirs(&mut rng), degree).map_err(|e| e.to_string())?;
        let m = rng.gen_range(d..4 * d + 20);
        let x = CoeffMatrix {
            dim: d,
            data: (0..d * m).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        };
        let mut prev = f64::INFINITY;
        let mut ok = true;
        for k in 1..=d {
            let b = vabr::fit_basis(&x, &lambda, k, degree).map_err(|e| e.to_string())?;
            let xr = vabr::vabr_inverse(&vabr::vabr_forward(&x, &b).map_err(|e| e.to_string())?, &b).map_err(|e| e.to_string())?;
            let mse = x.data.iter().zip(&xr.data).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.data.len() as f64;
            if mse > prev {
                ok = false;
            }
            prev = mse;
            if k == d {
                let diff: f64 = x.data.iter().zip(&xr.data).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                worst_rt = worst_rt.max(diff / x.frobenius());
            }
        }
        monotone_ok += ok as usize;
    }

    let mut beaten = 0usize;
    let mut trials = 0usize;
    for d in 2..=4usize {
        for k in 1..d {
            let lambda: Vec<f64> = (0..d).map(|_| rng.gen_range(0.05..1.0)).collect();
            let m = 40;
            let x = CoeffMatrix {
                dim: d,
                data: (0..d * m).map(|i| rng.gen_range(-1.0..1.0) * (1.0 + (i % d) as f64)).collect(),
            };
            let fit = vabr::fit_basis(&x, &lambda, k, 0).map_err(|e| e.to_string())?;
            let best = delta_error(&x, &lambda, &fit.wmat, k);
            for _ in 0..1000 {
                trials += 1;
                let w = random_orthonormal(&mut rng, d, k);
                if delta_error(&x, &lambda, &w, k) < best {
                    beaten += 1;
                }
            }
        }
    }
    check(
        worst_rt <= 1e-9 && monotone_ok == 100 && beaten == 0,
        format!(
            "lambda_0 ok; k=d rel Frobenius {worst_rt:.1e} (<= 1e-9); monotone {monotone_ok}/100; \
             fitted basis beaten {beaten}/{trials}"
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 1000;
    let mut report = Vec::new();
    for c in ChannelClass::ALL {
        let values: Vec<f32> = (0..n * n)
            .map(|i| {
                let v: f64 = match c {
                    ChannelClass::Depth => rng.gen_range(0.5..50.0),
                    ChannelClass::OffsetXy => rng.gen_range(-0.5..0.5),
                    ChannelClass::Scale => (rng.gen_range(-8.0f64..0.0)).exp(),
                    ChannelClass::Rotation => rng.gen_range(-1.0..1.0),
                    ChannelClass::Color => {
                        let g: f64 = (0..4).map(|_| rng.gen_range(-1.0..1.0)).sum();
                        g * 0.5
                    }
                    ChannelClass::Opacity => rng.gen_range(0.0..1.0),
                };
                // Sparse high outliers exercise the clamp.
                if i % 50_000 == 7 {
                    (v.abs() * 1e3 + 100.0) as f32
                } else {
                    v as f32
                }
            })
            .collect();
        let plane = Plane::from_vec(n, n, values);
        let (idx, meta) = quantize_plane(&plane, default_alpha(c), None).map_err(|e| e.to_string())?;
        let back: Plane<f64> = dequantize_plane(&idx, &meta);
        let half = meta.step as f64 / 2.0;
        let (mut checked, mut truncated) = (0usize, 0usize);
        for ((v, r), i) in plane.data.iter().zip(&back.data).zip(&idx.data) {
            let v = *v as f64;
            if *i == MAX_INDEX && (v - meta.offset as f64) / meta.step as f64 > MAX_INDEX as f64 + 0.5 {
                truncated += 1;
                continue;
            }
            checked += 1;
            if (r - v).abs() > half {
                return Err(format!("{}: |{r} - {v}| > {half}", c.name()));
            }
        }
        if truncated != meta.count_truncated as usize {
            return Err(format!("{}: truncation count {truncated} vs {}", c.name(), meta.count_truncated));
        }
        report.push(format!("{} {checked}", c.name()));
    }
    for v in [0.0f32, 0.3, -7.25, 1e-8, 12345.678, f32::MAX / 2.0] {
        for shared in [None, Some(0.5)] {
            let plane = Plane::filled(17, 9, v);
            let (idx, meta) = quantize_plane(&plane, 1024.0, shared).map_err(|e| e.to_string())?;
            let back: Plane<f32> = dequantize_plane(&idx, &meta);
            if back.data.iter().any(|&r| r != v) {
                return Err(format!("constant {v} not exact"));
            }
        }
    }
    Ok(format!("all within step/2 ({}); constant planes exact", report.join(", ")))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut samples = 0usize;
    for i in 0..500 {
        let (w, h) = match i {
            0 => (1, 1),
            1 => (256, 256),
            _ => (rng.gen_range(1..=256), rng.gen_range(1..=256)),
        };
        let data: Vec<u16> = match i % 7 {
            0 => vec![0; w * h],
            1 => (0..w * h).map(|j| ((j % w + j / w) % 16384) as u16).collect(),
            2 => vec![MAX_INDEX; w * h],
            3 => (0..w * h).map(|j| if (j % w + j / w) % 2 == 0 { 0 } else { MAX_INDEX }).collect(),
            4 => (0..w * h).map(|_| if rng.gen_bool(0.02) { rng.gen_range(0..=MAX_INDEX) } else { 0 }).collect(),
            5 => {
                let base = rng.gen_range(0..16000u16);
                (0..w * h).map(|_| base + rng.gen_range(0..300)).collect()
            }
            _ => (0..w * h).map(|_| rng.gen_range(0..=MAX_INDEX)).collect(),
        };
        let plane = Plane::from_vec(w, h, data);
        let ep = codec::encode_plane_lossless(&plane).map_err(|e| e.to_string())?;
        let back = codec::decode_plane(&ep, None).map_err(|e| e.to_string())?;
        if back != plane {
            return Err(format!("plane {i} ({w}x{h}) differs after round trip"));
        }
        samples += w * h;
    }
    let zero = codec::encode_plane_lossless(&Plane::filled(64, 64, 0u16)).map_err(|e| e.to_string())?;
    check(
        zero.payload.len() < 40,
        format!("500 planes ({samples} samples) bit-exact; zero 64x64 plane {} bytes (< 40)", zero.payload.len()),
    )
}

fn criterion_7() -> Outcome {
    let mut all_ok = true;
    let mut parts = Vec::new();
    for g in [Geometry::Plane, Geometry::Sphere, Geometry::Room] {
        let scene: Scene = generate(&SynthSpec::new(g, 2, 128, 128, 1, 0)).map_err(|e| e.to_string())?;
        let cs = encode_scene(&scene, &EncodeConfig::default().with_qg(0)).map_err(|e| e.to_string())?;
        let bytes = cs.to_bytes().map_err(|e| e.to_string())?.len() as u64;
        let decoded: Scene = decode_scene(&cs, None).map_err(|e| e.to_string())?;
        let report = evaluate(&scene, &decoded, &scene.cameras(), None, Some(bytes)).map_err(|e| e.to_string())?;
        let fraction = bytes as f64 / scene.raw_f32_bytes() as f64;
        let ok = fraction <= 0.02 && report.min_psnr() >= 35.0;
        all_ok &= ok;
        parts.push(format!(
            "{} {:.2}% ({:.1}x) {:.1} dB{}",
            g.name(),
            fraction * 100.0,
            1.0 / fraction,
            report.min_psnr(),
            if ok { "" } else { " [miss]" }
        ));
    }
    check(all_ok, format!("size <= 2% and PSNR >= 35 dB: {}", parts.join("; ")))
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scene = dir.path().join("s.gsmap");
    let csv = dir.path().join("sweep.csv");
    gspc(&["synth", p(&scene), "--geometry", "sphere", "--res", "64x64"])?;
    gspc(&["sweep", p(&scene), "--qg", "0,3,6,12", "--csv", p(&csv)])?;
    let text = std::fs::read_to_string(&csv).map_err(|e| e.to_string())?;
    let rows: Vec<(u64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            (c[1].parse().unwrap(), c[2].parse().unwrap())
        })
        .collect();
    let sizes_ok = rows.windows(2).all(|w| w[1].0 <= w[0].0);
    let psnr_ok = rows.windows(2).all(|w| w[1].1 <= w[0].1 + 0.1);
    let shown: Vec<String> = rows.iter().map(|(b, q)| format!("{b}B/{q:.2}dB")).collect();
    check(rows.len() == 4 && sizes_ok && psnr_ok, format!("qg 0,3,6,12: {}", shown.join(" -> ")))
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scene = dir.path().join("s.gsmap");
    let tspl = dir.path().join("s.tspl");
    gspc(&["synth", p(&scene), "--geometry", "room", "--res", "48x32", "--views", "3"])?;
    gspc(&["encode", p(&scene), p(&tspl), "--qg", "6"])?;
    let rows = allocation(&gspc(&["info", p(&tspl), "--csv"])?);
    let size = std::fs::metadata(&tspl).map_err(|e| e.to_string())?.len();
    let sum: u64 = rows.iter().filter(|(n, _)| n != "total").map(|(_, b)| b).sum();
    let names: Vec<&str> = rows.iter().map(|(n, _)| n.as_str()).collect();
    let required = ["position", "scale", "rotation", "color", "opacity", "metadata"];
    let missing: Vec<&&str> = required.iter().filter(|r| !names.contains(r)).collect();
    check(
        sum == size && missing.is_empty(),
        format!("components {names:?} sum to {sum}, file {size} bytes, missing {missing:?}"),
    )
}

fn criterion_10() -> Outcome {
    let scene: Scene = generate(&SynthSpec::new(Geometry::Room, 2, 64, 64, 2, 10)).map_err(|e| e.to_string())?;
    let cfg = EncodeConfig::default().with_qg(3);
    let a = encode_scene(&scene, &cfg).and_then(|c| c.to_bytes()).map_err(|e| e.to_string())?;
    let b = encode_scene(&scene, &cfg).and_then(|c| c.to_bytes()).map_err(|e| e.to_string())?;
    let target = RenderTarget::new(scene.views[0].camera.clone());
    let r1 = render::render_scene(&scene, &target).map_err(|e| e.to_string())?;
    let r2 = render::render_scene(&scene, &target).map_err(|e| e.to_string())?;
    check(
        a == b && r1 == r2,
        format!("containers identical ({} bytes): {}; renders identical: {}", a.len(), a == b, r1 == r2),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (1, "channel constants", criterion_1, Duration::from_secs(1)),
        (2, "VPT invertibility", criterion_2, Duration::from_secs(5)),
        (3, "pixel alignment", criterion_3, Duration::from_secs(10)),
        (4, "VABR correctness", criterion_4, Duration::from_secs(30)),
        (5, "quantizer bound", criterion_5, Duration::from_secs(5)),
        (6, "lossless plane codec", criterion_6, Duration::from_secs(10)),
        (7, "end-to-end compression", criterion_7, Duration::from_secs(60)),
        (8, "rate monotonicity", criterion_8, Duration::from_secs(120)),
        (9, "bit allocation", criterion_9, Duration::from_secs(1)),
        (10, "determinism", criterion_10, Duration::from_secs(30)),
    ];
    let mut failed = 0;
    for (n, name, run, limit) in criteria {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if took <= limit => (true, d),
            Ok(d) => (false, format!("{d}; over the {limit:?} limit")),
            Err(d) => (false, d),
        };
        failed += !ok as usize;
        println!(
            "{} criterion {n:>2} ({name}): {detail} [{:.2}s]",
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64()
        );
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
