//! Splat-style binary PLY with a `.cams` sidecar.
//!
//! Vertex properties follow the usual 3DGS layout: `x y z nx ny nz`,
//! `f_dc_0..2`, channel-major `f_rest_*`, `opacity` (logit), `scale_0..2`
//! (natural log), `rot_0..3` (`w x y z`). Vertices are grouped by view in the
//! order of the sidecar, `W·H` consecutive vertices per view.
//!
//! The sidecar holds one line per view: `fx fy cx cy W H` followed by the
//! 12 entries of `[R|T]` row-major.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{sh_basis_count, CameraView, GaussianRecord, SceneModel, ViewMap};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Opacities are clamped to `[EPS, 1 − EPS]` before taking the logit.
const OPACITY_EPS: f64 = 1e-7;

pub fn sidecar_path(ply: &Path) -> PathBuf {
    ply.with_extension("cams")
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(OPACITY_EPS, 1.0 - OPACITY_EPS);
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn property_names(sh_degree: u32) -> Vec<String> {
    let nb = sh_basis_count(sh_degree);
    let mut names: Vec<String> = ["x", "y", "z", "nx", "ny", "nz"].iter().map(|s| s.to_string()).collect();
    names.extend((0..3).map(|i| format!("f_dc_{i}")));
    names.extend((0..3 * (nb - 1)).map(|i| format!("f_rest_{i}")));
    names.push("opacity".into());
    names.extend((0..3).map(|i| format!("scale_{i}")));
    names.extend((0..4).map(|i| format!("rot_{i}")));
    names
}

pub fn write<T: Real>(scene: &SceneModel<T>, path: &Path) -> Result<u64> {
    let nb = sh_basis_count(scene.sh_degree);
    let names = property_names(scene.sh_degree);
    let count = scene.record_count();

    let mut out = String::new();
    out.push_str("ply\nformat binary_little_endian 1.0\n");
    let _ = writeln!(out, "comment views {} sh_degree {}", scene.views.len(), scene.sh_degree);
    let _ = writeln!(out, "element vertex {count}");
    for name in &names {
        let _ = writeln!(out, "property float {name}");
    }
    out.push_str("end_header\n");
    let mut bytes = out.into_bytes();
    bytes.reserve(count * names.len() * 4);

    let mut row = Vec::with_capacity(names.len());
    for rec in scene.records() {
        row.clear();
        row.extend(rec.mu.iter().map(|v| v.as_f64()));
        row.extend([0.0; 3]);
        row.extend((0..3).map(|c| rec.sh[c].as_f64()));
        for c in 0..3 {
            row.extend((1..nb).map(|i| rec.sh[3 * i + c].as_f64()));
        }
        row.push(logit(rec.sigma.as_f64()));
        row.extend(rec.s.iter().map(|v| v.as_f64().ln()));
        row.extend(rec.q.iter().map(|v| v.as_f64()));
        for v in &row {
            bytes.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;

    let mut cams = String::new();
    for view in &scene.views {
        let c = &view.camera;
        let _ = write!(cams, "{} {} {} {} {} {}", c.fx.as_f32(), c.fy.as_f32(), c.cx.as_f32(), c.cy.as_f32(), c.width, c.height);
        for r in 0..3 {
            for k in 0..3 {
                let _ = write!(cams, " {}", c.rotation[r][k].as_f32());
            }
            let _ = write!(cams, " {}", c.translation[r].as_f32());
        }
        cams.push('\n');
    }
    let side = sidecar_path(path);
    std::fs::write(&side, cams).map_err(|e| Error::io(&side, e))?;
    Ok(bytes.len() as u64)
}

fn read_cameras<T: Real>(path: &Path) -> Result<Vec<CameraView<T>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cams = Vec::new();
    let mut offset = 0u64;
    for line in text.lines() {
        let line_offset = offset;
        offset += line.len() as u64 + 1;
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |message: String| Error::Parse {
            offset: line_offset,
            message,
        };
        if fields.len() != 18 {
            return Err(bad(format!("camera line has {} fields, expected 18", fields.len())));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .map_err(|e| bad(format!("field {i} `{}`: {e}", fields[i])))
        };
        let int = |i: usize| -> Result<u32> {
            fields[i]
                .parse::<u32>()
                .map_err(|e| bad(format!("field {i} `{}`: {e}", fields[i])))
        };
        let mut rotation = [[T::zero(); 3]; 3];
        let mut translation = [T::zero(); 3];
        for r in 0..3 {
            for k in 0..3 {
                rotation[r][k] = T::lit(num(6 + 4 * r + k)?);
            }
            translation[r] = T::lit(num(6 + 4 * r + 3)?);
        }
        cams.push(CameraView {
            fx: T::lit(num(0)?),
            fy: T::lit(num(1)?),
            cx: T::lit(num(2)?),
            cy: T::lit(num(3)?),
            width: int(4)?,
            height: int(5)?,
            rotation,
            translation,
        });
    }
    Ok(cams)
}

pub fn read<T: Real>(path: &Path) -> Result<SceneModel<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let cameras = read_cameras::<T>(&sidecar_path(path))?;

    let end_marker = b"end_header\n";
    let header_end = bytes
        .windows(end_marker.len())
        .position(|w| w == end_marker)
        .map(|p| p + end_marker.len())
        .ok_or_else(|| Error::Parse {
            offset: 0,
            message: "missing end_header".into(),
        })?;
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|e| Error::Parse {
        offset: e.valid_up_to() as u64,
        message: "header is not UTF-8".into(),
    })?;

    let mut lines = header.lines();
    if lines.next() != Some("ply") {
        return Err(Error::Parse {
            offset: 0,
            message: "not a PLY file".into(),
        });
    }
    let mut vertex_count = None;
    let mut props: Vec<(String, usize)> = Vec::new();
    let mut in_vertex = false;
    let mut offset = 4u64;
    for line in lines {
        let line_offset = offset;
        offset += line.len() as u64 + 1;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let bad = |message: String| Error::Parse {
            offset: line_offset,
            message,
        };
        match tokens.as_slice() {
            ["format", "binary_little_endian", _] => {}
            ["format", other, ..] => return Err(bad(format!("unsupported PLY format `{other}`"))),
            ["element", "vertex", n] => {
                vertex_count = Some(n.parse::<usize>().map_err(|e| bad(e.to_string()))?);
                in_vertex = true;
            }
            ["element", ..] => in_vertex = false,
            ["property", ty, name] if in_vertex => {
                let size = match *ty {
                    "float" | "float32" => 4,
                    "double" | "float64" => 8,
                    other => return Err(bad(format!("unsupported property type `{other}`"))),
                };
                props.push((name.to_string(), size));
            }
            _ => {}
        }
    }
    let vertex_count = vertex_count.ok_or_else(|| Error::Parse {
        offset: 0,
        message: "no vertex element".into(),
    })?;

    let rest = props.iter().filter(|(n, _)| n.starts_with("f_rest_")).count();
    if rest % 3 != 0 {
        return Err(Error::Parse {
            offset: 0,
            message: format!("{rest} f_rest properties is not a multiple of 3"),
        });
    }
    let nb = rest / 3 + 1;
    let sh_degree = (nb as f64).sqrt().round() as u32 - 1;
    if sh_basis_count(sh_degree) != nb {
        return Err(Error::Parse {
            offset: 0,
            message: format!("{nb} SH coefficients per channel is not a square"),
        });
    }

    let mut column: HashMap<&str, (usize, usize)> = HashMap::new();
    let mut stride = 0;
    for (name, size) in &props {
        column.insert(name.as_str(), (stride, *size));
        stride += size;
    }
    let lookup = |name: &str| -> Result<(usize, usize)> {
        column.get(name).copied().ok_or_else(|| Error::Parse {
            offset: 0,
            message: format!("missing vertex property `{name}`"),
        })
    };
    let fetch = |name: String| lookup(&name);
    let pos = [fetch("x".into())?, fetch("y".into())?, fetch("z".into())?];
    let dc = [fetch("f_dc_0".into())?, fetch("f_dc_1".into())?, fetch("f_dc_2".into())?];
    let rest_cols = (0..rest).map(|i| fetch(format!("f_rest_{i}"))).collect::<Result<Vec<_>>>()?;
    let opacity = fetch("opacity".into())?;
    let scale = [fetch("scale_0".into())?, fetch("scale_1".into())?, fetch("scale_2".into())?];
    let rot = [
        fetch("rot_0".into())?,
        fetch("rot_1".into())?,
        fetch("rot_2".into())?,
        fetch("rot_3".into())?,
    ];

    let expected: usize = cameras.iter().map(|c| c.pixel_count()).sum();
    if expected != vertex_count {
        return Err(Error::Parse {
            offset: 0,
            message: format!("sidecar cameras cover {expected} pixels but PLY has {vertex_count} vertices"),
        });
    }
    let body = &bytes[header_end..];
    if body.len() < vertex_count * stride {
        return Err(Error::Parse {
            offset: (header_end + body.len()) as u64,
            message: format!("vertex data truncated: need {} bytes", vertex_count * stride),
        });
    }

    let read_at = |base: usize, (off, size): (usize, usize)| -> f64 {
        let at = base + off;
        if size == 4 {
            f32::from_le_bytes(body[at..at + 4].try_into().unwrap()) as f64
        } else {
            f64::from_le_bytes(body[at..at + 8].try_into().unwrap())
        }
    };

    let mut views = Vec::with_capacity(cameras.len());
    let mut v = 0usize;
    for camera in cameras {
        let n = camera.pixel_count();
        let mut records = Vec::with_capacity(n);
        for _ in 0..n {
            let base = v * stride;
            let mut sh = vec![T::zero(); 3 * nb];
            for c in 0..3 {
                sh[c] = T::lit(read_at(base, dc[c]));
                for i in 1..nb {
                    sh[3 * i + c] = T::lit(read_at(base, rest_cols[c * (nb - 1) + i - 1]));
                }
            }
            records.push(GaussianRecord {
                mu: pos.map(|p| T::lit(read_at(base, p))),
                q: rot.map(|p| T::lit(read_at(base, p))),
                s: scale.map(|p| T::lit(read_at(base, p).exp())),
                sh,
                sigma: T::lit(sigmoid(read_at(base, opacity))),
            });
            v += 1;
        }
        views.push(ViewMap { camera, records });
    }
    Ok(SceneModel { sh_degree, views })
}
