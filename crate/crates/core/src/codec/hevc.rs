//! Adapter for an external HEVC encoder/decoder pair (HM-style command line).
//!
//! Each plane is written as one raw monochrome frame of 16-bit little-endian
//! samples holding the 14-bit indices low-aligned, then coded intra-only:
//!
//! ```text
//! <enc> -i in.yuv -b out.bin -wdt W -hgt H -fr 1 -f 1 --InputBitDepth=14
//!       --InternalBitDepth=14 --OutputBitDepth=14 --InputChromaFormat=400
//!       --ChromaFormatIDC=400 --IntraPeriod=1 --ConformanceWindowMode=1 -q QP
//! <dec> -b out.bin -o rec.yuv -d 14
//! ```

use std::path::{Path, PathBuf};
use std::process::Command;

use crate::error::{Error, Result};
use crate::plane::Plane;
use crate::quantizer::MAX_INDEX;

pub const ENV_ENCODER: &str = "GSPC_HEVC_ENC";
pub const ENV_DECODER: &str = "GSPC_HEVC_DEC";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HevcConfig {
    pub encoder: PathBuf,
    pub decoder: PathBuf,
    /// Appended to every encoder invocation.
    pub extra_encoder_args: Vec<String>,
}

impl HevcConfig {
    pub fn new(encoder: impl Into<PathBuf>, decoder: impl Into<PathBuf>) -> Self {
        HevcConfig {
            encoder: encoder.into(),
            decoder: decoder.into(),
            extra_encoder_args: Vec::new(),
        }
    }

    /// Explicit paths win over `GSPC_HEVC_ENC` / `GSPC_HEVC_DEC`.
    pub fn resolve(encoder: Option<PathBuf>, decoder: Option<PathBuf>) -> Result<Self> {
        let pick = |given: Option<PathBuf>, var: &str, role: &str| {
            given
                .or_else(|| std::env::var_os(var).map(PathBuf::from))
                .ok_or_else(|| Error::BackendUnavailable(format!("no HEVC {role} given (flag or {var})")))
        };
        Ok(HevcConfig::new(
            pick(encoder, ENV_ENCODER, "encoder")?,
            pick(decoder, ENV_DECODER, "decoder")?,
        ))
    }

    /// Fails with `BackendUnavailable` unless both binaries exist.
    pub fn check_available(&self) -> Result<()> {
        for (role, p) in [("encoder", &self.encoder), ("decoder", &self.decoder)] {
            if !p.is_file() {
                return Err(Error::BackendUnavailable(format!("HEVC {role} `{}` not found", p.display())));
            }
        }
        Ok(())
    }
}

fn run(program: &Path, args: &[String]) -> Result<()> {
    let output = Command::new(program).args(args).output().map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::BackendUnavailable(format!("`{}` not found", program.display()))
        } else {
            Error::Process {
                program: program.display().to_string(),
                status: "spawn failed".into(),
                stderr: e.to_string(),
            }
        }
    })?;
    if !output.status.success() {
        let mut diag = String::from_utf8_lossy(&output.stderr).into_owned();
        if diag.trim().is_empty() {
            diag = String::from_utf8_lossy(&output.stdout).into_owned();
        }
        return Err(Error::Process {
            program: program.display().to_string(),
            status: output.status.to_string(),
            stderr: diag.trim().to_string(),
        });
    }
    Ok(())
}

fn scratch() -> Result<tempfile::TempDir> {
    tempfile::Builder::new()
        .prefix("gspc-hevc-")
        .tempdir()
        .map_err(|e| Error::io(std::env::temp_dir(), e))
}

pub(crate) fn encode(plane: &Plane<u16>, qp: i32, config: &HevcConfig) -> Result<Vec<u8>> {
    config.check_available()?;
    let dir = scratch()?;
    let raw = dir.path().join("plane.yuv");
    let bin = dir.path().join("plane.bin");
    let bytes: Vec<u8> = plane.data.iter().flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(&raw, bytes).map_err(|e| Error::io(&raw, e))?;

    let mut args: Vec<String> = vec![
        "-i".into(),
        raw.display().to_string(),
        "-b".into(),
        bin.display().to_string(),
        "-wdt".into(),
        plane.width.to_string(),
        "-hgt".into(),
        plane.height.to_string(),
        "-fr".into(),
        "1".into(),
        "-f".into(),
        "1".into(),
        "--InputBitDepth=14".into(),
        "--InternalBitDepth=14".into(),
        "--OutputBitDepth=14".into(),
        "--InputChromaFormat=400".into(),
        "--ChromaFormatIDC=400".into(),
        "--IntraPeriod=1".into(),
        "--ConformanceWindowMode=1".into(),
        "-q".into(),
        qp.to_string(),
    ];
    args.extend(config.extra_encoder_args.iter().cloned());
    run(&config.encoder, &args)?;
    std::fs::read(&bin).map_err(|e| Error::io(&bin, e))
}

pub(crate) fn decode(payload: &[u8], width: usize, height: usize, config: &HevcConfig) -> Result<Plane<u16>> {
    if !config.decoder.is_file() {
        return Err(Error::BackendUnavailable(format!(
            "HEVC decoder `{}` not found",
            config.decoder.display()
        )));
    }
    let dir = scratch()?;
    let bin = dir.path().join("plane.bin");
    let rec = dir.path().join("plane.yuv");
    std::fs::write(&bin, payload).map_err(|e| Error::io(&bin, e))?;
    let args: Vec<String> = vec![
        "-b".into(),
        bin.display().to_string(),
        "-o".into(),
        rec.display().to_string(),
        "-d".into(),
        "14".into(),
    ];
    run(&config.decoder, &args)?;
    let bytes = std::fs::read(&rec).map_err(|e| Error::io(&rec, e))?;
    let need = width * height * 2;
    if bytes.len() < need {
        return Err(Error::Process {
            program: config.decoder.display().to_string(),
            status: "short output".into(),
            stderr: format!("decoded {} bytes, expected {need}", bytes.len()),
        });
    }
    let data = bytes[..need]
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]).min(MAX_INDEX))
        .collect();
    Ok(Plane::from_vec(width, height, data))
}
