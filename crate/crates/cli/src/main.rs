use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gsplat_codec::codec::HevcConfig;
use gsplat_codec::container::{self, bit_allocation_report, read_container, write_container};
use gsplat_codec::pipeline::{self, decode_scene, encode_scene, evaluate, EncodeConfig};
use gsplat_codec::quantizer::{AlphaTable, ChannelClass};
use gsplat_codec::render::save_png;
use gsplat_codec::synth::{self, Geometry, SynthSpec};
use gsplat_codec::vabr::{Centering, DEFAULT_K};
use gsplat_codec::{load_scene, save_scene, BackendId, Error, Scene, SceneFormat};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_BACKEND: u8 = 3;

/// Compress pixel-aligned Gaussian scenes.
#[derive(Parser)]
#[command(name = "gspc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress a scene (.gsmap or .ply) into a .tspl container.
    Encode {
        input: PathBuf,
        output: PathBuf,
        /// Global QP added to every channel offset.
        #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
        qg: i32,
        #[command(flatten)]
        codec: CodecArgs,
    },
    /// Reconstruct a scene from a container.
    Decode {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        hevc: HevcArgs,
    },
    /// Print the container header and bit allocation.
    Info {
        input: PathBuf,
        /// Emit the allocation table as CSV.
        #[arg(long)]
        csv: bool,
    },
    /// Render original and decoded scenes and compare them.
    Eval {
        original: PathBuf,
        container: PathBuf,
        /// Render resolution, e.g. 256x256 (defaults to each camera's size).
        #[arg(long, value_parser = parse_size)]
        render_size: Option<(u32, u32)>,
        /// Write original_NN.png / decoded_NN.png here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        hevc: HevcArgs,
    },
    /// Generate a synthetic scene.
    Synth {
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        views: usize,
        #[arg(long, value_parser = parse_size, default_value = "128x128")]
        res: (u32, u32),
        /// plane, sphere or room.
        #[arg(long, default_value = "plane")]
        geometry: Geometry,
        /// Offset and scale jitter in [0, 1].
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 1)]
        sh_degree: u32,
        /// Azimuth span of the camera ring in degrees.
        #[arg(long)]
        arc: Option<f64>,
    },
    /// Encode at several global QPs and record size and quality.
    Sweep {
        input: PathBuf,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "0,3,6,12")]
        qg: Vec<i32>,
        /// Write rows here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, value_parser = parse_size)]
        render_size: Option<(u32, u32)>,
        #[command(flatten)]
        codec: CodecArgs,
    },
}

#[derive(Args)]
struct HevcArgs {
    /// External HEVC encoder (or GSPC_HEVC_ENC).
    #[arg(long)]
    hevc_enc: Option<PathBuf>,
    /// External HEVC decoder (or GSPC_HEVC_DEC).
    #[arg(long)]
    hevc_dec: Option<PathBuf>,
}

#[derive(Args)]
struct CodecArgs {
    /// Retained color components.
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value = "internal-lossy")]
    backend: BackendId,
    /// Use the internal lossy backend if the HEVC binaries are missing.
    #[arg(long)]
    hevc_fallback: bool,
    /// Override a channel's alpha, e.g. color=2048. Repeatable.
    #[arg(long = "alpha", value_parser = parse_alpha)]
    alphas: Vec<(ChannelClass, f64)>,
    /// Store world-space geometry.
    #[arg(long)]
    no_vpt: bool,
    /// Store raw SH coefficients.
    #[arg(long)]
    no_vabr: bool,
    /// Fit the color basis on mean-centered coefficients.
    #[arg(long)]
    centered: bool,
    #[command(flatten)]
    hevc: HevcArgs,
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got `{s}`"))?;
    let w: u32 = w.trim().parse().map_err(|_| format!("bad width in `{s}`"))?;
    let h: u32 = h.trim().parse().map_err(|_| format!("bad height in `{s}`"))?;
    if w == 0 || h == 0 {
        return Err(format!("size `{s}` must be at least 1x1"));
    }
    Ok((w, h))
}

fn parse_alpha(s: &str) -> Result<(ChannelClass, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected CHANNEL=VALUE, got `{s}`"))?;
    let class: ChannelClass = name.trim().parse().map_err(|e: Error| e.to_string())?;
    let alpha: f64 = value.trim().parse().map_err(|_| format!("bad alpha value `{value}`"))?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(format!("alpha must be positive, got {alpha}"));
    }
    Ok((class, alpha))
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::UnknownChannel(_) => Failure::Usage(e.to_string()),
            other => Failure::Lib(other),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

impl HevcArgs {
    fn optional(&self) -> Option<HevcConfig> {
        HevcConfig::resolve(self.hevc_enc.clone(), self.hevc_dec.clone()).ok()
    }
}

impl CodecArgs {
    fn config(&self, qg: i32) -> CliResult<EncodeConfig> {
        let mut alphas = AlphaTable::default();
        for &(class, a) in &self.alphas {
            alphas.set(class, a)?;
        }
        let hevc = match HevcConfig::resolve(self.hevc.hevc_enc.clone(), self.hevc.hevc_dec.clone()) {
            Ok(cfg) => Some(cfg),
            Err(e) if self.backend == BackendId::Hevc && !self.hevc_fallback => return Err(e.into()),
            Err(_) => None,
        };
        let mut cfg = EncodeConfig {
            k: self.k,
            alphas,
            backend: self.backend,
            hevc,
            hevc_fallback: self.hevc_fallback,
            vpt: !self.no_vpt,
            vabr: !self.no_vabr,
            centering: if self.centered { Centering::Centered } else { Centering::Uncentered },
            ..EncodeConfig::default()
        };
        cfg.qp.qg = qg;
        if cfg.k == 0 {
            return Err(Failure::Usage("--k must be at least 1".into()));
        }
        Ok(cfg)
    }
}

fn load(path: &Path) -> CliResult<Scene> {
    Ok(load_scene(path, SceneFormat::from_path(path))?)
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Encode {
            input,
            output,
            qg,
            codec,
        } => {
            let cfg = codec.config(qg)?;
            let scene = load(&input)?;
            let cs = encode_scene(&scene, &cfg)?;
            let bytes = write_container(&cs, &output)?;
            let raw = scene.raw_f32_bytes();
            println!(
                "{} -> {}: {} Gaussians, {raw} raw bytes, {bytes} container bytes, ratio {:.2}x",
                input.display(),
                output.display(),
                scene.record_count(),
                raw as f64 / bytes as f64
            );
            let truncated: u64 = cs.quant.iter().map(|q| q.count_truncated as u64).sum();
            if truncated > 0 {
                eprintln!("warning: {truncated} samples clamped to the 14-bit range");
            }
        }
        Command::Decode { input, output, hevc } => {
            let cs = read_container(&input)?;
            let scene: Scene = decode_scene(&cs, hevc.optional().as_ref())?;
            let bytes = save_scene(&scene, &output, SceneFormat::from_path(&output))?;
            println!(
                "{} -> {}: {} views, {} Gaussians, {bytes} bytes",
                input.display(),
                output.display(),
                scene.views.len(),
                scene.record_count()
            );
        }
        Command::Info { input, csv } => {
            let cs = read_container(&input)?;
            let report = bit_allocation_report(&cs);
            if csv {
                print!("{}", report.to_csv());
            } else {
                print!("{}", container::describe(&cs));
                println!();
                print!("{}", report.to_table());
            }
        }
        Command::Eval {
            original,
            container,
            render_size,
            out_dir,
            hevc,
        } => {
            let scene = load(&original)?;
            let cs = read_container(&container)?;
            let decoded: Scene = decode_scene(&cs, hevc.optional().as_ref())?;
            let size = fs::metadata(&container).map_err(|e| Failure::Lib(Error::Io { path: container.clone(), source: e }))?.len();
            let report = evaluate(&scene, &decoded, &scene.cameras(), render_size, Some(size))?;
            print!("{}", report.to_table());
            if let Some(dir) = out_dir {
                fs::create_dir_all(&dir).map_err(|e| Failure::Lib(Error::Io { path: dir.clone(), source: e }))?;
                for v in &report.views {
                    save_png(&v.original, &dir.join(format!("original_{:02}.png", v.view)))?;
                    save_png(&v.decoded, &dir.join(format!("decoded_{:02}.png", v.view)))?;
                }
            }
        }
        Command::Synth {
            output,
            seed,
            views,
            res,
            geometry,
            noise,
            sh_degree,
            arc,
        } => {
            let mut spec = SynthSpec::new(geometry, views, res.0, res.1, sh_degree, seed).noise(noise);
            if let Some(a) = arc {
                spec.ring.arc_deg = a;
            }
            let scene: Scene = synth::generate(&spec)?;
            let bytes = save_scene(&scene, &output, SceneFormat::from_path(&output))?;
            println!(
                "{}: {} views of {}x{}, {} Gaussians, {bytes} bytes",
                output.display(),
                views,
                res.0,
                res.1,
                scene.record_count()
            );
        }
        Command::Sweep {
            input,
            qg,
            csv,
            render_size,
            codec,
        } => {
            if qg.is_empty() {
                return Err(Failure::Usage("--qg needs at least one value".into()));
            }
            let cfg = codec.config(0)?;
            let scene = load(&input)?;
            let rows = pipeline::sweep(&scene, &cfg, &qg, render_size)?;
            let text = pipeline::sweep_csv(&rows);
            match csv {
                Some(path) => {
                    fs::write(&path, &text).map_err(|e| Failure::Lib(Error::Io { path: path.clone(), source: e }))?;
                    println!("wrote {} rows to {}", rows.len(), path.display());
                }
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_backend() { EXIT_BACKEND } else { EXIT_DATA })
        }
    }
}
