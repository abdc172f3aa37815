//! Command-line driver: `interpolate`, `eval`, `bench` and `synthdata`.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::exec::Exec;
use crate::grid::{psnr, FlowField, Grid};
use crate::io::{load_params, load_upsampler_weights, read_flo, read_image, write_flo, write_image};
use crate::metrics::MetricParams;
use crate::scenes::{Scene, SceneKind};
use crate::splat::SplatKernel;
use crate::synth::{Interpolator, SynthesisConfig};
use crate::upsample::{bilinear_upsample_flow, guide_pyramid, iterative_upsample};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "splatkit", version, about = "Frame interpolation by softmax splatting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize intermediate frames from two frames and their flows.
    Interpolate(InterpolateArgs),
    /// Report per-frame and mean PSNR between two image sets as CSV.
    Eval(EvalArgs),
    /// Time first-frame versus additional-frame synthesis.
    Bench(BenchArgs),
    /// Write an analytic test scene with exact flows and ground truth.
    Synthdata(SynthdataArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Bilinear,
    Gaussian,
}

impl From<KernelArg> for SplatKernel {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Bilinear => SplatKernel::Bilinear,
            KernelArg::Gaussian => SplatKernel::GAUSSIAN,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct ThreadArgs {
    /// Worker threads (defaults to all cores).
    #[arg(long, env = "SPLATKIT_THREADS")]
    pub threads: Option<usize>,
    /// Single-threaded, run-to-run reproducible execution.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, clap::Args)]
pub struct InterpolateArgs {
    #[arg(long)]
    pub frame0: PathBuf,
    #[arg(long)]
    pub frame1: PathBuf,
    /// Flow from frame0 to frame1 (.flo).
    #[arg(long)]
    pub flow_fwd: PathBuf,
    /// Flow from frame1 to frame0 (.flo).
    #[arg(long)]
    pub flow_bwd: PathBuf,
    /// Comma-separated times in [0, 1].
    #[arg(long, value_delimiter = ',', required = true)]
    pub times: Vec<f32>,
    /// Output path; `{i}` is replaced by the frame index and `{t}` by the time.
    #[arg(long)]
    pub out_pattern: String,
    /// Resolution ratio between the frames and the given flows.
    #[arg(long, default_value_t = 1, value_parser = parse_scale)]
    pub scale: usize,
    /// Upsampler weight file; bilinear upsampling is used without it.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Metric parameter file (TOML).
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = KernelArg::Gaussian)]
    pub kernel: KernelArg,
    #[command(flatten)]
    pub exec: ThreadArgs,
}

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    /// Directory or glob pattern of predicted frames.
    #[arg(long)]
    pub pred: String,
    /// Directory or glob pattern of ground-truth frames.
    #[arg(long)]
    pub gt: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Resolution {
    pub width: usize,
    pub height: usize,
}

impl FromStr for Resolution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (w, h) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
        let parse = |v: &str| v.trim().parse::<usize>().ok().filter(|&n| n >= 2);
        match (parse(w), parse(h)) {
            (Some(width), Some(height)) => Ok(Resolution { width, height }),
            _ => Err(format!("expected WxH with sides >= 2, got {s:?}")),
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

#[derive(Debug, clap::Args)]
pub struct BenchArgs {
    #[arg(long, default_value = "1024x1024")]
    pub resolution: Resolution,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..))]
    pub frames: u32,
    #[command(flatten)]
    pub exec: ThreadArgs,
}

#[derive(Debug, clap::Args)]
pub struct SynthdataArgs {
    #[arg(long, value_parser = parse_scene)]
    pub scene: SceneKind,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "256x256")]
    pub size: Resolution,
}

fn parse_scale(s: &str) -> Result<usize, String> {
    match s {
        "1" => Ok(1),
        "2" => Ok(2),
        "4" => Ok(4),
        _ => Err(format!("scale must be 1, 2 or 4, got {s:?}")),
    }
}

fn parse_scene(s: &str) -> Result<SceneKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(e) => write!(f, "error: {e}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Reports go to stdout, diagnostics to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    match run(cli.command, &mut stdout.lock()) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Interpolate(a) => {
            let exec = a.exec.resolve();
            with_threads(&a.exec, || interpolate(&a, exec))
        }
        Command::Eval(a) => eval(&a, out),
        Command::Bench(a) => {
            let exec = a.exec.resolve();
            let report = with_threads(&a.exec, || {
                Ok((
                    measure_amortization(a.resolution, a.frames as usize, exec)?,
                    rayon::current_num_threads(),
                ))
            })?;
            write_bench(&a, &report.0, report.1, out)
        }
        Command::Synthdata(a) => synthdata(&a),
    }
}

impl ThreadArgs {
    fn resolve(&self) -> Exec {
        if self.deterministic {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }

    fn thread_count(&self) -> Option<usize> {
        if self.deterministic {
            Some(1)
        } else {
            self.threads.filter(|&n| n > 0)
        }
    }
}

fn with_threads<R>(args: &ThreadArgs, f: impl FnOnce() -> Result<R, CliError> + Send) -> Result<R, CliError>
where
    R: Send,
{
    match args.thread_count() {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?
            .install(f),
    }
}

fn output_path(pattern: &str, index: usize, t: f32, count: usize) -> Result<PathBuf, CliError> {
    if count > 1 && !pattern.contains("{i}") && !pattern.contains("{t}") {
        return Err(CliError::Usage(
            "--out-pattern needs {i} or {t} when several times are given".into(),
        ));
    }
    Ok(PathBuf::from(
        pattern
            .replace("{i}", &index.to_string())
            .replace("{t}", &format!("{t:.3}")),
    ))
}

/// Brings flows given at `1/scale` of the frame resolution up to full size.
fn upsample_flows(
    i0: &Grid,
    i1: &Grid,
    f01: FlowField,
    f10: FlowField,
    scale: usize,
    weights: Option<&Path>,
) -> Result<(FlowField, FlowField), CliError> {
    if scale == 1 {
        return Ok((f01, f10));
    }
    let (h, w) = (i0.height(), i0.width());
    if h % scale != 0 || w % scale != 0 {
        return Err(CliError::Data(Error::InvalidArgument(format!(
            "frame size {w}x{h} is not divisible by scale {scale}"
        ))));
    }
    let expected = (h / scale, w / scale);
    if (f01.height(), f01.width()) != expected {
        return Err(CliError::Data(Error::ShapeMismatch {
            context: "flow resolution for --scale",
            expected: (expected.0, expected.1, 2),
            found: f01.shape(),
        }));
    }
    let iterations = scale.trailing_zeros() as usize;
    match weights {
        Some(p) => {
            let weights = load_upsampler_weights(p)?;
            let guides = guide_pyramid(i0, i1, iterations)?;
            Ok(iterative_upsample(&f01, &f10, &guides, iterations, &weights)?)
        }
        None => {
            let (mut a, mut b) = (f01, f10);
            for _ in 0..iterations {
                a = bilinear_upsample_flow(&a);
                b = bilinear_upsample_flow(&b);
            }
            Ok((a, b))
        }
    }
}

fn interpolate(a: &InterpolateArgs, exec: Exec) -> Result<(), CliError> {
    for &t in &a.times {
        if !(0.0..=1.0).contains(&t) {
            return Err(CliError::Usage(format!("time {t} is outside [0, 1]")));
        }
    }
    let paths = a
        .times
        .iter()
        .enumerate()
        .map(|(i, &t)| output_path(&a.out_pattern, i, t, a.times.len()))
        .collect::<Result<Vec<_>, _>>()?;
    let i0 = read_image(&a.frame0)?;
    let i1 = read_image(&a.frame1)?;
    let (f01, f10) = upsample_flows(
        &i0,
        &i1,
        read_flo(&a.flow_fwd)?,
        read_flo(&a.flow_bwd)?,
        a.scale,
        a.weights.as_deref(),
    )?;
    let metric_params = match &a.params {
        Some(p) => load_params(p)?,
        None => MetricParams::default(),
    };
    let cfg = SynthesisConfig {
        kernel: a.kernel.into(),
        metric_params,
        exec,
        ..Default::default()
    };
    let interp = Interpolator::new(&i0, &i1, &f01, &f10, cfg)?;
    for (&t, path) in a.times.iter().zip(&paths) {
        if let Some(dir) = Path::new(path).parent() {
            std::fs::create_dir_all(dir)?;
        }
        write_image(&interp.frame(t)?, path)?;
    }
    Ok(())
}

fn collect_frames(spec: &str) -> Result<Vec<PathBuf>, CliError> {
    let path = Path::new(spec);
    let mut files: Vec<PathBuf> = if path.is_dir() {
        std::fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("png") || e.eq_ignore_ascii_case("pfm"))
            })
            .collect()
    } else {
        glob::glob(spec)
            .map_err(|e| CliError::Usage(format!("bad pattern {spec:?}: {e}")))?
            .filter_map(Result::ok)
            .collect()
    };
    files.sort();
    Ok(files)
}

fn format_db(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

fn eval(a: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let pred = collect_frames(&a.pred)?;
    let gt = collect_frames(&a.gt)?;
    if pred.is_empty() {
        return Err(CliError::Data(Error::InvalidArgument(format!(
            "no frames match {:?}",
            a.pred
        ))));
    }
    if pred.len() != gt.len() {
        return Err(CliError::Data(Error::InvalidArgument(format!(
            "{} predicted frames but {} ground-truth frames",
            pred.len(),
            gt.len()
        ))));
    }
    writeln!(out, "frame,psnr_db")?;
    let mut total = 0.0;
    for (p, g) in pred.iter().zip(&gt) {
        let v = psnr(&read_image(p)?, &read_image(g)?, 1.0)?;
        total += v;
        let name = p
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        writeln!(out, "{name},{}", format_db(v))?;
    }
    writeln!(out, "mean,{}", format_db(total / pred.len() as f64))?;
    Ok(())
}

/// Timings of one multi-frame synthesis run.
#[derive(Clone, Debug)]
pub struct BenchReport {
    /// Metric computation plus the first frame.
    pub first: Duration,
    pub additional: Vec<Duration>,
}

impl BenchReport {
    pub fn additional_mean(&self) -> Option<Duration> {
        (!self.additional.is_empty()).then(|| self.additional.iter().sum::<Duration>() / self.additional.len() as u32)
    }

    pub fn ratio(&self) -> Option<f64> {
        self.additional_mean()
            .map(|m| m.as_secs_f64() / self.first.as_secs_f64())
    }
}

/// Synthesizes `frames` evenly spaced frames of a zoom scene.
pub fn measure_amortization(res: Resolution, frames: usize, exec: Exec) -> crate::Result<BenchReport> {
    let scene = Scene::new(SceneKind::Zoom, res.height, res.width);
    let (i0, i1) = (scene.frame(0.0), scene.frame(1.0));
    let (f01, f10) = (scene.flow01(), scene.flow10());
    let cfg = SynthesisConfig {
        exec,
        ..Default::default()
    };
    let times: Vec<f32> = (1..=frames).map(|i| i as f32 / (frames + 1) as f32).collect();

    let start = Instant::now();
    let interp = Interpolator::new(&i0, &i1, &f01, &f10, cfg)?;
    std::hint::black_box(interp.frame(times[0])?);
    let first = start.elapsed();

    let mut additional = Vec::with_capacity(frames.saturating_sub(1));
    for &t in &times[1..] {
        let start = Instant::now();
        std::hint::black_box(interp.frame(t)?);
        additional.push(start.elapsed());
    }
    Ok(BenchReport { first, additional })
}

fn write_bench(a: &BenchArgs, r: &BenchReport, threads: usize, out: &mut dyn Write) -> Result<(), CliError> {
    writeln!(out, "resolution,{}", a.resolution)?;
    writeln!(out, "threads,{threads}")?;
    writeln!(out, "frames,{}", a.frames)?;
    writeln!(out, "first_frame_ms,{:.3}", r.first.as_secs_f64() * 1e3)?;
    if let (Some(mean), Some(ratio)) = (r.additional_mean(), r.ratio()) {
        writeln!(out, "additional_frame_mean_ms,{:.3}", mean.as_secs_f64() * 1e3)?;
        writeln!(out, "ratio,{ratio:.4}")?;
    }
    Ok(())
}

/// Times at which `synthdata` writes ground-truth frames.
pub const GROUND_TRUTH_TIMES: [f32; 3] = [0.25, 0.5, 0.75];

fn synthdata(a: &SynthdataArgs) -> Result<(), CliError> {
    std::fs::create_dir_all(&a.out)?;
    let scene = Scene::new(a.scene, a.size.height, a.size.width);
    write_image(&scene.frame(0.0), a.out.join("frame0.png"))?;
    write_image(&scene.frame(1.0), a.out.join("frame1.png"))?;
    write_flo(&scene.flow01(), a.out.join("flow_fwd.flo"))?;
    write_flo(&scene.flow10(), a.out.join("flow_bwd.flo"))?;
    for t in GROUND_TRUTH_TIMES {
        write_image(&scene.frame(t), a.out.join(format!("gt_{t:.2}.png")))?;
    }
    Ok(())
}
