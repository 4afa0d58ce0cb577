//! `pdbench` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or data error, 2 usage error.

mod config;
mod corrupt;
mod evaluate;
mod plot;
mod sweep;
mod synth;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pdbench_core::eval::{EvalConfig, Interpolation, StrataMode};
use pdbench_core::CorruptionKind;
use serde::Serialize;

pub use plot::{render_severity_svg, render_strata_svg};

/// Error reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub(crate) fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Parser)]
#[command(name = "pdbench", version, about = "Corruption robustness benchmark for 3D person detection")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "snake_case")]
enum Command {
    /// Write a corrupted copy of a dataset.
    Corrupt(corrupt::CorruptArgs),
    /// Evaluate detections against a dataset's ground truth.
    Eval(evaluate::EvalArgs),
    /// Run the pseudo-detector over a grid of corruptions.
    Sweep(sweep::SweepArgs),
    /// Generate a synthetic dataset.
    Synth(synth::SynthArgs),
    /// Render SVG charts from a report.
    Plot(plot::PlotArgs),
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args, Serialize)]
pub(crate) struct Common {
    /// Global seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// TOML file with flag values; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub(crate) enum StrataArg {
    None,
    Distance,
    Occlusion,
    Combined,
}

impl From<StrataArg> for StrataMode {
    fn from(s: StrataArg) -> Self {
        match s {
            StrataArg::None => StrataMode::None,
            StrataArg::Distance => StrataMode::Distance,
            StrataArg::Occlusion => StrataMode::Occlusion,
            StrataArg::Combined => StrataMode::Combined,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[allow(clippy::enum_variant_names)]
pub(crate) enum InterpolationArg {
    AllPoint,
    ElevenPoint,
    FortyPoint,
}

/// Evaluation protocol flags.
#[derive(Debug, Clone, Args, Serialize)]
pub(crate) struct ProtocolArgs {
    /// IoU thresholds, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.5])]
    pub iou: Vec<f64>,
    #[arg(long, value_enum, default_value_t = StrataArg::Combined)]
    pub strata: StrataArg,
    #[arg(long, value_enum, default_value_t = InterpolationArg::AllPoint)]
    pub interpolation: InterpolationArg,
}

impl ProtocolArgs {
    pub fn config(&self) -> anyhow::Result<EvalConfig> {
        if self.iou.is_empty() || self.iou.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
            return Err(usage("--iou thresholds must lie in (0, 1]"));
        }
        Ok(EvalConfig {
            iou_thresholds: self.iou.clone(),
            interpolation: match self.interpolation {
                InterpolationArg::AllPoint => Interpolation::AllPoint,
                InterpolationArg::ElevenPoint => Interpolation::ElevenPoint,
                InterpolationArg::FortyPoint => Interpolation::FortyPoint,
            },
            ..EvalConfig::default()
        })
    }
}

pub(crate) fn parse_corruption(s: &str) -> Result<String, String> {
    s.parse::<CorruptionKind>()
        .map(|k| k.name().to_string())
        .map_err(|_| {
            let names: Vec<&str> = CorruptionKind::ALL.iter().map(|k| k.name()).collect();
            format!("unknown corruption `{s}`; valid: {}", names.join(", "))
        })
}

fn execute(cmd: &Command) -> anyhow::Result<()> {
    let common = match cmd {
        Command::Corrupt(a) => &a.common,
        Command::Eval(a) => &a.common,
        Command::Sweep(a) => &a.common,
        Command::Synth(a) => &a.common,
        Command::Plot(a) => &a.common,
    };
    eprintln!("{}", serde_json::to_string(cmd)?);
    let work = || match cmd {
        Command::Corrupt(a) => corrupt::run(a),
        Command::Eval(a) => evaluate::run(a),
        Command::Sweep(a) => sweep::run(a),
        Command::Synth(a) => synth::run(a),
        Command::Plot(a) => plot::run(a),
    };
    match common.threads {
        Some(0) => Err(usage("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()?
            .install(work),
        None => work(),
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let argv = match config::inject(argv) {
        Ok(a) => a,
        Err(e) => return report_error(&e),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => report_error(&e),
    }
}

fn report_error(e: &anyhow::Error) -> i32 {
    eprintln!("error: {e:#}");
    if e.is::<UsageError>() {
        2
    } else {
        1
    }
}
