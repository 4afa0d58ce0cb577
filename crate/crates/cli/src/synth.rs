use std::path::PathBuf;

use clap::Args;
use pdbench_core::synth::{generate_dataset, SceneParams};
use pdbench_io::{write_dataset, AdapterConfig};
use serde::Serialize;

use crate::{usage, Common};

#[derive(Debug, Clone, Args, Serialize)]
pub(crate) struct SynthArgs {
    /// Frames per sequence.
    #[arg(long, default_value_t = 20)]
    pub frames: usize,
    #[arg(long, default_value_t = 1)]
    pub sequences: usize,
    /// Persons per scene, `a..b` (inclusive) or a single count.
    #[arg(long, default_value = "5..15", value_parser = parse_range)]
    pub persons: (usize, usize),
    /// Occluder walls per scene, `a..b` or a single count.
    #[arg(long, default_value = "1..3", value_parser = parse_range)]
    pub occluders: (usize, usize),
    /// Background points per frame.
    #[arg(long, default_value_t = 2000)]
    pub clutter: usize,
    /// Upper bound of person speed, m/s.
    #[arg(long, default_value_t = 1.5)]
    pub max_speed: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "val")]
    pub split: String,
    #[command(flatten)]
    pub common: Common,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let bad = || format!("expected `a..b` or a count, got `{s}`");
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
        None => {
            let n = s.trim().parse().map_err(|_| bad())?;
            (n, n)
        }
    };
    if a > b {
        return Err(format!("empty range `{s}`"));
    }
    Ok((a, b))
}

pub(crate) fn run(a: &SynthArgs) -> anyhow::Result<()> {
    if a.frames == 0 || a.sequences == 0 {
        return Err(usage("--frames and --sequences must be at least 1"));
    }
    let params = SceneParams {
        person_count: a.persons,
        occluder_count: a.occluders,
        clutter_points: a.clutter,
        max_speed_mps: a.max_speed,
        ..SceneParams::default()
    };
    params.validate().map_err(|e| usage(e.to_string()))?;
    let ds = generate_dataset(&params, a.sequences, a.frames, a.common.seed)?;
    write_dataset(&a.out, &a.split, &ds, &AdapterConfig::default())?;
    log::info!("wrote {} synthetic frames to {}", ds.frame_count(), a.out.display());
    Ok(())
}
