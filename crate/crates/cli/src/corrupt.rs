use std::path::PathBuf;

use clap::Args;
use pdbench_core::corrupt::{corrupt_sequence, CorruptionError};
use pdbench_core::{CorruptionKind, CorruptionSpec, Dataset, SeedPolicy, Sequence, Severity};
use pdbench_io::{write_dataset, AdapterConfig, JrdbAdapter};
use rayon::prelude::*;
use serde::Serialize;

use crate::{parse_corruption, usage, Common};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Args, Serialize)]
pub(crate) struct CorruptArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_parser = parse_corruption)]
    pub corruption: String,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub severity: u8,
    #[arg(long, default_value = "val")]
    pub split: String,
    /// Parameter override `name=value`; repeatable.
    #[arg(long = "override", value_parser = parse_override)]
    pub overrides: Vec<(String, f64)>,
    #[command(flatten)]
    pub common: Common,
}

fn parse_override(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or("expected name=value")?;
    let v: f64 = v.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
    Ok((k.trim().to_string(), v))
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    corruption: &'a str,
    severity: u8,
    seed: u64,
    split: &'a str,
    overrides: &'a [(String, f64)],
    frames: usize,
}

pub(crate) fn spec_of(a: &CorruptArgs) -> CorruptionSpec {
    let kind: CorruptionKind = a.corruption.parse().expect("validated by clap");
    let severity = Severity::from_level(a.severity).expect("validated by clap");
    a.overrides
        .iter()
        .fold(CorruptionSpec::new(kind, severity), |s, (k, v)| s.with_override(k.clone(), *v))
}

/// Corrupts every sequence; parameter errors are usage errors.
pub(crate) fn corrupt_dataset(
    dataset: &Dataset,
    spec: &CorruptionSpec,
    policy: SeedPolicy,
) -> anyhow::Result<Dataset> {
    let sequences = dataset
        .sequences
        .par_iter()
        .map(|seq| {
            Ok(Sequence {
                sequence_id: seq.sequence_id.clone(),
                frames: corrupt_sequence(&seq.frames, spec, policy)?,
            })
        })
        .collect::<Result<Vec<_>, CorruptionError>>()
        .map_err(|e| match e {
            CorruptionError::UnknownOverride { .. } | CorruptionError::InvalidOverride { .. } => usage(e.to_string()),
            other => other.into(),
        })?;
    Ok(Dataset { sequences })
}

/// Layout for a corrupted copy: same paths, no orthonormality requirement.
pub(crate) fn corrupted_layout(input: &AdapterConfig) -> AdapterConfig {
    AdapterConfig {
        require_orthonormal_calibration: false,
        ..input.clone()
    }
}

pub(crate) fn run(a: &CorruptArgs) -> anyhow::Result<()> {
    let spec = spec_of(a);
    pdbench_core::corrupt::resolve(&spec).map_err(|e| usage(e.to_string()))?;
    let adapter = JrdbAdapter::open(&a.input, &a.split)?;
    let dataset = adapter.load_dataset()?;
    let out = corrupt_dataset(&dataset, &spec, SeedPolicy::new(a.common.seed))?;
    write_dataset(&a.output, &a.split, &out, &corrupted_layout(adapter.config()))?;
    let manifest = Manifest {
        tool: "pdbench",
        version: env!("CARGO_PKG_VERSION"),
        corruption: &a.corruption,
        severity: a.severity,
        seed: a.common.seed,
        split: &a.split,
        overrides: &a.overrides,
        frames: out.frame_count(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(a.output.join(MANIFEST_FILE), text)?;
    log::info!("wrote {} corrupted frames to {}", out.frame_count(), a.output.display());
    Ok(())
}
