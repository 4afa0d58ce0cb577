use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use pdbench_core::eval::{EvalConfig, EvalReport, StrataMode, StratumResult};
use pdbench_core::synth::{clean_ground_truth, evaluate_cell, full_grid, run_degradation_experiment, PseudoDetectorParams};
use pdbench_core::{CorruptionKind, CorruptionSpec, Dataset, FrameSample, SeedPolicy};
use pdbench_io::{write_dataset, AdapterConfig, JrdbAdapter};
use rayon::prelude::*;
use serde::Serialize;

use crate::corrupt::corrupt_dataset;
use crate::evaluate::{emit_report, FormatArg};
use crate::{usage, Common, ProtocolArgs};

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub(crate) enum DetectorArg {
    /// Point-count threshold detector on the ground-truth boxes.
    Pseudo,
}

#[derive(Debug, Clone, Args, Serialize)]
pub(crate) struct SweepArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "val")]
    pub split: String,
    #[arg(long, value_enum, default_value_t = DetectorArg::Pseudo)]
    pub detector: DetectorArg,
    /// `all`, `lidar`, `camera`, `misalign`, or a comma-separated list of
    /// corruption names.
    #[arg(long, default_value = "all", value_parser = parse_grid)]
    pub grid: Grid,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Keep corrupted datasets in memory instead of writing them to disk.
    #[arg(long)]
    pub in_memory: bool,
    /// Where corrupted datasets are written; a temporary directory when
    /// absent. Kept after the run when given.
    #[arg(long)]
    pub work_dir: Option<PathBuf>,
    /// Detector: minimum in-box points.
    #[arg(long, default_value_t = 15)]
    pub min_points: usize,
    /// Detector: center jitter standard deviation in meters.
    #[arg(long, default_value_t = 0.05)]
    pub jitter: f64,
    /// Detector: probability of missing a detectable person.
    #[arg(long, default_value_t = 0.0)]
    pub miss_prob: f64,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Serialize)]
#[serde(transparent)]
pub(crate) struct Grid(Vec<String>);

fn parse_grid(s: &str) -> Result<Grid, String> {
    let kinds: Vec<CorruptionKind> = match s {
        "all" => CorruptionKind::ALL.to_vec(),
        "lidar" => CorruptionKind::LIDAR.to_vec(),
        "camera" => CorruptionKind::CAMERA.to_vec(),
        "misalign" => CorruptionKind::CROSS_SENSOR.to_vec(),
        "" | "none" => vec![],
        list => list
            .split(',')
            .map(|n| crate::parse_corruption(n.trim()).map(|k| k.parse().unwrap()))
            .collect::<Result<_, _>>()?,
    };
    Ok(Grid(kinds.iter().map(|k| k.name().to_string()).collect()))
}

impl SweepArgs {
    fn kinds(&self) -> Vec<CorruptionKind> {
        let mut kinds: Vec<CorruptionKind> = self.grid.0.iter().map(|n| n.parse().unwrap()).collect();
        kinds.sort_by_key(|k| k.code());
        kinds.dedup();
        kinds
    }

    fn detector(&self) -> anyhow::Result<PseudoDetectorParams> {
        if self.min_points == 0 {
            return Err(usage("--min-points must be at least 1"));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(usage("--jitter must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.miss_prob) {
            return Err(usage("--miss-prob must lie in [0, 1]"));
        }
        Ok(PseudoDetectorParams {
            min_points: self.min_points,
            jitter_sigma: self.jitter,
            miss_prob: self.miss_prob,
            ..PseudoDetectorParams::default()
        })
    }
}

fn cell_dir(work: &Path, spec: &CorruptionSpec) -> PathBuf {
    work.join(format!("{}_s{}", spec.kind.name(), spec.severity.level()))
}

/// Writes each corrupted copy to disk and evaluates the copy read back.
#[allow(clippy::too_many_arguments)]
fn materialized(
    dataset: &Dataset,
    split: &str,
    layout: &AdapterConfig,
    grid: &[CorruptionSpec],
    work: &Path,
    det: &PseudoDetectorParams,
    cfg: &EvalConfig,
    mode: StrataMode,
    policy: SeedPolicy,
) -> anyhow::Result<EvalReport> {
    let clean: Vec<FrameSample> = dataset.frames().cloned().collect();
    let gts = clean_ground_truth(&clean, cfg);
    let baseline = evaluate_cell(&gts, &clean, det, cfg, mode, policy);
    let cells = grid
        .par_iter()
        .map(|spec| -> anyhow::Result<Vec<StratumResult>> {
            let dir = cell_dir(work, spec);
            write_dataset(&dir, split, &corrupt_dataset(dataset, spec, policy)?, layout)?;
            let mut by_id: HashMap<String, FrameSample> = JrdbAdapter::with_config(&dir, split, layout.clone())?
                .frames()
                .map(|f| f.map(|f| (f.frame_id.clone(), f)))
                .collect::<Result<_, _>>()?;
            let frames = clean
                .iter()
                .map(|c| {
                    by_id
                        .remove(&c.frame_id)
                        .ok_or_else(|| anyhow::anyhow!("frame `{}` missing from {}", c.frame_id, dir.display()))
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            Ok(evaluate_cell(&gts, &frames, det, cfg, mode, policy))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut report = EvalReport::new(cfg.iou_thresholds.clone());
    report.push_cell(None, None, &baseline);
    for (spec, rows) in grid.iter().zip(&cells) {
        report.push_cell(Some(spec.kind), Some(spec.severity), rows);
    }
    report.sort_rows();
    Ok(report)
}

pub(crate) fn run(a: &SweepArgs) -> anyhow::Result<()> {
    let cfg = a.protocol.config()?;
    let det = a.detector()?;
    let grid = full_grid(&a.kinds());
    let policy = SeedPolicy::new(a.common.seed);
    let mode: StrataMode = a.protocol.strata.into();
    let adapter = JrdbAdapter::open(&a.input, &a.split)?;
    let dataset = adapter.load_dataset()?;
    log::info!("sweeping {} cells over {} frames", grid.len(), dataset.frame_count());
    let layout = crate::corrupt::corrupted_layout(adapter.config());
    let report = if a.in_memory {
        run_degradation_experiment(&dataset, &grid, &det, &cfg, mode, policy)?
    } else if let Some(work) = &a.work_dir {
        materialized(&dataset, &a.split, &layout, &grid, work, &det, &cfg, mode, policy)?
    } else {
        let tmp = tempfile::Builder::new().prefix("pdbench-sweep").tempdir()?;
        materialized(&dataset, &a.split, &layout, &grid, tmp.path(), &det, &cfg, mode, policy)?
    };
    emit_report(&report, a.out.as_ref(), a.format)
}
