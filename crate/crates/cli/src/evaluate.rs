use std::io::Write;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use pdbench_core::eval::{stratify, EvalReport};
use pdbench_io::report::{report_to_csv, report_to_json};
use pdbench_io::{read_detections, write_report, JrdbAdapter, ReportFormat};
use serde::Serialize;

use crate::{Common, ProtocolArgs};

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub(crate) enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args, Serialize)]
pub(crate) struct EvalArgs {
    /// Dataset root holding ground truth and clouds.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, default_value = "val")]
    pub split: String,
    /// Detections, one JSON object per line.
    #[arg(long)]
    pub detections: PathBuf,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report format; defaults to the `--out` extension, else CSV.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    #[command(flatten)]
    pub common: Common,
}

pub(crate) fn emit_report(report: &EvalReport, out: Option<&PathBuf>, format: Option<FormatArg>) -> anyhow::Result<()> {
    let format = match (format, out) {
        (Some(FormatArg::Csv), _) => ReportFormat::Csv,
        (Some(FormatArg::Json), _) => ReportFormat::Json,
        (None, Some(p)) => ReportFormat::from_path(p),
        (None, None) => ReportFormat::Csv,
    };
    match out {
        Some(p) => write_report(report, p, format)?,
        None => {
            let text = match format {
                ReportFormat::Csv => report_to_csv(report),
                ReportFormat::Json => report_to_json(report),
            };
            std::io::stdout().lock().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

pub(crate) fn run(a: &EvalArgs) -> anyhow::Result<()> {
    let cfg = a.protocol.config()?;
    let frames: Vec<_> = JrdbAdapter::open(&a.gt, &a.split)?
        .frames()
        .collect::<Result<_, _>>()?;
    let dets = read_detections(&a.detections)?;
    let rows = stratify(&frames, &dets, &cfg, a.protocol.strata.into());
    let mut report = EvalReport::new(cfg.iou_thresholds.clone());
    report.push_cell(None, None, &rows);
    emit_report(&report, a.out.as_ref(), a.format)
}
