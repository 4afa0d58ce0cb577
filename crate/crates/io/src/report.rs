//! Robustness tables as CSV or JSON.
//!
//! CSV columns are `corruption, level, stratum, ap_iou_<t>..., n_gt, n_tp,
//! n_fp`. The baseline row uses corruption `None` and level `-`. AP values
//! are percentages printed in shortest round-trip form, so reading a file
//! back reproduces every number exactly.

use std::path::Path;

use pdbench_core::eval::{EvalReport, ReportRow, Stratum};
use pdbench_core::{CorruptionKind, Severity};
use serde::{Deserialize, Serialize};

use crate::error::{IoError, Result};

pub const BASELINE_NAME: &str = "None";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    /// `.json` selects JSON; anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

pub fn ap_column(threshold: f64) -> String {
    format!("ap_iou_{threshold}")
}

fn corruption_name(c: Option<CorruptionKind>) -> &'static str {
    c.map_or(BASELINE_NAME, |k| k.name())
}

fn level_name(s: Option<Severity>) -> String {
    s.map_or_else(|| "-".to_string(), |s| s.level().to_string())
}

pub fn report_to_csv(report: &EvalReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["corruption".to_string(), "level".into(), "stratum".into()];
    header.extend(report.iou_thresholds.iter().map(|t| ap_column(*t)));
    header.extend(["n_gt".into(), "n_tp".into(), "n_fp".into()]);
    w.write_record(&header).expect("in-memory write");
    for r in &report.rows {
        let mut rec = vec![
            corruption_name(r.corruption).to_string(),
            level_name(r.severity),
            r.stratum.to_string(),
        ];
        rec.extend(r.ap_percent.iter().map(|a| a.to_string()));
        rec.extend([r.n_gt.to_string(), r.n_tp.to_string(), r.n_fp.to_string()]);
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

#[derive(Serialize, Deserialize)]
struct JsonRow {
    corruption: String,
    level: String,
    stratum: String,
    ap_percent: Vec<f64>,
    n_gt: usize,
    n_tp: usize,
    n_fp: usize,
}

#[derive(Serialize, Deserialize)]
struct JsonReport {
    iou_thresholds: Vec<f64>,
    rows: Vec<JsonRow>,
}

pub fn report_to_json(report: &EvalReport) -> String {
    let doc = JsonReport {
        iou_thresholds: report.iou_thresholds.clone(),
        rows: report
            .rows
            .iter()
            .map(|r| JsonRow {
                corruption: corruption_name(r.corruption).into(),
                level: level_name(r.severity),
                stratum: r.stratum.to_string(),
                ap_percent: r.ap_percent.clone(),
                n_gt: r.n_gt,
                n_tp: r.n_tp,
                n_fp: r.n_fp,
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

pub fn write_report(report: &EvalReport, path: &Path, format: ReportFormat) -> Result<()> {
    let text = match format {
        ReportFormat::Csv => report_to_csv(report),
        ReportFormat::Json => report_to_json(report),
    };
    crate::write_file(path, text.as_bytes())
}

fn parse_row_keys(
    corruption: &str,
    level: &str,
    stratum: &str,
) -> std::result::Result<(Option<CorruptionKind>, Option<Severity>, Stratum), String> {
    let corruption = if corruption == BASELINE_NAME {
        None
    } else {
        Some(corruption.parse::<CorruptionKind>().map_err(|e| e.to_string())?)
    };
    let severity = if level == "-" {
        None
    } else {
        let n: u8 = level.parse().map_err(|_| format!("bad level `{level}`"))?;
        Some(Severity::from_level(n).ok_or_else(|| format!("bad level `{level}`"))?)
    };
    let stratum = stratum.parse::<Stratum>().map_err(|e| e.to_string())?;
    Ok((corruption, severity, stratum))
}

pub fn parse_report_csv(path: &Path, text: &str) -> Result<EvalReport> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r
        .headers()
        .map_err(|e| IoError::parse(path, 1, e.to_string()))?
        .clone();
    let cols: Vec<&str> = header.iter().collect();
    let n = cols.len();
    if n < 6 || cols[..3] != ["corruption", "level", "stratum"] || cols[n - 3..] != ["n_gt", "n_tp", "n_fp"] {
        return Err(IoError::parse(path, 1, "unexpected report header"));
    }
    let thresholds = cols[3..n - 3]
        .iter()
        .map(|c| {
            c.strip_prefix("ap_iou_")
                .and_then(|t| t.parse::<f64>().ok())
                .ok_or_else(|| IoError::parse(path, 1, format!("bad column `{c}`")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut report = EvalReport::new(thresholds);
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| IoError::parse(path, line, e.to_string()))?;
        if rec.len() != n {
            return Err(IoError::parse(path, line, format!("expected {n} fields, found {}", rec.len())));
        }
        let (corruption, severity, stratum) =
            parse_row_keys(&rec[0], &rec[1], &rec[2]).map_err(|e| IoError::parse(path, line, e))?;
        let num = |j: usize| -> Result<f64> {
            rec[j]
                .parse::<f64>()
                .map_err(|_| IoError::parse(path, line, format!("bad number `{}`", &rec[j])))
        };
        let count = |j: usize| -> Result<usize> {
            rec[j]
                .parse::<usize>()
                .map_err(|_| IoError::parse(path, line, format!("bad count `{}`", &rec[j])))
        };
        report.rows.push(ReportRow {
            corruption,
            severity,
            stratum,
            ap_percent: (3..n - 3).map(num).collect::<Result<_>>()?,
            n_gt: count(n - 3)?,
            n_tp: count(n - 2)?,
            n_fp: count(n - 1)?,
        });
    }
    Ok(report)
}

pub fn parse_report_json(path: &Path, text: &str) -> Result<EvalReport> {
    let doc: JsonReport = serde_json::from_str(text).map_err(|e| IoError::parse(path, e.line(), e.to_string()))?;
    let mut report = EvalReport::new(doc.iou_thresholds);
    for (i, r) in doc.rows.into_iter().enumerate() {
        let (corruption, severity, stratum) = parse_row_keys(&r.corruption, &r.level, &r.stratum)
            .map_err(|e| IoError::format(path, format!("row {i}: {e}")))?;
        report.rows.push(ReportRow {
            corruption,
            severity,
            stratum,
            ap_percent: r.ap_percent,
            n_gt: r.n_gt,
            n_tp: r.n_tp,
            n_fp: r.n_fp,
        });
    }
    Ok(report)
}

pub fn read_report(path: &Path) -> Result<EvalReport> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    match ReportFormat::from_path(path) {
        ReportFormat::Csv => parse_report_csv(path, &text),
        ReportFormat::Json => parse_report_json(path, &text),
    }
}
