//! SVG charts: AP versus severity per corruption, and AP per stratum.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use pdbench_core::eval::{EvalReport, ReportRow, Stratum};
use pdbench_io::read_report;
use pdbench_io::report::ap_column;
use serde::Serialize;

use crate::Common;

#[derive(Debug, Clone, Args, Serialize)]
pub(crate) struct PlotArgs {
    /// Report in CSV or JSON.
    #[arg(long)]
    pub report: PathBuf,
    /// Output directory for the SVG files.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 90.0;
const PALETTE: [&str; 11] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf", "#393b79",
];

fn plot_w() -> f64 {
    W - LEFT - RIGHT
}

fn plot_h() -> f64 {
    H - TOP - BOTTOM
}

fn y_of(ap: f64) -> f64 {
    TOP + (1.0 - ap.clamp(0.0, 100.0) / 100.0) * plot_h()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn frame(svg: &mut String, title: &str) {
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<text x="{LEFT}" y="18" font-size="13">{}</text>"#, escape(title));
    let (x1, y1) = (LEFT + plot_w(), TOP + plot_h());
    let _ = writeln!(svg, r#"<line class="axis" x1="{LEFT}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>"#);
    let _ = writeln!(svg, r#"<line class="axis" x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{y1}" stroke="black"/>"#);
    for tick in [0.0, 25.0, 50.0, 75.0, 100.0] {
        let y = y_of(tick);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y}" x2="{x1}" y2="{y}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{tick}</text>"##,
            LEFT - 6.0,
            y + 4.0
        );
    }
}

fn all_rows(report: &EvalReport) -> impl Iterator<Item = &ReportRow> {
    report.rows.iter().filter(|r| r.stratum == Stratum::All)
}

/// One circle (`class="point"`) per `all`-stratum row, lines per corruption
/// through the baseline.
pub fn render_severity_svg(report: &EvalReport, metric: usize) -> String {
    let mut svg = String::new();
    let name = ap_column(report.iou_thresholds[metric]);
    frame(&mut svg, &format!("{name} vs severity"));
    let x_of = |level: u8| LEFT + level as f64 / 3.0 * plot_w();
    for level in 0..=3u8 {
        let label = if level == 0 { "None".to_string() } else { level.to_string() };
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{label}</text>"#,
            x_of(level),
            TOP + plot_h() + 16.0
        );
    }
    let baseline = all_rows(report).find(|r| r.corruption.is_none());
    let mut kinds: Vec<_> = all_rows(report).filter_map(|r| r.corruption).collect();
    kinds.sort_by_key(|k| k.code());
    kinds.dedup();
    for (i, kind) in kinds.iter().enumerate() {
        let color = PALETTE[kind.code() as usize % PALETTE.len()];
        let mut pts: Vec<(f64, f64)> = baseline
            .iter()
            .map(|b| (x_of(0), y_of(b.ap_percent[metric])))
            .collect();
        let mut rows: Vec<&ReportRow> = all_rows(report).filter(|r| r.corruption == Some(*kind)).collect();
        rows.sort_by_key(|r| r.severity);
        pts.extend(
            rows.iter()
                .map(|r| (x_of(r.severity.map_or(0, |s| s.level())), y_of(r.ap_percent[metric]))),
        );
        let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="series" points="{}" fill="none" stroke="{color}"/>"#,
            path.join(" ")
        );
        for r in rows {
            let _ = writeln!(
                svg,
                r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="3" fill="{color}"><title>{} {} {}</title></circle>"#,
                x_of(r.severity.map_or(0, |s| s.level())),
                y_of(r.ap_percent[metric]),
                kind.name(),
                r.severity.map_or(0, |s| s.level()),
                r.ap_percent[metric]
            );
        }
        let ly = TOP + 14.0 * i as f64;
        let lx = LEFT + plot_w() + 12.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{lx}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
            ly,
            lx + 14.0,
            ly + 9.0,
            kind.name()
        );
    }
    if let Some(b) = baseline {
        let _ = writeln!(
            svg,
            r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="4" fill="black"><title>None {}</title></circle>"#,
            x_of(0),
            y_of(b.ap_percent[metric]),
            b.ap_percent[metric]
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// One bar (`class="bar"`) per stratum of the baseline, or of the first
/// cell when the report has no baseline.
pub fn render_strata_svg(report: &EvalReport, metric: usize) -> String {
    let mut svg = String::new();
    let name = ap_column(report.iou_thresholds[metric]);
    frame(&mut svg, &format!("{name} by stratum"));
    let key = report
        .rows
        .iter()
        .find(|r| r.corruption.is_none())
        .or(report.rows.first())
        .map(|r| (r.corruption, r.severity));
    let rows: Vec<&ReportRow> = report
        .rows
        .iter()
        .filter(|r| Some((r.corruption, r.severity)) == key)
        .collect();
    let slot = plot_w() / rows.len().max(1) as f64;
    for (i, r) in rows.iter().enumerate() {
        let ap = r.ap_percent[metric];
        let x = LEFT + slot * i as f64 + slot * 0.15;
        let y = y_of(ap);
        let _ = writeln!(
            svg,
            r##"<rect class="bar" x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#4c72b0"><title>{} {ap}</title></rect>"##,
            slot * 0.7,
            TOP + plot_h() - y,
            escape(&r.stratum.to_string())
        );
        let tx = x + slot * 0.35;
        let ty = TOP + plot_h() + 12.0;
        let _ = writeln!(
            svg,
            r#"<text x="{tx:.2}" y="{ty:.2}" transform="rotate(40 {tx:.2} {ty:.2})">{}</text>"#,
            escape(&r.stratum.to_string())
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub(crate) fn run(a: &PlotArgs) -> anyhow::Result<()> {
    let report = read_report(&a.report)?;
    if report.rows.is_empty() {
        anyhow::bail!("{} has no rows to plot", a.report.display());
    }
    std::fs::create_dir_all(&a.out)?;
    for (m, t) in report.iou_thresholds.iter().enumerate() {
        let col = ap_column(*t);
        for (suffix, svg) in [
            ("severity", render_severity_svg(&report, m)),
            ("strata", render_strata_svg(&report, m)),
        ] {
            let path = a.out.join(format!("{col}_{suffix}.svg"));
            std::fs::write(&path, svg)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}
