//! Average-precision evaluation with distance and occlusion stratification.
//!
//! Protocol summary:
//!
//! * A ground truth is *eligible* when its box holds at least `min_points`
//!   cloud points and its center lies within `max_range_m` horizontally.
//!   Everything else is *ignored*: detections that land on it count neither
//!   as TP nor FP.
//! * Matching is greedy per frame: detections in descending score order take
//!   the unmatched eligible ground truth with the highest 3D IoU at or above
//!   the threshold.
//! * AP is the exact area under the interpolated precision/recall step curve
//!   (all-point), with 11- and 40-point sampling available. Tied scores form
//!   a single operating point.
//! * Stratified rows restrict the eligible set to one distance and/or
//!   occlusion bin. TPs on out-of-stratum ground truth are ignored for that
//!   stratum. A false positive is attributed to the distance bin of its own
//!   box and to the occlusion bin of the best-overlapping eligible ground
//!   truth if that IoU reaches `fp_occlusion_iou_factor × threshold`;
//!   otherwise it is left out of occlusion rows.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::geom::{iou_3d, points_in_box};
use crate::model::{
    Box3D, CorruptionKind, Detection, FrameSample, GroundTruth, Occlusion, Severity,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// Exact area under the interpolated step curve.
    AllPoint,
    /// Mean interpolated precision at recall 0, 0.1, ..., 1.
    ElevenPoint,
    /// Mean interpolated precision at recall 1/40, 2/40, ..., 1.
    FortyPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DistanceBin {
    Near,
    Mid,
    Far,
    OutOfRange,
}

impl DistanceBin {
    pub const EVALUATED: [DistanceBin; 3] = [DistanceBin::Near, DistanceBin::Mid, DistanceBin::Far];

    pub fn name(self) -> &'static str {
        match self {
            DistanceBin::Near => "near",
            DistanceBin::Mid => "mid",
            DistanceBin::Far => "far",
            DistanceBin::OutOfRange => "out_of_range",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OcclusionBin {
    None,
    Partial,
    Heavy,
}

impl OcclusionBin {
    pub const ALL: [OcclusionBin; 3] = [OcclusionBin::None, OcclusionBin::Partial, OcclusionBin::Heavy];

    pub fn name(self) -> &'static str {
        match self {
            OcclusionBin::None => "no_occlusion",
            OcclusionBin::Partial => "partial_occlusion",
            OcclusionBin::Heavy => "heavy_occlusion",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub iou_thresholds: Vec<f64>,
    /// A ground truth needs at least this many in-box points.
    pub min_points: usize,
    pub max_range_m: f64,
    /// Upper (exclusive) edges of the near and mid bins; far runs to
    /// `max_range_m` inclusive.
    pub near_max_m: f64,
    pub mid_max_m: f64,
    /// Indexed by [`Occlusion::index`].
    pub occlusion_map: [OcclusionBin; 4],
    pub interpolation: Interpolation,
    pub fp_occlusion_iou_factor: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_thresholds: vec![0.3, 0.5],
            min_points: 11,
            max_range_m: 25.0,
            near_max_m: 3.0,
            mid_max_m: 7.0,
            occlusion_map: [
                OcclusionBin::None,
                OcclusionBin::Partial,
                OcclusionBin::Heavy,
                OcclusionBin::Heavy,
            ],
            interpolation: Interpolation::AllPoint,
            fp_occlusion_iou_factor: 0.5,
        }
    }
}

impl EvalConfig {
    pub fn distance_bin(&self, b: &Box3D) -> DistanceBin {
        let d = b.ground_range();
        if d < self.near_max_m {
            DistanceBin::Near
        } else if d < self.mid_max_m {
            DistanceBin::Mid
        } else if d <= self.max_range_m {
            DistanceBin::Far
        } else {
            DistanceBin::OutOfRange
        }
    }

    pub fn occlusion_bin(&self, occlusion: Occlusion) -> OcclusionBin {
        self.occlusion_map[occlusion.index()]
    }
}

pub fn distance_bin(b: &Box3D, cfg: &EvalConfig) -> DistanceBin {
    cfg.distance_bin(b)
}

pub fn occlusion_bin(gt: &GroundTruth, cfg: &EvalConfig) -> OcclusionBin {
    cfg.occlusion_bin(gt.occlusion)
}

/// Subset of ground truth used for evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stratum {
    All,
    Distance(DistanceBin),
    Occlusion(OcclusionBin),
    Combined(DistanceBin, OcclusionBin),
}

impl Stratum {
    pub fn contains(&self, d: DistanceBin, o: OcclusionBin) -> bool {
        match *self {
            Stratum::All => true,
            Stratum::Distance(sd) => sd == d,
            Stratum::Occlusion(so) => so == o,
            Stratum::Combined(sd, so) => sd == d && so == o,
        }
    }
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stratum::All => f.write_str("all"),
            Stratum::Distance(d) => f.write_str(d.name()),
            Stratum::Occlusion(o) => f.write_str(o.name()),
            Stratum::Combined(d, o) => write!(f, "{}+{}", d.name(), o.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown stratum `{0}`")]
pub struct UnknownStratum(pub String);

impl FromStr for Stratum {
    type Err = UnknownStratum;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrataMode::Combined
            .strata()
            .into_iter()
            .find(|st| st.to_string() == s)
            .ok_or_else(|| UnknownStratum(s.to_string()))
    }
}

/// Which strata a report contains. Every mode includes [`Stratum::All`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrataMode {
    None,
    Distance,
    Occlusion,
    Combined,
}

impl StrataMode {
    pub fn strata(self) -> Vec<Stratum> {
        let dist = DistanceBin::EVALUATED.map(Stratum::Distance);
        let occ = OcclusionBin::ALL.map(Stratum::Occlusion);
        let mut out = vec![Stratum::All];
        match self {
            StrataMode::None => {}
            StrataMode::Distance => out.extend(dist),
            StrataMode::Occlusion => out.extend(occ),
            StrataMode::Combined => {
                out.extend(dist);
                out.extend(occ);
                for d in DistanceBin::EVALUATED {
                    for o in OcclusionBin::ALL {
                        out.push(Stratum::Combined(d, o));
                    }
                }
            }
        }
        out
    }
}

/// Eligible and ignored ground truth of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameGt {
    pub frame_id: String,
    pub eligible: Vec<GroundTruth>,
    pub ignored: Vec<GroundTruth>,
}

/// Splits the frame's ground truth by point count and range. Occlusion does
/// not affect eligibility.
pub fn filter_ground_truth(frame: &FrameSample, cfg: &EvalConfig) -> FrameGt {
    let (eligible, ignored) = frame.ground_truth.iter().cloned().partition(|gt| {
        gt.bbox.ground_range() <= cfg.max_range_m
            && points_in_box(&frame.cloud, &gt.bbox) >= cfg.min_points
    });
    FrameGt {
        frame_id: frame.frame_id.clone(),
        eligible,
        ignored,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetOutcome {
    /// Matched the eligible ground truth with this index.
    Tp(usize),
    Fp,
    Ignored,
}

/// Per-frame matching result, aligned with the input detection order.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub outcomes: Vec<DetOutcome>,
    pub scores: Vec<f64>,
    /// For each eligible ground truth, the detection that matched it.
    pub gt_matched: Vec<Option<usize>>,
}

impl MatchResult {
    pub fn n_eligible(&self) -> usize {
        self.gt_matched.len()
    }

    pub fn tp_count(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| matches!(o, DetOutcome::Tp(_)))
            .count()
    }

    pub fn fp_count(&self) -> usize {
        self.outcomes.iter().filter(|o| **o == DetOutcome::Fp).count()
    }
}

/// Detection indices by descending score; equal scores keep input order.
fn score_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score));
    order
}

pub fn match_detections(
    dets: &[Detection],
    eligible: &[GroundTruth],
    ignored: &[GroundTruth],
    iou_threshold: f64,
) -> MatchResult {
    let mut outcomes = vec![DetOutcome::Fp; dets.len()];
    let mut gt_matched = vec![None; eligible.len()];
    for di in score_order(dets) {
        let det = &dets[di].bbox;
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in eligible.iter().enumerate() {
            if gt_matched[gi].is_some() {
                continue;
            }
            let iou = iou_3d(det, &gt.bbox);
            if iou >= iou_threshold && best.is_none_or(|(_, b)| iou > b) {
                best = Some((gi, iou));
            }
        }
        outcomes[di] = if let Some((gi, _)) = best {
            gt_matched[gi] = Some(di);
            DetOutcome::Tp(gi)
        } else if ignored
            .iter()
            .any(|gt| iou_3d(det, &gt.bbox) >= iou_threshold)
        {
            DetOutcome::Ignored
        } else {
            DetOutcome::Fp
        };
    }
    MatchResult {
        outcomes,
        scores: dets.iter().map(|d| d.score).collect(),
        gt_matched,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub score: f64,
    pub recall: f64,
    pub precision: f64,
    /// True positives and detections at or above `score`.
    pub tp: usize,
    pub detections: usize,
}

/// Operating points of a detector, one per distinct score, by descending
/// score (so recall is non-decreasing).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub n_gt: usize,
}

impl PrCurve {
    /// `scored` holds `(score, is_tp)` for every counted detection.
    pub fn from_scored(scored: &[(f64, bool)], n_gt: usize) -> Self {
        let mut sorted = scored.to_vec();
        sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut points = Vec::new();
        let (mut tp, mut fp) = (0usize, 0usize);
        let mut i = 0;
        while i < sorted.len() {
            let score = sorted[i].0;
            while i < sorted.len() && sorted[i].0.total_cmp(&score) == Ordering::Equal {
                if sorted[i].1 {
                    tp += 1;
                } else {
                    fp += 1;
                }
                i += 1;
            }
            points.push(PrPoint {
                score,
                recall: if n_gt == 0 { 0.0 } else { tp as f64 / n_gt as f64 },
                precision: tp as f64 / (tp + fp) as f64,
                tp,
                detections: tp + fp,
            });
        }
        Self { points, n_gt }
    }

    /// Interpolated precision: the best precision at recall `>= r`.
    pub fn interpolated_precision(&self, r: f64) -> f64 {
        self.points
            .iter()
            .filter(|p| p.recall >= r)
            .map(|p| p.precision)
            .fold(0.0, f64::max)
    }

    pub fn average_precision(&self, interpolation: Interpolation) -> f64 {
        match interpolation {
            Interpolation::AllPoint => {
                if self.n_gt == 0 {
                    return 0.0;
                }
                // Right-to-left precision envelope, kept as the point it came from.
                let mut envelope = vec![0; self.points.len()];
                let mut best: Option<usize> = None;
                for i in (0..self.points.len()).rev() {
                    if best.is_none_or(|b| self.points[i].precision > self.points[b].precision) {
                        best = Some(i);
                    }
                    envelope[i] = best.unwrap();
                }
                // Each step is the rational dtp * tp_env / (n_env * n_gt);
                // summing the quotients and their remainders rounds the area once.
                let mut sum = ExactSum::default();
                let mut prev_tp = 0;
                for (p, &e) in self.points.iter().zip(&envelope) {
                    let env = &self.points[e];
                    let num = ((p.tp - prev_tp) * env.tp) as f64;
                    let den = (env.detections * self.n_gt) as f64;
                    sum.add_ratio(num, den);
                    prev_tp = p.tp;
                }
                sum.value()
            }
            Interpolation::ElevenPoint => {
                (0..=10)
                    .map(|k| self.interpolated_precision(k as f64 / 10.0))
                    .sum::<f64>()
                    / 11.0
            }
            Interpolation::FortyPoint => {
                (1..=40)
                    .map(|k| self.interpolated_precision(k as f64 / 40.0))
                    .sum::<f64>()
                    / 40.0
            }
        }
    }
}

/// Compensated sum of ratios of integers exactly representable as `f64`.
#[derive(Default)]
struct ExactSum {
    hi: f64,
    lo: f64,
}

impl ExactSum {
    fn add_ratio(&mut self, num: f64, den: f64) {
        if num == 0.0 {
            return;
        }
        let q = num / den;
        let rem = (-q).mul_add(den, num) / den;
        let s = self.hi + q;
        let err = if self.hi.abs() >= q.abs() {
            (self.hi - s) + q
        } else {
            (q - s) + self.hi
        };
        self.hi = s;
        self.lo += err + rem;
    }

    fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

/// AP over scored detections. Zero ground truth yields 0.
pub fn ap_from_scored(scored: &[(f64, bool)], n_gt: usize, interpolation: Interpolation) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    PrCurve::from_scored(scored, n_gt).average_precision(interpolation)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApSummary {
    /// In `[0, 1]`.
    pub ap: f64,
    pub n_gt: usize,
    pub n_tp: usize,
    pub n_fp: usize,
    /// Set when there was no eligible ground truth; `ap` is then 0.
    pub empty: bool,
}

/// Pools per-frame matches into one AP.
pub fn average_precision(results: &[MatchResult], interpolation: Interpolation) -> ApSummary {
    let mut scored = Vec::new();
    let mut n_gt = 0;
    for r in results {
        n_gt += r.n_eligible();
        for (o, &s) in r.outcomes.iter().zip(&r.scores) {
            match o {
                DetOutcome::Tp(_) => scored.push((s, true)),
                DetOutcome::Fp => scored.push((s, false)),
                DetOutcome::Ignored => {}
            }
        }
    }
    if n_gt == 0 {
        log::warn!("no eligible ground truth; AP reported as 0");
    }
    ApSummary {
        ap: ap_from_scored(&scored, n_gt, interpolation),
        n_gt,
        n_tp: scored.iter().filter(|s| s.1).count(),
        n_fp: scored.iter().filter(|s| !s.1).count(),
        empty: n_gt == 0,
    }
}

/// AP of one stratum at every configured threshold. Counts refer to the
/// first threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumResult {
    pub stratum: Stratum,
    /// Fractions in `[0, 1]`, aligned with `EvalConfig::iou_thresholds`.
    pub ap: Vec<f64>,
    pub n_gt: usize,
    pub n_tp: usize,
    pub n_fp: usize,
}

impl StratumResult {
    pub fn is_empty(&self) -> bool {
        self.n_gt == 0
    }
}

/// Per-detection stratum bookkeeping for one frame at one threshold.
struct FrameMatch {
    result: MatchResult,
    /// Distance and occlusion bin of each eligible ground truth.
    gt_bins: Vec<(DistanceBin, OcclusionBin)>,
    det_distance: Vec<DistanceBin>,
    /// Occlusion attribution of each false positive.
    fp_occlusion: Vec<Option<OcclusionBin>>,
}

fn match_frame(gt: &FrameGt, dets: &[Detection], threshold: f64, cfg: &EvalConfig) -> FrameMatch {
    let result = match_detections(dets, &gt.eligible, &gt.ignored, threshold);
    let gt_bins = gt
        .eligible
        .iter()
        .map(|g| (cfg.distance_bin(&g.bbox), cfg.occlusion_bin(g.occlusion)))
        .collect();
    let det_distance = dets.iter().map(|d| cfg.distance_bin(&d.bbox)).collect();
    let fp_occlusion = dets
        .iter()
        .zip(&result.outcomes)
        .map(|(d, o)| {
            if *o != DetOutcome::Fp {
                return None;
            }
            let mut best: Option<(f64, &GroundTruth)> = None;
            for g in &gt.eligible {
                let iou = iou_3d(&d.bbox, &g.bbox);
                if best.is_none_or(|(b, _)| iou > b) {
                    best = Some((iou, g));
                }
            }
            best.filter(|(iou, _)| *iou > 0.0 && *iou >= cfg.fp_occlusion_iou_factor * threshold)
                .map(|(_, g)| cfg.occlusion_bin(g.occlusion))
        })
        .collect();
    FrameMatch {
        result,
        gt_bins,
        det_distance,
        fp_occlusion,
    }
}

fn stratum_scored(fm: &FrameMatch, stratum: &Stratum, scored: &mut Vec<(f64, bool)>) -> usize {
    for (i, outcome) in fm.result.outcomes.iter().enumerate() {
        let score = fm.result.scores[i];
        match *outcome {
            DetOutcome::Tp(g) => {
                let (d, o) = fm.gt_bins[g];
                if stratum.contains(d, o) {
                    scored.push((score, true));
                }
            }
            DetOutcome::Fp => {
                let d = fm.det_distance[i];
                let counted = match *stratum {
                    Stratum::All => true,
                    Stratum::Distance(sd) => sd == d,
                    Stratum::Occlusion(so) => fm.fp_occlusion[i] == Some(so),
                    Stratum::Combined(sd, so) => sd == d && fm.fp_occlusion[i] == Some(so),
                };
                if counted {
                    scored.push((score, false));
                }
            }
            DetOutcome::Ignored => {}
        }
    }
    fm.gt_bins
        .iter()
        .filter(|(d, o)| stratum.contains(*d, *o))
        .count()
}

/// Evaluates detections against filtered ground truth. `dets[i]` belongs to
/// `gts[i]`.
pub fn evaluate(
    gts: &[FrameGt],
    dets: &[Vec<Detection>],
    cfg: &EvalConfig,
    mode: StrataMode,
) -> Vec<StratumResult> {
    assert_eq!(gts.len(), dets.len(), "one detection list per frame");
    let strata = mode.strata();
    let mut rows: Vec<StratumResult> = strata
        .iter()
        .map(|s| StratumResult {
            stratum: s.clone(),
            ap: Vec::with_capacity(cfg.iou_thresholds.len()),
            n_gt: 0,
            n_tp: 0,
            n_fp: 0,
        })
        .collect();
    for (ti, &threshold) in cfg.iou_thresholds.iter().enumerate() {
        let matches: Vec<FrameMatch> = gts
            .par_iter()
            .zip(dets.par_iter())
            .map(|(g, d)| match_frame(g, d, threshold, cfg))
            .collect();
        for row in rows.iter_mut() {
            let mut scored = Vec::new();
            let mut n_gt = 0;
            for fm in &matches {
                n_gt += stratum_scored(fm, &row.stratum, &mut scored);
            }
            row.ap
                .push(ap_from_scored(&scored, n_gt, cfg.interpolation));
            if ti == 0 {
                row.n_gt = n_gt;
                row.n_tp = scored.iter().filter(|s| s.1).count();
                row.n_fp = scored.len() - row.n_tp;
            }
        }
    }
    rows
}

/// Filters ground truth from `frames` and evaluates the detections keyed by
/// frame id. Frames without detections contribute only misses.
pub fn stratify(
    frames: &[FrameSample],
    dets: &BTreeMap<String, Vec<Detection>>,
    cfg: &EvalConfig,
    mode: StrataMode,
) -> Vec<StratumResult> {
    let gts: Vec<FrameGt> = frames
        .iter()
        .map(|f| filter_ground_truth(f, cfg))
        .collect();
    for id in dets.keys() {
        if !gts.iter().any(|g| &g.frame_id == id) {
            log::warn!("detections for unknown frame `{id}` are skipped");
        }
    }
    let per_frame: Vec<Vec<Detection>> = gts
        .iter()
        .map(|g| dets.get(&g.frame_id).cloned().unwrap_or_default())
        .collect();
    evaluate(&gts, &per_frame, cfg, mode)
}

/// One row of a robustness table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    /// `None` is the uncorrupted baseline.
    pub corruption: Option<CorruptionKind>,
    pub severity: Option<Severity>,
    pub stratum: Stratum,
    /// Percentages in `[0, 100]`, aligned with the report thresholds.
    pub ap_percent: Vec<f64>,
    pub n_gt: usize,
    pub n_tp: usize,
    pub n_fp: usize,
}

impl ReportRow {
    fn sort_key(&self) -> (usize, Option<Severity>, Stratum) {
        let c = self.corruption.map_or(0, |k| 1 + k.code() as usize);
        (c, self.severity, self.stratum.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub iou_thresholds: Vec<f64>,
    pub rows: Vec<ReportRow>,
}

impl EvalReport {
    pub fn new(iou_thresholds: Vec<f64>) -> Self {
        Self {
            iou_thresholds,
            rows: Vec::new(),
        }
    }

    /// Appends the stratum results of one (corruption, severity) cell.
    pub fn push_cell(
        &mut self,
        corruption: Option<CorruptionKind>,
        severity: Option<Severity>,
        results: &[StratumResult],
    ) {
        for r in results {
            self.rows.push(ReportRow {
                corruption,
                severity,
                stratum: r.stratum.clone(),
                ap_percent: r.ap.iter().map(|a| a * 100.0).collect(),
                n_gt: r.n_gt,
                n_tp: r.n_tp,
                n_fp: r.n_fp,
            });
        }
    }

    /// Orders rows by corruption kind (baseline first), severity, stratum.
    pub fn sort_rows(&mut self) {
        self.rows.sort_by_key(|r| r.sort_key());
    }

    pub fn find(
        &self,
        corruption: Option<CorruptionKind>,
        severity: Option<Severity>,
        stratum: &Stratum,
    ) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.corruption == corruption && r.severity == severity && &r.stratum == stratum)
    }
}
