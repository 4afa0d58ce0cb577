//! Line-delimited JSON annotations and detections.
//!
//! Annotation files hold one [`AnnotationRecord`] per line, detection files
//! one [`DetectionRecord`] per line. Blank lines are skipped; line numbers in
//! errors are 1-based.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use pdbench_core::{Box3D, Detection, FrameSample, GroundTruth, Occlusion};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{IoError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRecord {
    pub cx: f64,
    pub cy: f64,
    pub cz: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub yaw: f64,
    pub occlusion: String,
    pub track_id: String,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl BoxRecord {
    pub fn from_ground_truth(gt: &GroundTruth) -> Self {
        let b = &gt.bbox;
        Self {
            cx: b.cx,
            cy: b.cy,
            cz: b.cz,
            l: b.l,
            w: b.w,
            h: b.h,
            yaw: b.yaw,
            occlusion: gt.occlusion.as_str().to_string(),
            track_id: gt.track_id.clone(),
            extra: Map::new(),
        }
    }

    pub fn bbox(&self) -> Box3D {
        Box3D::new([self.cx, self.cy, self.cz], [self.l, self.w, self.h], self.yaw)
    }
}

/// Ground truth of one frame. Unknown fields survive a read/write cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub frame_id: String,
    pub sequence_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index_in_sequence: Option<usize>,
    pub boxes: Vec<BoxRecord>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl AnnotationRecord {
    pub fn from_frame(frame: &FrameSample) -> Self {
        Self {
            frame_id: frame.frame_id.clone(),
            sequence_id: frame.sequence_id.clone(),
            index_in_sequence: Some(frame.index_in_sequence),
            boxes: frame.ground_truth.iter().map(BoxRecord::from_ground_truth).collect(),
            extra: Map::new(),
        }
    }

    /// Converts the boxes, failing on an unknown occlusion name.
    pub fn ground_truth(&self) -> std::result::Result<Vec<GroundTruth>, String> {
        self.boxes
            .iter()
            .map(|b| {
                let occlusion: Occlusion = b.occlusion.parse().map_err(|e| format!("{e}"))?;
                Ok(GroundTruth {
                    bbox: b.bbox(),
                    occlusion,
                    track_id: b.track_id.clone(),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub frame_id: String,
    pub cx: f64,
    pub cy: f64,
    pub cz: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub yaw: f64,
    pub score: f64,
}

impl DetectionRecord {
    pub fn from_detection(d: &Detection) -> Self {
        let b = &d.bbox;
        Self {
            frame_id: d.frame_id.clone(),
            cx: b.cx,
            cy: b.cy,
            cz: b.cz,
            l: b.l,
            w: b.w,
            h: b.h,
            yaw: b.yaw,
            score: d.score,
        }
    }

    pub fn detection(&self) -> Detection {
        Detection {
            bbox: Box3D::new([self.cx, self.cy, self.cz], [self.l, self.w, self.h], self.yaw),
            score: self.score,
            frame_id: self.frame_id.clone(),
        }
    }
}

/// Non-blank lines with their 1-based numbers.
fn lines<'a>(path: &Path, bytes: &'a [u8]) -> Result<Vec<(usize, &'a str)>> {
    let mut out = Vec::new();
    for (i, raw) in bytes.split(|b| *b == b'\n').enumerate() {
        let text = std::str::from_utf8(raw).map_err(|e| IoError::parse(path, i + 1, e.to_string()))?;
        let text = text.trim_end_matches('\r');
        if !text.trim().is_empty() {
            out.push((i + 1, text));
        }
    }
    Ok(out)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| IoError::io(path, e))
}

/// Parses annotation records, checking occlusion names and that no frame
/// repeats a track id.
pub fn parse_annotation_records(path: &Path, bytes: &[u8]) -> Result<Vec<AnnotationRecord>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (line, text) in lines(path, bytes)? {
        let rec: AnnotationRecord =
            serde_json::from_str(text).map_err(|e| IoError::parse(path, line, e.to_string()))?;
        rec.ground_truth().map_err(|e| IoError::parse(path, line, e))?;
        for b in &rec.boxes {
            if !seen.insert((rec.frame_id.clone(), b.track_id.clone())) {
                return Err(IoError::parse(
                    path,
                    line,
                    format!("duplicate track `{}` in frame `{}`", b.track_id, rec.frame_id),
                ));
            }
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_annotation_records(path: &Path) -> Result<Vec<AnnotationRecord>> {
    parse_annotation_records(path, &read_bytes(path)?)
}

/// Ground truth per frame id.
pub fn read_annotations(path: &Path) -> Result<BTreeMap<String, Vec<GroundTruth>>> {
    let mut out: BTreeMap<String, Vec<GroundTruth>> = BTreeMap::new();
    for rec in read_annotation_records(path)? {
        // validated by the parser
        let gts = rec.ground_truth().expect("occlusion checked");
        out.entry(rec.frame_id).or_default().extend(gts);
    }
    Ok(out)
}

fn to_jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    let mut s = String::new();
    for item in items {
        s.push_str(&serde_json::to_string(&item).expect("records serialize"));
        s.push('\n');
    }
    s
}

pub fn write_annotation_records(path: &Path, records: &[AnnotationRecord]) -> Result<()> {
    crate::write_file(path, to_jsonl(records).as_bytes())
}

pub fn parse_detections(path: &Path, bytes: &[u8]) -> Result<BTreeMap<String, Vec<Detection>>> {
    let mut out: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
    for (line, text) in lines(path, bytes)? {
        let rec: DetectionRecord =
            serde_json::from_str(text).map_err(|e| IoError::parse(path, line, e.to_string()))?;
        if !(0.0..=1.0).contains(&rec.score) {
            return Err(IoError::parse(path, line, format!("score {} outside [0, 1]", rec.score)));
        }
        let dims = [rec.l, rec.w, rec.h];
        if dims.iter().any(|d| !(d.is_finite() && *d > 0.0))
            || ![rec.cx, rec.cy, rec.cz, rec.yaw].iter().all(|v| v.is_finite())
        {
            return Err(IoError::parse(path, line, "box fields must be finite with positive dimensions"));
        }
        out.entry(rec.frame_id.clone()).or_default().push(rec.detection());
    }
    Ok(out)
}

/// Detections grouped by frame id, in file order within a frame.
pub fn read_detections(path: &Path) -> Result<BTreeMap<String, Vec<Detection>>> {
    parse_detections(path, &read_bytes(path)?)
}

pub fn write_detections<'a>(path: &Path, dets: impl IntoIterator<Item = &'a Detection>) -> Result<()> {
    let text = to_jsonl(dets.into_iter().map(DetectionRecord::from_detection));
    crate::write_file(path, text.as_bytes())
}
