//! Directory layout adapter for JRDB-style datasets.
//!
//! Default layout under a dataset root:
//!
//! ```text
//! adapter.toml                                   optional, see AdapterConfig
//! <split>/labels_3d/<sequence>.jsonl             one AnnotationRecord per frame
//! <split>/pointclouds/<sequence>/<index>.r3pc
//! <split>/calibration/<sequence>/<index>.json
//! <split>/images/<camera>/<sequence>/<index>.png
//! ```
//!
//! Label files define the frames. Each frame loads the cameras listed in its
//! calibration file. `<index>` is the zero-padded index in the sequence.

use std::fs;
use std::path::{Path, PathBuf};

use pdbench_core::{validate_frame_with, Box3D, Dataset, FrameSample, GroundTruth, ValidationOptions};
use serde::{Deserialize, Serialize};

use crate::calib::{read_calibrations, write_calibrations};
use crate::cloud::{read_cloud, write_cloud};
use crate::error::{IoError, Result};
use crate::raster::{read_image, write_image};
use crate::records::{read_annotation_records, write_annotation_records, AnnotationRecord};

pub const CONFIG_FILE: &str = "adapter.toml";

/// Path patterns accept `{split}`, `{sequence}`, `{index}` and `{camera}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdapterConfig {
    pub labels_pattern: String,
    pub cloud_pattern: String,
    pub calibration_pattern: String,
    pub image_pattern: String,
    pub index_width: usize,
    /// Stored yaw `y` maps to `yaw_sign * y + yaw_offset`.
    pub yaw_sign: f64,
    pub yaw_offset: f64,
    /// Fail on a frame with a missing file or failed validation instead of
    /// skipping it with a warning.
    pub strict: bool,
    /// Off for corrupted copies, whose perturbed extrinsics are not rotations.
    pub require_orthonormal_calibration: bool,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        Self {
            labels_pattern: "{split}/labels_3d/{sequence}.jsonl".into(),
            cloud_pattern: "{split}/pointclouds/{sequence}/{index}.r3pc".into(),
            calibration_pattern: "{split}/calibration/{sequence}/{index}.json".into(),
            image_pattern: "{split}/images/{camera}/{sequence}/{index}.png".into(),
            index_width: 6,
            yaw_sign: 1.0,
            yaw_offset: 0.0,
            strict: true,
            require_orthonormal_calibration: true,
        }
    }
}

impl AdapterConfig {
    /// Reads `<root>/adapter.toml`, or the defaults when it is absent.
    pub fn load(root: &Path) -> Result<Self> {
        let path = root.join(CONFIG_FILE);
        let cfg: AdapterConfig = match fs::read_to_string(&path) {
            Ok(text) => toml::from_str(&text).map_err(|e| IoError::format(&path, e.to_string()))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Self::default(),
            Err(e) => return Err(IoError::io(&path, e)),
        };
        cfg.check().map_err(|m| IoError::format(&path, m))?;
        Ok(cfg)
    }

    pub fn save(&self, root: &Path) -> Result<()> {
        let text = toml::to_string(self).expect("config serializes");
        crate::write_file(&root.join(CONFIG_FILE), text.as_bytes())
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.yaw_sign != 1.0 && self.yaw_sign != -1.0 {
            return Err("yaw_sign must be 1 or -1".into());
        }
        if !self.yaw_offset.is_finite() {
            return Err("yaw_offset must be finite".into());
        }
        let (dir, file) = split_last(&self.labels_pattern);
        if !file.contains("{sequence}") || dir.contains("{sequence}") {
            return Err("labels_pattern needs {sequence} in its file name only".into());
        }
        Ok(())
    }

    fn fill(&self, pattern: &str, split: &str, sequence: &str, index: usize, camera: &str) -> PathBuf {
        let index = format!("{index:0width$}", width = self.index_width);
        PathBuf::from(
            pattern
                .replace("{split}", split)
                .replace("{sequence}", sequence)
                .replace("{index}", &index)
                .replace("{camera}", camera),
        )
    }

    fn to_internal_yaw(&self, stored: f64) -> f64 {
        self.yaw_sign * stored + self.yaw_offset
    }

    fn to_stored_yaw(&self, yaw: f64) -> f64 {
        if self.yaw_offset == 0.0 {
            self.yaw_sign * yaw
        } else {
            self.yaw_sign * (yaw - self.yaw_offset)
        }
    }
}

fn split_last(pattern: &str) -> (&str, &str) {
    match pattern.rfind('/') {
        Some(i) => (&pattern[..i], &pattern[i + 1..]),
        None => ("", pattern),
    }
}

#[derive(Debug, Clone)]
struct FrameEntry {
    /// Sequence name used in paths.
    sequence: String,
    index: usize,
    record: AnnotationRecord,
}

/// Frames of one split. Labels are read on open; clouds, images and
/// calibrations are read lazily per frame.
#[derive(Debug, Clone)]
pub struct JrdbAdapter {
    root: PathBuf,
    split: String,
    config: AdapterConfig,
    entries: Vec<FrameEntry>,
}

impl JrdbAdapter {
    pub fn open(root: &Path, split: &str) -> Result<Self> {
        let config = AdapterConfig::load(root)?;
        Self::with_config(root, split, config)
    }

    /// `root` must be a directory; a missing split is an empty dataset.
    pub fn with_config(root: &Path, split: &str, config: AdapterConfig) -> Result<Self> {
        if !root.is_dir() {
            return Err(IoError::io(
                root,
                std::io::Error::new(std::io::ErrorKind::NotFound, "dataset root is not a directory"),
            ));
        }
        config
            .check()
            .map_err(|m| IoError::format(root.join(CONFIG_FILE), m))?;
        let labels = config.labels_pattern.replace("{split}", split);
        let (dir, file) = split_last(&labels);
        let (prefix, suffix) = file.split_once("{sequence}").expect("checked");
        let label_dir = root.join(dir);
        let mut sequences = Vec::new();
        match fs::read_dir(&label_dir) {
            Ok(rd) => {
                for entry in rd {
                    let entry = entry.map_err(|e| IoError::io(&label_dir, e))?;
                    let name = entry.file_name().to_string_lossy().into_owned();
                    if let Some(seq) = name
                        .strip_prefix(prefix)
                        .and_then(|r| r.strip_suffix(suffix))
                        .filter(|s| !s.is_empty())
                    {
                        sequences.push(seq.to_string());
                    }
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(IoError::io(&label_dir, e)),
        }
        sequences.sort();
        let mut entries = Vec::new();
        for seq in sequences {
            let path = root.join(config.fill(&labels, split, &seq, 0, ""));
            let mut frames: Vec<FrameEntry> = read_annotation_records(&path)?
                .into_iter()
                .enumerate()
                .map(|(line_order, record)| FrameEntry {
                    sequence: seq.clone(),
                    index: record.index_in_sequence.unwrap_or(line_order),
                    record,
                })
                .collect();
            frames.sort_by_key(|f| f.index);
            if let Some(w) = frames.windows(2).find(|w| w[0].index == w[1].index) {
                return Err(IoError::format(
                    &path,
                    format!("frames `{}` and `{}` share index {}", w[0].record.frame_id, w[1].record.frame_id, w[0].index),
                ));
            }
            entries.extend(frames);
        }
        Ok(Self {
            root: root.to_path_buf(),
            split: split.to_string(),
            config,
            entries,
        })
    }

    pub fn config(&self) -> &AdapterConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Frames in sequence order, then index order.
    pub fn frames(&self) -> impl Iterator<Item = Result<FrameSample>> + '_ {
        self.entries.iter().filter_map(move |e| match self.load(e) {
            Ok(f) => Some(Ok(f)),
            Err(err @ (IoError::MissingModality { .. } | IoError::InvalidFrame { .. }))
                if !self.config.strict =>
            {
                log::warn!("skipping frame: {err}");
                None
            }
            Err(err) => Some(Err(err)),
        })
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        Ok(Dataset::from_frames(self.frames().collect::<Result<Vec<_>>>()?))
    }

    fn path(&self, pattern: &str, e: &FrameEntry, camera: &str) -> PathBuf {
        self.root
            .join(self.config.fill(pattern, &self.split, &e.sequence, e.index, camera))
    }

    fn require(&self, path: PathBuf, e: &FrameEntry, modality: &'static str) -> Result<PathBuf> {
        if path.is_file() {
            Ok(path)
        } else {
            Err(IoError::MissingModality {
                frame_id: e.record.frame_id.clone(),
                modality,
                path,
            })
        }
    }

    fn load(&self, e: &FrameEntry) -> Result<FrameSample> {
        let rec = &e.record;
        let cloud_path = self.require(self.path(&self.config.cloud_pattern, e, ""), e, "point cloud")?;
        let mut cloud = read_cloud(&cloud_path)?;
        cloud.frame_id = rec.frame_id.clone();
        let calib_path = self.require(self.path(&self.config.calibration_pattern, e, ""), e, "calibration")?;
        let calibrations = read_calibrations(&calib_path)?;
        let images = calibrations
            .iter()
            .map(|c| {
                let p = self.require(self.path(&self.config.image_pattern, e, &c.camera_id), e, "image")?;
                read_image(&p, &c.camera_id)
            })
            .collect::<Result<Vec<_>>>()?;
        let ground_truth = rec
            .ground_truth()
            .expect("occlusion checked when parsed")
            .into_iter()
            .zip(&rec.boxes)
            .map(|(g, b)| GroundTruth {
                bbox: Box3D::new([b.cx, b.cy, b.cz], [b.l, b.w, b.h], self.config.to_internal_yaw(b.yaw)),
                ..g
            })
            .collect();
        let frame = FrameSample {
            frame_id: rec.frame_id.clone(),
            sequence_id: rec.sequence_id.clone(),
            index_in_sequence: e.index,
            cloud,
            images,
            calibrations,
            ground_truth,
        };
        let options = ValidationOptions {
            require_orthonormal: self.config.require_orthonormal_calibration,
        };
        let violations = validate_frame_with(&frame, options);
        if violations.is_empty() {
            Ok(frame)
        } else {
            Err(IoError::InvalidFrame {
                frame_id: frame.frame_id,
                violations,
            })
        }
    }
}

/// Writes `dataset` under `root` using `config`'s patterns and saves the
/// config next to it. Sequence ids become path components.
pub fn write_dataset(root: &Path, split: &str, dataset: &Dataset, config: &AdapterConfig) -> Result<()> {
    config
        .check()
        .map_err(|m| IoError::format(root.join(CONFIG_FILE), m))?;
    config.save(root)?;
    for seq in &dataset.sequences {
        let records: Vec<AnnotationRecord> = seq
            .frames
            .iter()
            .map(|f| {
                let mut r = AnnotationRecord::from_frame(f);
                for b in &mut r.boxes {
                    b.yaw = config.to_stored_yaw(b.yaw);
                }
                r
            })
            .collect();
        let labels = config.fill(&config.labels_pattern, split, &seq.sequence_id, 0, "");
        write_annotation_records(&root.join(labels), &records)?;
        for f in &seq.frames {
            write_frame_sensors(root, split, &seq.sequence_id, f, config)?;
        }
    }
    Ok(())
}

/// Writes the cloud, calibration and images of one frame.
pub fn write_frame_sensors(
    root: &Path,
    split: &str,
    sequence: &str,
    frame: &FrameSample,
    config: &AdapterConfig,
) -> Result<()> {
    let i = frame.index_in_sequence;
    write_cloud(&frame.cloud, &root.join(config.fill(&config.cloud_pattern, split, sequence, i, "")))?;
    write_calibrations(
        &frame.calibrations,
        &root.join(config.fill(&config.calibration_pattern, split, sequence, i, "")),
    )?;
    for img in &frame.images {
        write_image(img, &root.join(config.fill(&config.image_pattern, split, sequence, i, &img.camera_id)))?;
    }
    Ok(())
}
