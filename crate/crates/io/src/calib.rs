//! Per-frame camera extrinsics as JSON: `{"cameras": [{camera_id, rotation,
//! translation}, ...]}` with a row-major 3×3 rotation.

use std::path::Path;

use pdbench_core::Calibration;
use serde::{Deserialize, Serialize};

use crate::error::{IoError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub camera_id: String,
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub cameras: Vec<CalibrationRecord>,
}

pub fn write_calibrations(calibs: &[Calibration], path: &Path) -> Result<()> {
    let doc = CalibrationFile {
        cameras: calibs
            .iter()
            .map(|c| CalibrationRecord {
                camera_id: c.camera_id.clone(),
                rotation: c.rotation,
                translation: c.translation,
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("calibration serializes");
    text.push('\n');
    crate::write_file(path, text.as_bytes())
}

pub fn read_calibrations(path: &Path) -> Result<Vec<Calibration>> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    let doc: CalibrationFile =
        serde_json::from_str(&text).map_err(|e| IoError::parse(path, e.line(), e.to_string()))?;
    Ok(doc
        .cameras
        .into_iter()
        .map(|c| Calibration {
            camera_id: c.camera_id,
            rotation: c.rotation,
            translation: c.translation,
        })
        .collect())
}
