//! File formats for clouds, images, calibrations, annotations, detections
//! and reports, plus a directory adapter for JRDB-style datasets.

pub mod adapter;
pub mod calib;
pub mod cloud;
pub mod error;
pub mod raster;
pub mod records;
pub mod report;

use std::path::Path;

pub use adapter::{write_dataset, AdapterConfig, JrdbAdapter};
pub use cloud::{read_cloud, write_cloud};
pub use error::{CloudError, IoError, Result};
pub use raster::{read_image, write_image};
pub use records::{read_annotations, read_detections, write_detections};
pub use report::{read_report, write_report, ReportFormat};

pub(crate) fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))
        }
        _ => Ok(()),
    }
}

/// Writes `bytes`, creating parent directories.
pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    ensure_parent(path)?;
    std::fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}
