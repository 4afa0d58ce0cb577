//! Cross-sensor corruptions: noisy extrinsics and stale camera or LiDAR data.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::model::{Calibration, FrameSample, Severity};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct MisalignParams {
    pub rotation_sigma: [f64; 3],
    /// Meters.
    pub translation_sigma: [f64; 3],
    /// Delay in frames.
    pub frame_offset: [usize; 3],
}

impl Default for MisalignParams {
    fn default() -> Self {
        Self {
            rotation_sigma: [0.02, 0.06, 0.10],
            translation_sigma: [0.002, 0.006, 0.010],
            frame_offset: [2, 6, 10],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MisalignError {
    #[error("frame index {index} out of range for a sequence of {len} frames")]
    InvalidFrameReference { index: usize, len: usize },
}

/// Adds i.i.d. noise to the 9 rotation entries (row-major draw order) and
/// then the 3 translation entries. The rotation is deliberately left
/// non-orthonormal.
pub fn perturb_calibration(
    calib: &Calibration,
    rotation_sigma: f64,
    translation_sigma: f64,
    seed: u64,
) -> Calibration {
    let mut rng = rng_from_seed(seed);
    let mut out = calib.clone();
    for row in out.rotation.iter_mut() {
        for v in row.iter_mut() {
            let e: f64 = rng.sample(StandardNormal);
            *v += rotation_sigma * e;
        }
    }
    for v in out.translation.iter_mut() {
        let e: f64 = rng.sample(StandardNormal);
        *v += translation_sigma * e;
    }
    out
}

/// Index of the stale frame: `max(0, index - offset)`.
pub fn delayed_index(index: usize, offset: usize) -> usize {
    index.saturating_sub(offset)
}

fn check_index(seq: &[FrameSample], index: usize) -> Result<(), MisalignError> {
    if index < seq.len() {
        Ok(())
    } else {
        Err(MisalignError::InvalidFrameReference {
            index,
            len: seq.len(),
        })
    }
}

/// Frame `index` with images and calibrations taken from `offset` frames
/// earlier. Cloud, labels and identifiers stay current.
pub fn delay_camera(
    seq: &[FrameSample],
    index: usize,
    offset: usize,
) -> Result<FrameSample, MisalignError> {
    check_index(seq, index)?;
    let stale = &seq[delayed_index(index, offset)];
    let mut out = seq[index].clone();
    out.images = stale.images.clone();
    out.calibrations = stale.calibrations.clone();
    Ok(out)
}

/// Frame `index` with its point cloud taken from `offset` frames earlier.
/// The stale cloud keeps its own `frame_id`.
pub fn delay_lidar(
    seq: &[FrameSample],
    index: usize,
    offset: usize,
) -> Result<FrameSample, MisalignError> {
    check_index(seq, index)?;
    let stale = &seq[delayed_index(index, offset)];
    let mut out = seq[index].clone();
    out.cloud = stale.cloud.clone();
    Ok(out)
}

impl MisalignParams {
    pub fn spatial(&self, calib: &Calibration, severity: Severity, seed: u64) -> Calibration {
        perturb_calibration(
            calib,
            self.rotation_sigma[severity.index()],
            self.translation_sigma[severity.index()],
            seed,
        )
    }

    pub fn temporal_camera(
        &self,
        seq: &[FrameSample],
        index: usize,
        severity: Severity,
    ) -> Result<FrameSample, MisalignError> {
        delay_camera(seq, index, self.frame_offset[severity.index()])
    }

    pub fn temporal_lidar(
        &self,
        seq: &[FrameSample],
        index: usize,
        severity: Severity,
    ) -> Result<FrameSample, MisalignError> {
        delay_lidar(seq, index, self.frame_offset[severity.index()])
    }
}

pub fn spatial_misalign(calib: &Calibration, severity: Severity, seed: u64) -> Calibration {
    MisalignParams::default().spatial(calib, severity, seed)
}

pub fn temporal_misalign_camera(
    seq: &[FrameSample],
    index: usize,
    severity: Severity,
) -> Result<FrameSample, MisalignError> {
    MisalignParams::default().temporal_camera(seq, index, severity)
}

pub fn temporal_misalign_lidar(
    seq: &[FrameSample],
    index: usize,
    severity: Severity,
) -> Result<FrameSample, MisalignError> {
    MisalignParams::default().temporal_lidar(seq, index, severity)
}
