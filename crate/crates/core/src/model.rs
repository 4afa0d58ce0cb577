//! Shared data types: point clouds, images, calibrations, boxes, frames and
//! the corruption taxonomy.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

/// A single LiDAR return in the sensor frame (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    /// Reflectance in `[0, 1]` when the sensor reports it.
    pub intensity: Option<f32>,
}

impl Point3 {
    pub fn new(x: f32, y: f32, z: f32) -> Self {
        Self {
            x,
            y,
            z,
            intensity: None,
        }
    }

    pub fn with_intensity(mut self, intensity: f32) -> Self {
        self.intensity = Some(intensity);
        self
    }

    /// Bitwise equality, including the intensity channel. Distinguishes `0.0`
    /// from `-0.0` and treats identical NaN payloads as equal.
    pub fn bit_eq(&self, other: &Point3) -> bool {
        self.x.to_bits() == other.x.to_bits()
            && self.y.to_bits() == other.y.to_bits()
            && self.z.to_bits() == other.z.to_bits()
            && self.intensity.map(f32::to_bits) == other.intensity.map(f32::to_bits)
    }

    /// Azimuth `atan2(y, x)` in degrees, in `(-180, 180]`.
    pub fn azimuth_deg(&self) -> f64 {
        (self.y as f64).atan2(self.x as f64).to_degrees()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub frame_id: String,
    pub points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(frame_id: impl Into<String>, points: Vec<Point3>) -> Self {
        Self {
            frame_id: frame_id.into(),
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same frame id, different point list.
    pub fn with_points(&self, points: Vec<Point3>) -> Self {
        Self {
            frame_id: self.frame_id.clone(),
            points,
        }
    }

    pub fn bit_eq(&self, other: &PointCloud) -> bool {
        self.frame_id == other.frame_id
            && self.points.len() == other.points.len()
            && self
                .points
                .iter()
                .zip(&other.points)
                .all(|(a, b)| a.bit_eq(b))
    }
}

/// Row-major RGB raster with intensities normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraImage {
    pub camera_id: String,
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f32>,
}

impl CameraImage {
    pub const CHANNELS: usize = 3;

    /// Uniform image filled with `value`.
    pub fn filled(camera_id: impl Into<String>, width: usize, height: usize, value: f32) -> Self {
        Self {
            camera_id: camera_id.into(),
            width,
            height,
            pixels: vec![value; width * height * Self::CHANNELS],
        }
    }

    pub fn expected_len(&self) -> usize {
        self.width * self.height * Self::CHANNELS
    }

    pub fn with_pixels(&self, pixels: Vec<f32>) -> Self {
        Self {
            camera_id: self.camera_id.clone(),
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    pub fn bit_eq(&self, other: &CameraImage) -> bool {
        self.camera_id == other.camera_id
            && self.width == other.width
            && self.height == other.height
            && self.pixels.len() == other.pixels.len()
            && self
                .pixels
                .iter()
                .zip(&other.pixels)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Camera-from-LiDAR extrinsics.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub camera_id: String,
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl Calibration {
    pub fn identity(camera_id: impl Into<String>) -> Self {
        Self {
            camera_id: camera_id.into(),
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
        }
    }

    /// `max |(RᵀR − I)ᵢⱼ|`.
    pub fn orthonormality_error(&self) -> f64 {
        let r = &self.rotation;
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| r[k][i] * r[k][j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// Maps an angle into `(-π, π]`. Angles already in range are returned
/// unchanged, which makes the operation idempotent.
pub fn normalize_yaw(yaw: f64) -> f64 {
    if yaw > -PI && yaw <= PI {
        return yaw;
    }
    let wrapped = yaw.rem_euclid(TAU);
    if wrapped > PI {
        wrapped - TAU
    } else {
        wrapped
    }
}

/// Oriented cuboid: center, extents (`l` along the yaw-rotated local x axis,
/// `w` along local y, `h` along global z) and yaw counter-clockwise from +x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3D {
    pub cx: f64,
    pub cy: f64,
    pub cz: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub yaw: f64,
}

impl Box3D {
    /// Builds a box with its yaw normalized to `(-π, π]`.
    pub fn new(center: [f64; 3], dims: [f64; 3], yaw: f64) -> Self {
        Self {
            cx: center[0],
            cy: center[1],
            cz: center[2],
            l: dims[0],
            w: dims[1],
            h: dims[2],
            yaw: normalize_yaw(yaw),
        }
    }

    pub fn center(&self) -> [f64; 3] {
        [self.cx, self.cy, self.cz]
    }

    pub fn volume(&self) -> f64 {
        self.l * self.w * self.h
    }

    /// Horizontal distance from the sensor origin to the box center.
    pub fn ground_range(&self) -> f64 {
        self.cx.hypot(self.cy)
    }

    pub fn bottom(&self) -> f64 {
        self.cz - self.h / 2.0
    }

    pub fn top(&self) -> f64 {
        self.cz + self.h / 2.0
    }

    pub fn translated(&self, dx: f64, dy: f64, dz: f64) -> Self {
        Self {
            cx: self.cx + dx,
            cy: self.cy + dy,
            cz: self.cz + dz,
            ..*self
        }
    }
}

/// Per-person visibility annotation, four categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Occlusion {
    FullyVisible,
    MostlyVisible,
    SeverelyOccluded,
    FullyOccluded,
}

impl Occlusion {
    pub const ALL: [Occlusion; 4] = [
        Occlusion::FullyVisible,
        Occlusion::MostlyVisible,
        Occlusion::SeverelyOccluded,
        Occlusion::FullyOccluded,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Occlusion::FullyVisible => "fully_visible",
            Occlusion::MostlyVisible => "mostly_visible",
            Occlusion::SeverelyOccluded => "severely_occluded",
            Occlusion::FullyOccluded => "fully_occluded",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Occlusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown occlusion category `{0}` (expected one of fully_visible, mostly_visible, severely_occluded, fully_occluded)")]
pub struct UnknownOcclusion(pub String);

impl FromStr for Occlusion {
    type Err = UnknownOcclusion;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Occlusion::ALL
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| UnknownOcclusion(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub bbox: Box3D,
    pub occlusion: Occlusion,
    pub track_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: Box3D,
    pub score: f64,
    pub frame_id: String,
}

/// One synchronized multi-sensor sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSample {
    pub frame_id: String,
    pub sequence_id: String,
    pub index_in_sequence: usize,
    pub cloud: PointCloud,
    pub images: Vec<CameraImage>,
    pub calibrations: Vec<Calibration>,
    pub ground_truth: Vec<GroundTruth>,
}

/// Frames of one recording, ordered by `index_in_sequence`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub sequence_id: String,
    pub frames: Vec<FrameSample>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub sequences: Vec<Sequence>,
}

impl Dataset {
    pub fn frames(&self) -> impl Iterator<Item = &FrameSample> {
        self.sequences.iter().flat_map(|s| s.frames.iter())
    }

    pub fn frame_count(&self) -> usize {
        self.sequences.iter().map(|s| s.frames.len()).sum()
    }

    /// Groups loose frames by sequence id (sorted) and orders each sequence
    /// by `index_in_sequence`.
    pub fn from_frames(frames: impl IntoIterator<Item = FrameSample>) -> Self {
        let mut grouped: BTreeMap<String, Vec<FrameSample>> = BTreeMap::new();
        for frame in frames {
            grouped
                .entry(frame.sequence_id.clone())
                .or_default()
                .push(frame);
        }
        let sequences = grouped
            .into_iter()
            .map(|(sequence_id, mut frames)| {
                frames.sort_by_key(|f| f.index_in_sequence);
                Sequence {
                    sequence_id,
                    frames,
                }
            })
            .collect();
        Self { sequences }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Severity {
    S1,
    S2,
    S3,
}

impl Severity {
    pub const ALL: [Severity; 3] = [Severity::S1, Severity::S2, Severity::S3];

    /// 0-based index into per-severity parameter tables.
    pub fn index(self) -> usize {
        self as usize
    }

    /// 1-based level as printed in reports.
    pub fn level(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_level(level: u8) -> Option<Self> {
        match level {
            1 => Some(Severity::S1),
            2 => Some(Severity::S2),
            3 => Some(Severity::S3),
            _ => None,
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.level())
    }
}

/// Which sensor a corruption acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    Lidar,
    Camera,
    CrossSensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CorruptionKind {
    LidarGaussian,
    Cutout,
    Crosstalk,
    DensityDecrease,
    FovLoss,
    CameraGaussian,
    Fog,
    Sunlight,
    SpatialMisalign,
    TemporalMisalignCamera,
    TemporalMisalignLidar,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 11] = [
        CorruptionKind::LidarGaussian,
        CorruptionKind::Cutout,
        CorruptionKind::Crosstalk,
        CorruptionKind::DensityDecrease,
        CorruptionKind::FovLoss,
        CorruptionKind::CameraGaussian,
        CorruptionKind::Fog,
        CorruptionKind::Sunlight,
        CorruptionKind::SpatialMisalign,
        CorruptionKind::TemporalMisalignCamera,
        CorruptionKind::TemporalMisalignLidar,
    ];

    pub const LIDAR: [CorruptionKind; 5] = [
        CorruptionKind::LidarGaussian,
        CorruptionKind::Cutout,
        CorruptionKind::Crosstalk,
        CorruptionKind::DensityDecrease,
        CorruptionKind::FovLoss,
    ];

    pub const CAMERA: [CorruptionKind; 3] = [
        CorruptionKind::CameraGaussian,
        CorruptionKind::Fog,
        CorruptionKind::Sunlight,
    ];

    pub const CROSS_SENSOR: [CorruptionKind; 3] = [
        CorruptionKind::SpatialMisalign,
        CorruptionKind::TemporalMisalignCamera,
        CorruptionKind::TemporalMisalignLidar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorruptionKind::LidarGaussian => "lidar_gaussian",
            CorruptionKind::Cutout => "cutout",
            CorruptionKind::Crosstalk => "crosstalk",
            CorruptionKind::DensityDecrease => "density_decrease",
            CorruptionKind::FovLoss => "fov_loss",
            CorruptionKind::CameraGaussian => "camera_gaussian",
            CorruptionKind::Fog => "fog",
            CorruptionKind::Sunlight => "sunlight",
            CorruptionKind::SpatialMisalign => "spatial_misalign",
            CorruptionKind::TemporalMisalignCamera => "temporal_misalign_camera",
            CorruptionKind::TemporalMisalignLidar => "temporal_misalign_lidar",
        }
    }

    /// Stable numeric code, used by seed derivation. Never reorder.
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn modality(self) -> Modality {
        match self {
            CorruptionKind::LidarGaussian
            | CorruptionKind::Cutout
            | CorruptionKind::Crosstalk
            | CorruptionKind::DensityDecrease
            | CorruptionKind::FovLoss => Modality::Lidar,
            CorruptionKind::CameraGaussian | CorruptionKind::Fog | CorruptionKind::Sunlight => {
                Modality::Camera
            }
            _ => Modality::CrossSensor,
        }
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown corruption `{0}`")]
pub struct UnknownCorruption(pub String);

impl FromStr for CorruptionKind {
    type Err = UnknownCorruption;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CorruptionKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| UnknownCorruption(s.to_string()))
    }
}

/// A corruption kind at a severity, with optional named parameter overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub severity: Severity,
    pub overrides: BTreeMap<String, f64>,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, severity: Severity) -> Self {
        Self {
            kind,
            severity,
            overrides: BTreeMap::new(),
        }
    }

    pub fn with_override(mut self, name: impl Into<String>, value: f64) -> Self {
        self.overrides.insert(name.into(), value);
        self
    }
}

/// A broken invariant found by [`validate_frame`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// Tolerance for `‖RᵀR − I‖∞` on pristine calibrations.
pub const ORTHONORMAL_TOL: f64 = 1e-6;

/// Which invariants [`validate_frame_with`] enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationOptions {
    /// Spatially misaligned calibrations are deliberately not rotations.
    pub require_orthonormal: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            require_orthonormal: true,
        }
    }
}

/// Collects every invariant violation in `frame`; never aborts early.
///
/// Calibration orthonormality is checked here, so corrupted frames produced
/// by spatial misalignment are expected to report it.
pub fn validate_frame(frame: &FrameSample) -> Vec<Violation> {
    validate_frame_with(frame, ValidationOptions::default())
}

pub fn validate_frame_with(frame: &FrameSample, options: ValidationOptions) -> Vec<Violation> {
    let mut out = Vec::new();

    for (i, p) in frame.cloud.points.iter().enumerate() {
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            out.push(Violation::new(
                format!("cloud.points[{i}]"),
                "coordinates must be finite",
            ));
        }
        if let Some(v) = p.intensity {
            if !(0.0..=1.0).contains(&v) {
                out.push(Violation::new(
                    format!("cloud.points[{i}].intensity"),
                    "intensity must lie in [0, 1]",
                ));
            }
        }
    }

    for img in &frame.images {
        let field = format!("images[{}]", img.camera_id);
        if img.pixels.len() != img.expected_len() {
            out.push(Violation::new(
                format!("{field}.pixels"),
                format!(
                    "pixel count {} != width*height*3 = {}",
                    img.pixels.len(),
                    img.expected_len()
                ),
            ));
        }
        if let Some(i) = img.pixels.iter().position(|v| !(0.0..=1.0).contains(v)) {
            out.push(Violation::new(
                format!("{field}.pixels[{i}]"),
                "pixel value must lie in [0, 1]",
            ));
        }
    }

    if frame.images.len() != frame.calibrations.len() {
        out.push(Violation::new(
            "calibrations",
            format!(
                "{} calibrations for {} images",
                frame.calibrations.len(),
                frame.images.len()
            ),
        ));
    }
    for img in &frame.images {
        let n = frame
            .calibrations
            .iter()
            .filter(|c| c.camera_id == img.camera_id)
            .count();
        if n != 1 {
            out.push(Violation::new(
                format!("calibrations[{}]", img.camera_id),
                format!("expected exactly one calibration for camera, found {n}"),
            ));
        }
    }
    for calib in &frame.calibrations {
        let field = format!("calibrations[{}]", calib.camera_id);
        let finite = calib.rotation.iter().flatten().all(|v| v.is_finite())
            && calib.translation.iter().all(|v| v.is_finite());
        if !finite {
            out.push(Violation::new(&field, "entries must be finite"));
        } else if options.require_orthonormal && calib.orthonormality_error() >= ORTHONORMAL_TOL {
            out.push(Violation::new(
                format!("{field}.rotation"),
                "rotation must be orthonormal",
            ));
        }
        if !frame.images.iter().any(|i| i.camera_id == calib.camera_id) {
            out.push(Violation::new(&field, "no image for this camera"));
        }
    }

    for (i, gt) in frame.ground_truth.iter().enumerate() {
        let b = &gt.bbox;
        let field = format!("ground_truth[{i}]");
        if !(b.l > 0.0 && b.w > 0.0 && b.h > 0.0) {
            out.push(Violation::new(
                format!("{field}.dimensions"),
                "l, w, h must be > 0",
            ));
        }
        if ![b.cx, b.cy, b.cz, b.l, b.w, b.h, b.yaw]
            .iter()
            .all(|v| v.is_finite())
        {
            out.push(Violation::new(&field, "box fields must be finite"));
        }
        if !(b.yaw > -PI && b.yaw <= PI) {
            out.push(Violation::new(
                format!("{field}.yaw"),
                "yaw must lie in (-pi, pi]",
            ));
        }
    }

    out
}
