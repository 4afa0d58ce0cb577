//! Resolves a [`CorruptionSpec`] to concrete parameters and applies it to a
//! frame of a sequence.
//!
//! Accepted override names per kind:
//!
//! | kind | overrides |
//! |---|---|
//! | `lidar_gaussian` | `sigma` |
//! | `cutout` | `groups`, `drop` |
//! | `crosstalk` | `ratio`, `sigma` |
//! | `density_decrease` | `fraction` |
//! | `fov_loss` | `lo_deg`, `hi_deg` |
//! | `camera_gaussian` | `sigma` |
//! | `fog` | `opacity`, `gray` |
//! | `sunlight` | `brightness`, `contrast` |
//! | `spatial_misalign` | `rotation_sigma`, `translation_sigma` |
//! | `temporal_misalign_*` | `offset` |

use crate::camera::{self, CameraCorruptionParams};
use crate::lidar::{self, LidarCorruptionParams};
use crate::misalign::{self, MisalignError, MisalignParams};
use crate::model::{CorruptionKind, CorruptionSpec, FrameSample};
use crate::seed::{derive_frame_seed, derive_stream_seed, SeedPolicy};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorruptionError {
    #[error("`{name}` is not a parameter of {kind} (accepted: {accepted})")]
    UnknownOverride {
        kind: CorruptionKind,
        name: String,
        accepted: String,
    },
    #[error("override `{name}` = {value} for {kind}: {reason}")]
    InvalidOverride {
        kind: CorruptionKind,
        name: String,
        value: f64,
        reason: &'static str,
    },
    #[error(transparent)]
    Misalign(#[from] MisalignError),
}

/// Concrete parameters for one corruption application.
#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedCorruption {
    LidarGaussian { sigma: f64 },
    Cutout { groups: usize, drop: usize },
    Crosstalk { ratio: f64, sigma: f64 },
    DensityDecrease { fraction: f64 },
    FovLoss { lo_deg: f64, hi_deg: f64 },
    CameraGaussian { sigma: f64 },
    Fog { opacity: f64, gray: f64 },
    Sunlight { brightness: f64, contrast: f64 },
    SpatialMisalign { rotation_sigma: f64, translation_sigma: f64 },
    TemporalMisalignCamera { offset: usize },
    TemporalMisalignLidar { offset: usize },
}

/// Default parameter tables for every corruption family.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorruptionDefaults {
    pub lidar: LidarCorruptionParams,
    pub camera: CameraCorruptionParams,
    pub misalign: MisalignParams,
}

fn accepted_names(kind: CorruptionKind) -> &'static [&'static str] {
    use CorruptionKind::*;
    match kind {
        LidarGaussian | CameraGaussian => &["sigma"],
        Cutout => &["groups", "drop"],
        Crosstalk => &["ratio", "sigma"],
        DensityDecrease => &["fraction"],
        FovLoss => &["lo_deg", "hi_deg"],
        Fog => &["opacity", "gray"],
        Sunlight => &["brightness", "contrast"],
        SpatialMisalign => &["rotation_sigma", "translation_sigma"],
        TemporalMisalignCamera | TemporalMisalignLidar => &["offset"],
    }
}

struct Overrides<'a> {
    spec: &'a CorruptionSpec,
}

impl Overrides<'_> {
    fn invalid(&self, name: &str, value: f64, reason: &'static str) -> CorruptionError {
        CorruptionError::InvalidOverride {
            kind: self.spec.kind,
            name: name.to_string(),
            value,
            reason,
        }
    }

    fn real(&self, name: &str, default: f64) -> Result<f64, CorruptionError> {
        match self.spec.overrides.get(name) {
            None => Ok(default),
            Some(&v) if v.is_finite() => Ok(v),
            Some(&v) => Err(self.invalid(name, v, "must be finite")),
        }
    }

    fn non_negative(&self, name: &str, default: f64) -> Result<f64, CorruptionError> {
        let v = self.real(name, default)?;
        if v < 0.0 {
            return Err(self.invalid(name, v, "must be >= 0"));
        }
        Ok(v)
    }

    fn unit(&self, name: &str, default: f64) -> Result<f64, CorruptionError> {
        let v = self.non_negative(name, default)?;
        if v > 1.0 {
            return Err(self.invalid(name, v, "must be <= 1"));
        }
        Ok(v)
    }

    fn count(&self, name: &str, default: usize) -> Result<usize, CorruptionError> {
        let v = self.non_negative(name, default as f64)?;
        if v.fract() != 0.0 {
            return Err(self.invalid(name, v, "must be a whole number"));
        }
        Ok(v as usize)
    }
}

impl CorruptionDefaults {
    /// Applies `spec.overrides` on top of the defaults for `spec.severity`.
    pub fn resolve(&self, spec: &CorruptionSpec) -> Result<ResolvedCorruption, CorruptionError> {
        use CorruptionKind::*;
        let accepted = accepted_names(spec.kind);
        if let Some(name) = spec
            .overrides
            .keys()
            .find(|k| !accepted.contains(&k.as_str()))
        {
            return Err(CorruptionError::UnknownOverride {
                kind: spec.kind,
                name: name.clone(),
                accepted: accepted.join(", "),
            });
        }
        let o = Overrides { spec };
        let s = spec.severity.index();
        let (l, c, m) = (&self.lidar, &self.camera, &self.misalign);
        Ok(match spec.kind {
            LidarGaussian => ResolvedCorruption::LidarGaussian {
                sigma: o.non_negative("sigma", l.gaussian_sigma_m[s])?,
            },
            Cutout => {
                let groups = o.count("groups", l.cutout_groups)?;
                let drop = o.count("drop", l.cutout_drop[s])?;
                if groups == 0 {
                    return Err(o.invalid("groups", 0.0, "must be >= 1"));
                }
                if drop > groups {
                    return Err(o.invalid("drop", drop as f64, "must not exceed groups"));
                }
                ResolvedCorruption::Cutout { groups, drop }
            }
            Crosstalk => ResolvedCorruption::Crosstalk {
                ratio: o.unit("ratio", l.crosstalk_ratio[s])?,
                sigma: o.non_negative("sigma", l.crosstalk_sigma_m)?,
            },
            DensityDecrease => ResolvedCorruption::DensityDecrease {
                fraction: o.unit("fraction", l.density_drop_fraction[s])?,
            },
            FovLoss => {
                let (lo, hi) = l.fov_kept_range_deg[s];
                let lo_deg = o.real("lo_deg", lo)?;
                let hi_deg = o.real("hi_deg", hi)?;
                if lo_deg > hi_deg {
                    return Err(o.invalid("lo_deg", lo_deg, "must not exceed hi_deg"));
                }
                ResolvedCorruption::FovLoss { lo_deg, hi_deg }
            }
            CameraGaussian => ResolvedCorruption::CameraGaussian {
                sigma: o.non_negative("sigma", c.gaussian_sigma[s])?,
            },
            Fog => ResolvedCorruption::Fog {
                opacity: o.unit("opacity", c.fog_opacity[s])?,
                gray: o.unit("gray", c.fog_gray)?,
            },
            Sunlight => {
                let contrast = o.non_negative("contrast", c.sunlight_contrast_factor[s])?;
                if contrast < 1.0 {
                    return Err(o.invalid("contrast", contrast, "must be >= 1"));
                }
                ResolvedCorruption::Sunlight {
                    brightness: o.real("brightness", c.sunlight_brightness_delta[s])?,
                    contrast,
                }
            }
            SpatialMisalign => ResolvedCorruption::SpatialMisalign {
                rotation_sigma: o.non_negative("rotation_sigma", m.rotation_sigma[s])?,
                translation_sigma: o.non_negative("translation_sigma", m.translation_sigma[s])?,
            },
            TemporalMisalignCamera => ResolvedCorruption::TemporalMisalignCamera {
                offset: o.count("offset", m.frame_offset[s])?,
            },
            TemporalMisalignLidar => ResolvedCorruption::TemporalMisalignLidar {
                offset: o.count("offset", m.frame_offset[s])?,
            },
        })
    }
}

pub fn resolve(spec: &CorruptionSpec) -> Result<ResolvedCorruption, CorruptionError> {
    CorruptionDefaults::default().resolve(spec)
}

impl ResolvedCorruption {
    /// Applies the corruption to frame `index` of `seq`.
    ///
    /// `seed` drives LiDAR corruptions directly; camera images and
    /// calibrations use `derive_stream_seed(seed, "camera", i)` for the i-th
    /// image or calibration of the frame.
    pub fn apply(
        &self,
        seq: &[FrameSample],
        index: usize,
        seed: u64,
    ) -> Result<FrameSample, CorruptionError> {
        use ResolvedCorruption::*;
        let frame = seq.get(index).ok_or(MisalignError::InvalidFrameReference {
            index,
            len: seq.len(),
        })?;
        let camera_seed = |i: usize| derive_stream_seed(seed, "camera", i as u64);
        let mut out = match self {
            TemporalMisalignCamera { offset } => return Ok(misalign::delay_camera(seq, index, *offset)?),
            TemporalMisalignLidar { offset } => return Ok(misalign::delay_lidar(seq, index, *offset)?),
            _ => frame.clone(),
        };
        match *self {
            LidarGaussian { sigma } => out.cloud = lidar::gaussian_noise(&frame.cloud, sigma, seed),
            Cutout { groups, drop } => out.cloud = lidar::cutout_groups(&frame.cloud, groups, drop, seed),
            Crosstalk { ratio, sigma } => {
                out.cloud = lidar::crosstalk_subset(&frame.cloud, ratio, sigma, seed)
            }
            DensityDecrease { fraction } => out.cloud = lidar::thin(&frame.cloud, fraction, seed),
            FovLoss { lo_deg, hi_deg } => out.cloud = lidar::keep_azimuth(&frame.cloud, lo_deg, hi_deg),
            CameraGaussian { sigma } => {
                for (i, img) in out.images.iter_mut().enumerate() {
                    *img = camera::gaussian_noise(img, sigma, camera_seed(i));
                }
            }
            Fog { opacity, gray } => {
                for img in out.images.iter_mut() {
                    *img = camera::gray_blend(img, opacity, gray);
                }
            }
            Sunlight {
                brightness,
                contrast,
            } => {
                for img in out.images.iter_mut() {
                    *img = camera::brightness_contrast(img, brightness, contrast);
                }
            }
            SpatialMisalign {
                rotation_sigma,
                translation_sigma,
            } => {
                for (i, calib) in out.calibrations.iter_mut().enumerate() {
                    *calib = misalign::perturb_calibration(
                        calib,
                        rotation_sigma,
                        translation_sigma,
                        camera_seed(i),
                    );
                }
            }
            TemporalMisalignCamera { .. } | TemporalMisalignLidar { .. } => unreachable!(),
        }
        Ok(out)
    }
}

/// Corrupts frame `index` of `seq` with the seed derived from `policy`.
pub fn corrupt_frame(
    seq: &[FrameSample],
    index: usize,
    spec: &CorruptionSpec,
    policy: SeedPolicy,
) -> Result<FrameSample, CorruptionError> {
    let resolved = resolve(spec)?;
    let frame = seq.get(index).ok_or(MisalignError::InvalidFrameReference {
        index,
        len: seq.len(),
    })?;
    let seed = derive_frame_seed(policy, &frame.frame_id, spec);
    resolved.apply(seq, index, seed)
}

/// Corrupts every frame of a sequence.
pub fn corrupt_sequence(
    seq: &[FrameSample],
    spec: &CorruptionSpec,
    policy: SeedPolicy,
) -> Result<Vec<FrameSample>, CorruptionError> {
    let resolved = resolve(spec)?;
    seq.iter()
        .enumerate()
        .map(|(i, f)| resolved.apply(seq, i, derive_frame_seed(policy, &f.frame_id, spec)))
        .collect()
}
