//! Camera corruptions on normalized RGB images: Gaussian noise, fog (gray
//! overlay) and sunlight (global brightness/contrast). Every output value is
//! clamped to `[0, 1]` once, after the full transform.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::model::{CameraImage, Severity};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct CameraCorruptionParams {
    /// Noise standard deviation as a fraction of the dynamic range.
    pub gaussian_sigma: [f64; 3],
    pub fog_opacity: [f64; 3],
    pub fog_gray: f64,
    pub sunlight_brightness_delta: [f64; 3],
    pub sunlight_contrast_factor: [f64; 3],
}

impl Default for CameraCorruptionParams {
    fn default() -> Self {
        Self {
            gaussian_sigma: [0.08, 0.18, 0.38],
            fog_opacity: [0.10, 0.30, 0.50],
            fog_gray: 0.5,
            sunlight_brightness_delta: [0.10, 0.20, 0.30],
            sunlight_contrast_factor: [1.1, 1.3, 1.5],
        }
    }
}

fn clamp01(v: f64) -> f32 {
    v.clamp(0.0, 1.0) as f32
}

/// `clamp(p + ε)` with ε ~ N(0, sigma²) drawn per value in raster order.
pub fn gaussian_noise(img: &CameraImage, sigma: f64, seed: u64) -> CameraImage {
    if sigma == 0.0 {
        return img.clone();
    }
    let mut rng = rng_from_seed(seed);
    let pixels = img
        .pixels
        .iter()
        .map(|&p| {
            let e: f64 = rng.sample(StandardNormal);
            clamp01(p as f64 + sigma * e)
        })
        .collect();
    img.with_pixels(pixels)
}

/// Blends every value toward `gray` with opacity `alpha`.
pub fn gray_blend(img: &CameraImage, alpha: f64, gray: f64) -> CameraImage {
    let pixels = img
        .pixels
        .iter()
        .map(|&p| clamp01((1.0 - alpha) * p as f64 + alpha * gray))
        .collect();
    img.with_pixels(pixels)
}

/// Contrast stretch about mid-gray followed by a brightness offset.
pub fn brightness_contrast(img: &CameraImage, delta: f64, factor: f64) -> CameraImage {
    let pixels = img
        .pixels
        .iter()
        .map(|&p| clamp01((p as f64 - 0.5) * factor + 0.5 + delta))
        .collect();
    img.with_pixels(pixels)
}

impl CameraCorruptionParams {
    pub fn gaussian(&self, img: &CameraImage, severity: Severity, seed: u64) -> CameraImage {
        gaussian_noise(img, self.gaussian_sigma[severity.index()], seed)
    }

    pub fn fog(&self, img: &CameraImage, severity: Severity) -> CameraImage {
        gray_blend(img, self.fog_opacity[severity.index()], self.fog_gray)
    }

    pub fn sunlight(&self, img: &CameraImage, severity: Severity) -> CameraImage {
        brightness_contrast(
            img,
            self.sunlight_brightness_delta[severity.index()],
            self.sunlight_contrast_factor[severity.index()],
        )
    }
}

pub fn camera_gaussian(img: &CameraImage, severity: Severity, seed: u64) -> CameraImage {
    CameraCorruptionParams::default().gaussian(img, severity, seed)
}

pub fn fog(img: &CameraImage, severity: Severity) -> CameraImage {
    CameraCorruptionParams::default().fog(img, severity)
}

pub fn sunlight(img: &CameraImage, severity: Severity) -> CameraImage {
    CameraCorruptionParams::default().sunlight(img, severity)
}
