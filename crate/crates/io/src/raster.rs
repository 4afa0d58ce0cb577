//! Camera images as 16-bit RGB PNG. Values are quantized to `k / 65535`.

use std::path::Path;

use image::{ImageBuffer, Rgb};
use pdbench_core::CameraImage;

use crate::error::{IoError, Result};

pub fn quantize(v: f32) -> u16 {
    (v.clamp(0.0, 1.0) as f64 * 65535.0).round() as u16
}

pub fn write_image(img: &CameraImage, path: &Path) -> Result<()> {
    let data: Vec<u16> = img.pixels.iter().map(|&v| quantize(v)).collect();
    let buf: ImageBuffer<Rgb<u16>, Vec<u16>> =
        ImageBuffer::from_raw(img.width as u32, img.height as u32, data)
            .ok_or_else(|| IoError::format(path, "pixel buffer does not match the image size"))?;
    crate::ensure_parent(path)?;
    buf.save(path).map_err(|e| IoError::format(path, e.to_string()))
}

/// Reads any PNG or JPEG as normalized RGB.
pub fn read_image(path: &Path, camera_id: &str) -> Result<CameraImage> {
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => IoError::io(path, io),
        other => IoError::format(path, other.to_string()),
    })?;
    let rgb = img.to_rgb16();
    Ok(CameraImage {
        camera_id: camera_id.to_string(),
        width: rgb.width() as usize,
        height: rgb.height() as usize,
        pixels: rgb.into_raw().into_iter().map(|v| v as f32 / 65535.0).collect(),
    })
}
