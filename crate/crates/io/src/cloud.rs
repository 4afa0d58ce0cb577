//! Binary point cloud format.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "R3PC"
//! 4       2     version (1), u16 LE
//! 6       4     point count N, u32 LE
//! 10      2     flags, u16 LE; bit 0 = intensity present
//! 12      ...   N records of x, y, z [, intensity] as f32 LE
//! ```

use std::fs;
use std::path::Path;

use pdbench_core::{Point3, PointCloud};

use crate::error::{CloudError, IoError, Result};

pub const MAGIC: [u8; 4] = *b"R3PC";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 12;
pub const FLAG_INTENSITY: u16 = 1;

pub fn encode_cloud(cloud: &PointCloud) -> Result<Vec<u8>, CloudError> {
    let with_intensity = cloud.points.first().is_some_and(|p| p.intensity.is_some());
    if cloud
        .points
        .iter()
        .any(|p| p.intensity.is_some() != with_intensity)
    {
        return Err(CloudError::MixedIntensity);
    }
    let count = u32::try_from(cloud.len()).map_err(|_| CloudError::TooManyPoints(cloud.len()))?;
    let stride = if with_intensity { 16 } else { 12 };
    let mut out = Vec::with_capacity(HEADER_LEN + cloud.len() * stride);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    let flags = if with_intensity { FLAG_INTENSITY } else { 0 };
    out.extend_from_slice(&flags.to_le_bytes());
    for p in &cloud.points {
        out.extend_from_slice(&p.x.to_le_bytes());
        out.extend_from_slice(&p.y.to_le_bytes());
        out.extend_from_slice(&p.z.to_le_bytes());
        if let Some(i) = p.intensity {
            out.extend_from_slice(&i.to_le_bytes());
        }
    }
    Ok(out)
}

fn f32_at(bytes: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

pub fn decode_cloud(bytes: &[u8], frame_id: &str) -> Result<PointCloud, CloudError> {
    if bytes.len() >= 4 && bytes[..4] != MAGIC {
        return Err(CloudError::BadMagic {
            found: bytes[..4].try_into().unwrap(),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(CloudError::Truncated {
            offset: bytes.len(),
            expected: HEADER_LEN,
        });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(CloudError::UnsupportedVersion { version });
    }
    let count = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let flags = u16::from_le_bytes([bytes[10], bytes[11]]);
    if flags & !FLAG_INTENSITY != 0 {
        return Err(CloudError::UnknownFlags { flags });
    }
    let stride = if flags & FLAG_INTENSITY != 0 { 16 } else { 12 };
    let expected = HEADER_LEN + count * stride;
    if bytes.len() < expected {
        return Err(CloudError::Truncated {
            offset: bytes.len(),
            expected,
        });
    }
    if bytes.len() > expected {
        return Err(CloudError::TrailingBytes {
            offset: expected,
            extra: bytes.len() - expected,
        });
    }
    let points = bytes[HEADER_LEN..]
        .chunks_exact(stride)
        .map(|rec| {
            let p = Point3::new(f32_at(rec, 0), f32_at(rec, 4), f32_at(rec, 8));
            if stride == 16 {
                p.with_intensity(f32_at(rec, 12))
            } else {
                p
            }
        })
        .collect();
    Ok(PointCloud::new(frame_id, points))
}

pub fn write_cloud(cloud: &PointCloud, path: &Path) -> Result<()> {
    let bytes = encode_cloud(cloud).map_err(|source| IoError::Cloud {
        path: path.into(),
        source,
    })?;
    crate::write_file(path, &bytes)
}

/// Reads a cloud; its `frame_id` is the file stem.
pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    let stem = path.file_stem().map(|s| s.to_string_lossy()).unwrap_or_default();
    decode_cloud(&bytes, &stem).map_err(|source| IoError::Cloud {
        path: path.into(),
        source,
    })
}
