//! Sensor corruptions, rotated-box geometry and stratified AP evaluation for
//! 3D person detection benchmarks.
//!
//! Points and pixels are stored as `f32`; all arithmetic runs in `f64`.

pub mod camera;
pub mod corrupt;
pub mod eval;
pub mod geom;
pub mod lidar;
pub mod misalign;
pub mod model;
pub mod seed;
pub mod synth;

pub use model::*;
pub use seed::SeedPolicy;
