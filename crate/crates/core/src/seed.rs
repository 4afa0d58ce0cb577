//! Deterministic seeding.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] keyed with
//! `SeedableRng::seed_from_u64(seed)`, where `seed` is derived by hashing the
//! inputs that identify the draw. The hash is SHA-256 over a fixed byte
//! encoding; the derived seed is the first 8 digest bytes read little-endian.
//!
//! Frame seeds hash
//!
//! ```text
//! "pdbench.seed.v1\0" | global_seed: u64 LE | len(frame_id): u32 LE | frame_id (UTF-8)
//!                     | kind code: u8 | severity level (1..=3): u8
//! ```
//!
//! and stream seeds hash
//!
//! ```text
//! "pdbench.stream.v1\0" | base: u64 LE | len(label): u32 LE | label (UTF-8) | index: u64 LE
//! ```
//!
//! Parameter overrides are not part of the frame seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::model::CorruptionSpec;

/// The project-wide generator.
pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SeedPolicy {
    pub global_seed: u64,
}

impl SeedPolicy {
    pub fn new(global_seed: u64) -> Self {
        Self { global_seed }
    }
}

fn digest_u64(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

fn push_str(buf: &mut Vec<u8>, s: &str) {
    let len = u32::try_from(s.len()).expect("identifier longer than 4 GiB");
    buf.extend_from_slice(&len.to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

/// Seed for applying `spec` to the frame `frame_id`.
pub fn derive_frame_seed(policy: SeedPolicy, frame_id: &str, spec: &CorruptionSpec) -> u64 {
    let mut buf = Vec::with_capacity(32 + frame_id.len());
    buf.extend_from_slice(b"pdbench.seed.v1\0");
    buf.extend_from_slice(&policy.global_seed.to_le_bytes());
    push_str(&mut buf, frame_id);
    buf.push(spec.kind.code());
    buf.push(spec.severity.level());
    digest_u64(&buf)
}

/// Independent sub-stream of `base`, e.g. one per camera of a frame.
pub fn derive_stream_seed(base: u64, label: &str, index: u64) -> u64 {
    let mut buf = Vec::with_capacity(40 + label.len());
    buf.extend_from_slice(b"pdbench.stream.v1\0");
    buf.extend_from_slice(&base.to_le_bytes());
    push_str(&mut buf, label);
    buf.extend_from_slice(&index.to_le_bytes());
    digest_u64(&buf)
}
