use std::path::PathBuf;

use pdbench_core::Violation;

/// Failure while decoding a binary cloud. Offsets are byte positions in the
/// input.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CloudError {
    #[error("bad magic at offset 0: expected \"R3PC\", found {found:?}")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported version {version} at offset 4")]
    UnsupportedVersion { version: u16 },
    #[error("unknown flag bits {flags:#06x} at offset 10")]
    UnknownFlags { flags: u16 },
    #[error("truncated input at offset {offset}: expected {expected} bytes")]
    Truncated { offset: usize, expected: usize },
    #[error("{extra} trailing bytes at offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    #[error("cloud mixes points with and without intensity")]
    MixedIntensity,
    #[error("cloud has {0} points, more than the format can hold")]
    TooManyPoints(usize),
}

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Cloud {
        path: PathBuf,
        #[source]
        source: CloudError,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("frame `{frame_id}` is missing its {modality} ({path})")]
    MissingModality {
        frame_id: String,
        modality: &'static str,
        path: PathBuf,
    },
    #[error("frame `{frame_id}` failed validation: {}", describe(.violations))]
    InvalidFrame {
        frame_id: String,
        violations: Vec<Violation>,
    },
}

fn describe(v: &[Violation]) -> String {
    v.iter()
        .map(|x| format!("{} {}", x.field, x.rule))
        .collect::<Vec<_>>()
        .join("; ")
}

impl IoError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        IoError::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        IoError::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = IoError> = std::result::Result<T, E>;
