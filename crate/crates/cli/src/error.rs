//! Failure classes and their exit codes.

use xrm3d::detect::DetectError;
use xrm3d::fuse::FuseError;
use xrm3d::io::IoError;
use xrm3d::metrics::MetricsError;
use xrm3d::segment::SegmentError;
use xrm3d::synthgen::SynthError;
use xrm3d::volume::VolumeError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Input that does not match its schema or violates an invariant.
    #[error("{0}")]
    Malformed(String),
    /// Missing file or failed read/write.
    #[error("{0}")]
    Io(String),
    /// A stage produced nothing where something was required.
    #[error("{0}")]
    Empty(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Malformed(_) => 2,
            CliError::Io(_) => 3,
            CliError::Empty(_) => 4,
        }
    }

    pub fn malformed(msg: impl Into<String>) -> Self {
        CliError::Malformed(msg.into())
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::MissingFile(_) | IoError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Malformed(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Io(e) => e.into(),
            e => CliError::Malformed(e.to_string()),
        }
    }
}

impl From<DetectError> for CliError {
    fn from(e: DetectError) -> Self {
        match e {
            DetectError::Io(e) => e.into(),
            e => CliError::Malformed(e.to_string()),
        }
    }
}

impl From<SegmentError> for CliError {
    fn from(e: SegmentError) -> Self {
        match e {
            SegmentError::Io(e) => e.into(),
            e => CliError::Malformed(e.to_string()),
        }
    }
}

impl From<FuseError> for CliError {
    fn from(e: FuseError) -> Self {
        CliError::Malformed(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Malformed(e.to_string())
    }
}

impl From<VolumeError> for CliError {
    fn from(e: VolumeError) -> Self {
        CliError::Malformed(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            CliError::Io(e.to_string())
        } else {
            CliError::Malformed(e.to_string())
        }
    }
}
