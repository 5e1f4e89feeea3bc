//! Dataset manifest loading, frame sampling, and side-by-side compositing.

mod decode;
mod frames;
mod manifest;
mod policy;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use decode::{AutoDecoder, FfmpegDecoder, FrameDirDecoder, VideoDecoder};
pub use frames::{extract_frames, merge_side_by_side, FrameSet, MergedFrameSet};
pub use manifest::{load_manifest, ClipPair, Manifest, Split};
pub use policy::{Layout, MergePolicy, MIN_CAMERA_SIDE};

pub(crate) use policy::hex_digest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Camera {
    Road,
    Driver,
}

impl fmt::Display for Camera {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Camera::Road => "road-facing",
            Camera::Driver => "driver-facing",
        })
    }
}

#[derive(Debug, Error)]
pub enum MediaError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate clip id {0:?}")]
    DuplicateId(String),
    #[error("clip {clip:?}: {camera} video {} does not exist", path.display())]
    DanglingPath {
        clip: String,
        camera: Camera,
        path: PathBuf,
    },
    #[error("clip {clip:?}: {reason}")]
    InvalidClip { clip: String, reason: String },
    #[error("invalid merge policy: {0}")]
    InvalidPolicy(String),
    #[error("clip {clip:?}: cannot decode {camera} camera: {reason}")]
    Decode {
        clip: String,
        camera: Camera,
        reason: String,
    },
    #[error("frame count mismatch: policy wants {expected}, road has {road}, driver has {driver}")]
    FrameCountMismatch {
        expected: usize,
        road: usize,
        driver: usize,
    },
    #[error("{camera} frame is {}x{}, expected {}x{}", actual.0, actual.1, expected.0, expected.1)]
    DimensionMismatch {
        camera: Camera,
        expected: (u32, u32),
        actual: (u32, u32),
    },
}
