use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::MediaError;

/// Which half of the composite the road-facing camera occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    #[default]
    RoadLeft,
    RoadRight,
}

/// How many frames to sample per clip and how to size and arrange them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergePolicy {
    #[serde(default = "default_sample_count")]
    pub sample_count: usize,
    #[serde(default = "default_width")]
    pub width: u32,
    #[serde(default = "default_height")]
    pub height: u32,
    #[serde(default)]
    pub layout: Layout,
}

fn default_sample_count() -> usize {
    8
}
fn default_width() -> u32 {
    640
}
fn default_height() -> u32 {
    480
}

pub const MIN_CAMERA_SIDE: u32 = 16;

impl Default for MergePolicy {
    fn default() -> Self {
        Self {
            sample_count: default_sample_count(),
            width: default_width(),
            height: default_height(),
            layout: Layout::RoadLeft,
        }
    }
}

impl MergePolicy {
    pub fn new(sample_count: usize, width: u32, height: u32, layout: Layout) -> Result<Self, MediaError> {
        let policy = Self {
            sample_count,
            width,
            height,
            layout,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<(), MediaError> {
        if self.sample_count == 0 {
            return Err(MediaError::InvalidPolicy("sample_count must be at least 1".into()));
        }
        if self.width < MIN_CAMERA_SIDE || self.height < MIN_CAMERA_SIDE {
            return Err(MediaError::InvalidPolicy(format!(
                "per-camera size {}x{} is below the {MIN_CAMERA_SIDE}px minimum",
                self.width, self.height
            )));
        }
        Ok(())
    }

    /// Midpoint-uniform sample times for a clip of `duration_s` seconds.
    pub fn sample_times(&self, duration_s: f64) -> Vec<f64> {
        let k = self.sample_count as f64;
        (0..self.sample_count)
            .map(|i| (i as f64 + 0.5) * duration_s / k)
            .collect()
    }

    /// Stable hex digest of the policy, used to key the frame cache.
    pub fn digest(&self) -> String {
        let canonical = format!(
            "k={};w={};h={};layout={:?}",
            self.sample_count, self.width, self.height, self.layout
        );
        hex_digest(canonical.as_bytes())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
