use std::fs;
use std::path::{Path, PathBuf};

use image::ImageFormat;
use serde::{Deserialize, Serialize};
use tracing::{debug, info};

use super::HarnessError;
use crate::media::{
    extract_frames, hex_digest, merge_side_by_side, ClipPair, Manifest, MediaError, MergePolicy, MergedFrameSet,
    VideoDecoder,
};

#[derive(Debug, Serialize, Deserialize)]
struct CacheMeta {
    clip_id: String,
    policy_digest: String,
    policy: MergePolicy,
    frame_count: usize,
    width: u32,
    height: u32,
}

/// Merged frame sets on disk, one directory per (clip id, policy digest).
#[derive(Debug, Clone)]
pub struct FrameCache {
    root: PathBuf,
}

impl FrameCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entry_dir(&self, clip_id: &str, policy: &MergePolicy) -> PathBuf {
        let key = hex_digest(format!("{clip_id}\n{}", policy.digest()).as_bytes());
        self.root.join(&key[..32])
    }

    pub fn contains(&self, clip_id: &str, policy: &MergePolicy) -> bool {
        self.entry_dir(clip_id, policy).join("meta.json").is_file()
    }

    pub fn load(&self, clip_id: &str, policy: &MergePolicy) -> Result<Option<MergedFrameSet>, HarnessError> {
        let dir = self.entry_dir(clip_id, policy);
        let meta_path = dir.join("meta.json");
        if !meta_path.is_file() {
            return Ok(None);
        }
        let meta: CacheMeta = serde_json::from_str(&read(&meta_path)?)
            .map_err(|e| HarnessError::Cache(format!("{}: {e}", meta_path.display())))?;
        if meta.clip_id != clip_id || meta.policy_digest != policy.digest() {
            return Err(HarnessError::Cache(format!("{} belongs to another clip or policy", dir.display())));
        }
        let mut frames = Vec::with_capacity(meta.frame_count);
        for i in 0..meta.frame_count {
            let path = dir.join(frame_name(i));
            let frame = image::open(&path)
                .map_err(|e| HarnessError::Cache(format!("{}: {e}", path.display())))?
                .to_rgb8();
            if frame.dimensions() != (meta.width, meta.height) {
                return Err(HarnessError::Cache(format!("{} has the wrong size", path.display())));
            }
            frames.push(frame);
        }
        Ok(Some(MergedFrameSet {
            clip_id: meta.clip_id,
            frames,
            width: meta.width,
            height: meta.height,
        }))
    }

    /// Writes into a scratch directory first so a crash never leaves a
    /// half-written entry that looks complete.
    pub fn store(&self, merged: &MergedFrameSet, policy: &MergePolicy) -> Result<(), HarnessError> {
        let dir = self.entry_dir(&merged.clip_id, policy);
        let scratch = dir.with_extension("partial");
        let io = |path: &Path, e: std::io::Error| HarnessError::Cache(format!("{}: {e}", path.display()));
        if scratch.exists() {
            fs::remove_dir_all(&scratch).map_err(|e| io(&scratch, e))?;
        }
        fs::create_dir_all(&scratch).map_err(|e| io(&scratch, e))?;
        for (i, frame) in merged.frames.iter().enumerate() {
            let path = scratch.join(frame_name(i));
            frame
                .save_with_format(&path, ImageFormat::Png)
                .map_err(|e| HarnessError::Cache(format!("{}: {e}", path.display())))?;
        }
        let meta = CacheMeta {
            clip_id: merged.clip_id.clone(),
            policy_digest: policy.digest(),
            policy: *policy,
            frame_count: merged.frames.len(),
            width: merged.width,
            height: merged.height,
        };
        let meta_path = scratch.join("meta.json");
        fs::write(&meta_path, serde_json::to_string_pretty(&meta).expect("meta serializes"))
            .map_err(|e| io(&meta_path, e))?;
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| io(&dir, e))?;
        }
        fs::rename(&scratch, &dir).map_err(|e| io(&dir, e))
    }
}

fn frame_name(i: usize) -> String {
    format!("frame_{i:04}.png")
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::Cache(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    pub extracted: Vec<String>,
    pub cached: Vec<String>,
    /// Clip id and error message.
    pub failures: Vec<(String, String)>,
}

impl IngestSummary {
    pub fn is_ok(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn merge_clip(
    clip: &ClipPair,
    manifest: &Manifest,
    policy: &MergePolicy,
    decoder: &dyn VideoDecoder,
) -> Result<MergedFrameSet, MediaError> {
    let (road, driver) = extract_frames(clip, manifest.base_dir(), policy, decoder)?;
    merge_side_by_side(&road, &driver, policy)
}

/// Makes sure every listed clip has a cache entry for `policy`, extracting
/// only the missing ones. Per-clip failures are collected, not fatal.
pub fn ingest<'a>(
    manifest: &Manifest,
    clips: impl IntoIterator<Item = &'a ClipPair>,
    policy: &MergePolicy,
    cache: &FrameCache,
    decoder: &dyn VideoDecoder,
) -> Result<IngestSummary, HarnessError> {
    policy.validate()?;
    let mut summary = IngestSummary::default();
    for clip in clips {
        if cache.contains(&clip.id, policy) {
            debug!(clip = %clip.id, "cache hit");
            summary.cached.push(clip.id.clone());
            continue;
        }
        match merge_clip(clip, manifest, policy, decoder) {
            Ok(merged) => {
                cache.store(&merged, policy)?;
                info!(clip = %clip.id, frames = merged.len(), "extracted");
                summary.extracted.push(clip.id.clone());
            }
            Err(e) => summary.failures.push((clip.id.clone(), e.to_string())),
        }
    }
    Ok(summary)
}
