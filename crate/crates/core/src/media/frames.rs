use std::path::Path;

use image::imageops::{self, FilterType};
use image::RgbImage;

use super::decode::VideoDecoder;
use super::manifest::ClipPair;
use super::policy::{Layout, MergePolicy};
use super::{Camera, MediaError};

/// K frames sampled from one camera, all resized to the same dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet {
    pub clip_id: String,
    pub frames: Vec<RgbImage>,
    pub timestamps: Vec<f64>,
    pub width: u32,
    pub height: u32,
}

impl FrameSet {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Composite frames: road and driver halves concatenated horizontally.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedFrameSet {
    pub clip_id: String,
    pub frames: Vec<RgbImage>,
    pub width: u32,
    pub height: u32,
}

impl MergedFrameSet {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Samples `policy.sample_count` frames from each camera at midpoint-uniform
/// timestamps and resizes them (bilinear) to the per-camera size. Relative
/// video paths resolve against `base_dir`.
pub fn extract_frames(
    clip: &ClipPair,
    base_dir: &Path,
    policy: &MergePolicy,
    decoder: &dyn VideoDecoder,
) -> Result<(FrameSet, FrameSet), MediaError> {
    policy.validate()?;
    if !(clip.duration_s.is_finite() && clip.duration_s > 0.0) {
        return Err(MediaError::InvalidClip {
            clip: clip.id.clone(),
            reason: format!("duration_s must be positive, got {}", clip.duration_s),
        });
    }
    let timestamps = policy.sample_times(clip.duration_s);
    let road = extract_camera(clip, base_dir, Camera::Road, &timestamps, policy, decoder)?;
    let driver = extract_camera(clip, base_dir, Camera::Driver, &timestamps, policy, decoder)?;
    Ok((road, driver))
}

fn extract_camera(
    clip: &ClipPair,
    base_dir: &Path,
    camera: Camera,
    timestamps: &[f64],
    policy: &MergePolicy,
    decoder: &dyn VideoDecoder,
) -> Result<FrameSet, MediaError> {
    let raw = Path::new(clip.video(camera));
    let path = if raw.is_absolute() {
        raw.to_path_buf()
    } else {
        base_dir.join(raw)
    };
    let frames = timestamps
        .iter()
        .map(|&t| {
            let frame = decoder.frame_at(&path, t).map_err(|reason| MediaError::Decode {
                clip: clip.id.clone(),
                camera,
                reason,
            })?;
            Ok(resize(frame, policy.width, policy.height))
        })
        .collect::<Result<Vec<_>, MediaError>>()?;
    Ok(FrameSet {
        clip_id: clip.id.clone(),
        frames,
        timestamps: timestamps.to_vec(),
        width: policy.width,
        height: policy.height,
    })
}

fn resize(frame: RgbImage, width: u32, height: u32) -> RgbImage {
    if frame.dimensions() == (width, height) {
        frame
    } else {
        imageops::resize(&frame, width, height, FilterType::Triangle)
    }
}

/// Concatenates frame i of each camera side by side, in the order the
/// policy's layout dictates.
pub fn merge_side_by_side(
    road: &FrameSet,
    driver: &FrameSet,
    policy: &MergePolicy,
) -> Result<MergedFrameSet, MediaError> {
    if road.len() != driver.len() || road.len() != policy.sample_count {
        return Err(MediaError::FrameCountMismatch {
            expected: policy.sample_count,
            road: road.len(),
            driver: driver.len(),
        });
    }
    let (w, h) = (policy.width, policy.height);
    for (camera, set) in [(Camera::Road, road), (Camera::Driver, driver)] {
        if let Some(frame) = set.frames.iter().find(|f| f.dimensions() != (w, h)) {
            return Err(MediaError::DimensionMismatch {
                camera,
                expected: (w, h),
                actual: frame.dimensions(),
            });
        }
    }

    let frames = road
        .frames
        .iter()
        .zip(&driver.frames)
        .map(|(r, d)| {
            let (left, right) = match policy.layout {
                Layout::RoadLeft => (r, d),
                Layout::RoadRight => (d, r),
            };
            concat_horizontal(left, right)
        })
        .collect();

    Ok(MergedFrameSet {
        clip_id: road.clip_id.clone(),
        frames,
        width: 2 * w,
        height: h,
    })
}

fn concat_horizontal(left: &RgbImage, right: &RgbImage) -> RgbImage {
    let (w, h) = left.dimensions();
    let mut out = RgbImage::new(2 * w, h);
    let row = 3 * w as usize;
    let buf: &mut [u8] = &mut out;
    for (y, dst) in buf.chunks_exact_mut(2 * row).enumerate() {
        let src = y * row..(y + 1) * row;
        dst[..row].copy_from_slice(&left.as_raw()[src.clone()]);
        dst[row..].copy_from_slice(&right.as_raw()[src]);
    }
    out
}
