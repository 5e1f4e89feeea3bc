//! Frame decoding behind a "give me the frame at time t" interface.
//!
//! Two backends ship: a directory of PNG rasters with a small `video.json`
//! sidecar (used for fixtures and pre-extracted footage) and an `ffmpeg`
//! subprocess for ordinary container files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use image::RgbImage;
use serde::Deserialize;

pub trait VideoDecoder: Send + Sync {
    /// Decodes the frame displayed at `t` seconds. Errors are plain
    /// descriptions; the caller attaches clip and camera context.
    fn frame_at(&self, path: &Path, t: f64) -> Result<RgbImage, String>;
}

#[derive(Debug, Deserialize)]
struct FrameDirMeta {
    fps: f64,
}

/// A "video" stored as `video.json` (`{"fps": <rate>}`) plus PNG frames whose
/// lexicographic file-name order is presentation order.
#[derive(Debug, Default, Clone, Copy)]
pub struct FrameDirDecoder;

impl FrameDirDecoder {
    fn frames(dir: &Path) -> Result<Vec<PathBuf>, String> {
        let entries = fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        let mut frames: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext.eq_ignore_ascii_case("png")))
            .collect();
        frames.sort();
        Ok(frames)
    }
}

impl VideoDecoder for FrameDirDecoder {
    fn frame_at(&self, path: &Path, t: f64) -> Result<RgbImage, String> {
        let meta_path = path.join("video.json");
        let meta_text = fs::read_to_string(&meta_path)
            .map_err(|e| format!("{}: {e}", meta_path.display()))?;
        let meta: FrameDirMeta = serde_json::from_str(&meta_text)
            .map_err(|e| format!("{}: {e}", meta_path.display()))?;
        if !(meta.fps.is_finite() && meta.fps > 0.0) {
            return Err(format!("{}: fps must be positive", meta_path.display()));
        }
        let frames = Self::frames(path)?;
        if frames.is_empty() {
            return Err(format!("{}: no decodable frames", path.display()));
        }
        let index = ((t.max(0.0) * meta.fps).floor() as usize).min(frames.len() - 1);
        let frame = &frames[index];
        image::open(frame)
            .map(|img| img.to_rgb8())
            .map_err(|e| format!("{}: {e}", frame.display()))
    }
}

/// Shells out to `ffmpeg`, seeking to `t` and emitting one PNG frame on stdout.
#[derive(Debug, Clone)]
pub struct FfmpegDecoder {
    pub binary: PathBuf,
}

impl Default for FfmpegDecoder {
    fn default() -> Self {
        Self {
            binary: PathBuf::from("ffmpeg"),
        }
    }
}

impl VideoDecoder for FfmpegDecoder {
    fn frame_at(&self, path: &Path, t: f64) -> Result<RgbImage, String> {
        let output = Command::new(&self.binary)
            .args(["-v", "error", "-ss"])
            .arg(format!("{t:.6}"))
            .arg("-i")
            .arg(path)
            .args(["-frames:v", "1", "-f", "image2pipe", "-c:v", "png", "-"])
            .stdin(Stdio::null())
            .output()
            .map_err(|e| format!("failed to run {}: {e}", self.binary.display()))?;
        if !output.status.success() {
            return Err(format!(
                "{} exited with {}: {}",
                self.binary.display(),
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            ));
        }
        if output.stdout.is_empty() {
            return Err(format!("{}: no frame at {t:.3}s", path.display()));
        }
        image::load_from_memory_with_format(&output.stdout, image::ImageFormat::Png)
            .map(|img| img.to_rgb8())
            .map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// Frame directories go to [`FrameDirDecoder`], everything else to ffmpeg.
#[derive(Debug, Default, Clone)]
pub struct AutoDecoder {
    pub ffmpeg: FfmpegDecoder,
}

impl VideoDecoder for AutoDecoder {
    fn frame_at(&self, path: &Path, t: f64) -> Result<RgbImage, String> {
        if path.is_dir() {
            FrameDirDecoder.frame_at(path, t)
        } else {
            self.ffmpeg.frame_at(path, t)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn write_dir(fps: f64, shades: &[u8]) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("video.json"), format!("{{\"fps\": {fps}}}")).unwrap();
        for (i, &shade) in shades.iter().enumerate() {
            RgbImage::from_pixel(4, 4, Rgb([shade, 0, 0]))
                .save(dir.path().join(format!("frame_{i:04}.png")))
                .unwrap();
        }
        dir
    }

    #[test]
    fn picks_frame_by_timestamp() {
        let dir = write_dir(2.0, &[10, 20, 30, 40]);
        let d = FrameDirDecoder;
        assert_eq!(d.frame_at(dir.path(), 0.25).unwrap().get_pixel(0, 0)[0], 10);
        assert_eq!(d.frame_at(dir.path(), 0.5).unwrap().get_pixel(0, 0)[0], 20);
        assert_eq!(d.frame_at(dir.path(), 1.75).unwrap().get_pixel(0, 0)[0], 40);
        // past the end clamps to the last frame
        assert_eq!(d.frame_at(dir.path(), 9.0).unwrap().get_pixel(0, 0)[0], 40);
    }

    #[test]
    fn empty_directory_has_no_frames() {
        let dir = write_dir(2.0, &[]);
        let err = FrameDirDecoder.frame_at(dir.path(), 0.0).unwrap_err();
        assert!(err.contains("no decodable frames"));
    }

    #[test]
    fn corrupt_png_is_an_error() {
        let dir = write_dir(1.0, &[]);
        fs::write(dir.path().join("frame_0000.png"), b"not a png").unwrap();
        assert!(FrameDirDecoder.frame_at(dir.path(), 0.0).is_err());
    }

    #[test]
    fn missing_ffmpeg_binary_reports_cleanly() {
        let decoder = FfmpegDecoder {
            binary: PathBuf::from("/nonexistent/ffmpeg"),
        };
        let err = decoder.frame_at(Path::new("clip.mp4"), 1.0).unwrap_err();
        assert!(err.contains("failed to run"));
    }
}
