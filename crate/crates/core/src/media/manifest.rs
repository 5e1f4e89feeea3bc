use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Camera, MediaError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

/// One synchronized road-facing + driver-facing recording.
///
/// Paths are kept exactly as written in the manifest; relative paths are
/// resolved against the manifest's directory through [`Manifest::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipPair {
    pub id: String,
    pub road_video: String,
    pub driver_video: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio: Option<String>,
    pub duration_s: f64,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<String>,
}

impl ClipPair {
    pub fn video(&self, camera: Camera) -> &str {
        match camera {
            Camera::Road => &self.road_video,
            Camera::Driver => &self.driver_video,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    clips: Vec<ClipPair>,
}

#[derive(Debug, Clone)]
pub struct Manifest {
    clips: Vec<ClipPair>,
    base_dir: PathBuf,
    splits: BTreeMap<Split, Vec<usize>>,
}

impl PartialEq for Manifest {
    fn eq(&self, other: &Self) -> bool {
        self.clips == other.clips
    }
}

impl Manifest {
    /// Builds a manifest from already-parsed clips, checking every clip
    /// invariant. Relative video paths are checked against `base_dir`.
    pub fn from_clips(clips: Vec<ClipPair>, base_dir: impl Into<PathBuf>) -> Result<Self, MediaError> {
        let base_dir = base_dir.into();
        let mut seen = HashSet::new();
        let mut splits: BTreeMap<Split, Vec<usize>> = BTreeMap::new();
        for (index, clip) in clips.iter().enumerate() {
            if clip.id.trim().is_empty() {
                return Err(MediaError::InvalidClip {
                    clip: clip.id.clone(),
                    reason: "empty id".into(),
                });
            }
            if !seen.insert(clip.id.as_str()) {
                return Err(MediaError::DuplicateId(clip.id.clone()));
            }
            if !(clip.duration_s.is_finite() && clip.duration_s > 0.0) {
                return Err(MediaError::InvalidClip {
                    clip: clip.id.clone(),
                    reason: format!("duration_s must be positive, got {}", clip.duration_s),
                });
            }
            for camera in [Camera::Road, Camera::Driver] {
                let path = resolve_in(&base_dir, clip.video(camera));
                if !path.exists() {
                    return Err(MediaError::DanglingPath {
                        clip: clip.id.clone(),
                        camera,
                        path,
                    });
                }
            }
            splits.entry(clip.split).or_default().push(index);
        }
        Ok(Self {
            clips,
            base_dir,
            splits,
        })
    }

    pub fn parse(text: &str, base_dir: impl Into<PathBuf>, origin: &Path) -> Result<Self, MediaError> {
        let file: ManifestFile = serde_json::from_str(text).map_err(|e| MediaError::Parse {
            path: origin.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_clips(file.clips, base_dir)
    }

    pub fn clips(&self) -> &[ClipPair] {
        &self.clips
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn get(&self, id: &str) -> Option<&ClipPair> {
        self.clips.iter().find(|c| c.id == id)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ClipPair> {
        self.splits
            .get(&split)
            .into_iter()
            .flatten()
            .map(|&i| &self.clips[i])
    }

    pub fn split_count(&self, split: Split) -> usize {
        self.splits.get(&split).map_or(0, Vec::len)
    }

    pub fn resolve(&self, path: &str) -> PathBuf {
        resolve_in(&self.base_dir, path)
    }

    pub fn to_json(&self) -> String {
        let file = ManifestFile {
            clips: self.clips.clone(),
        };
        serde_json::to_string_pretty(&file).expect("manifest serializes")
    }
}

fn resolve_in(base: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest, MediaError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| MediaError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Manifest::parse(&text, base, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_dir() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("road.bin"), b"x").unwrap();
        fs::write(dir.path().join("driver.bin"), b"x").unwrap();
        dir
    }

    fn clip(id: &str, split: &str) -> String {
        format!(
            r#"{{"id":"{id}","road_video":"road.bin","driver_video":"driver.bin","duration_s":8.0,"split":"{split}"}}"#
        )
    }

    #[test]
    fn empty_text_is_a_parse_error() {
        let dir = fixture_dir();
        let err = Manifest::parse("", dir.path(), Path::new("m.json")).unwrap_err();
        assert!(matches!(err, MediaError::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn duplicate_ids_are_named() {
        let dir = fixture_dir();
        let text = format!(r#"{{"clips":[{},{}]}}"#, clip("c1", "test"), clip("c1", "train"));
        let err = Manifest::parse(&text, dir.path(), Path::new("m.json")).unwrap_err();
        assert!(matches!(&err, MediaError::DuplicateId(id) if id == "c1"));
        assert!(err.to_string().contains("c1"));
    }

    #[test]
    fn dangling_driver_video_is_reported() {
        let dir = fixture_dir();
        let text = r#"{"clips":[{"id":"a","road_video":"road.bin","driver_video":"gone.bin","duration_s":1,"split":"test"}]}"#;
        let err = Manifest::parse(text, dir.path(), Path::new("m.json")).unwrap_err();
        match err {
            MediaError::DanglingPath { clip, camera, .. } => {
                assert_eq!(clip, "a");
                assert_eq!(camera, Camera::Driver);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn non_positive_duration_rejected() {
        let dir = fixture_dir();
        let text = r#"{"clips":[{"id":"a","road_video":"road.bin","driver_video":"driver.bin","duration_s":0,"split":"test"}]}"#;
        assert!(matches!(
            Manifest::parse(text, dir.path(), Path::new("m.json")),
            Err(MediaError::InvalidClip { .. })
        ));
    }

    #[test]
    fn unknown_split_reports_position() {
        let dir = fixture_dir();
        let text = "{\"clips\":[\n{\"id\":\"a\",\"road_video\":\"road.bin\",\"driver_video\":\"driver.bin\",\"duration_s\":1,\"split\":\"dev\"}]}";
        match Manifest::parse(text, dir.path(), Path::new("m.json")).unwrap_err() {
            MediaError::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("dev"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn split_index_and_round_trip() {
        let dir = fixture_dir();
        let text = format!(
            r#"{{"clips":[{},{},{}]}}"#,
            clip("a", "train"),
            clip("b", "test"),
            clip("c", "test")
        );
        let manifest = Manifest::parse(&text, dir.path(), Path::new("m.json")).unwrap();
        assert_eq!(manifest.split_count(Split::Train), 1);
        assert_eq!(manifest.split_count(Split::Valid), 0);
        let test_ids: Vec<_> = manifest.split(Split::Test).map(|c| c.id.as_str()).collect();
        assert_eq!(test_ids, ["b", "c"]);

        let again = Manifest::parse(&manifest.to_json(), dir.path(), Path::new("m.json")).unwrap();
        assert_eq!(manifest, again);
    }
}
