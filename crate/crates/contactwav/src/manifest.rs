//! JSON episode manifests.
//!
//! ```json
//! { "id": "ep0", "audio_wav": "audio.wav", "audio_start_s": 0.0,
//!   "frames": [{"t_s": 0.0, "image": "frames/000.png"}],
//!   "poses": [{"t_s": 0.0, "pos": [0, 0, 0], "quat_wxyz": [1, 0, 0, 0], "gripper": 1.0}],
//!   "environment": "lab", "latency_s": 0.0 }
//! ```
//!
//! Relative paths are resolved against the manifest's directory.
//! `latency_s` may be omitted and defaults to 0.

use std::fs;
use std::path::{Path, PathBuf};

use contactwav_core::episode::{Episode, FrameIndex, FrameRef, PoseSample};
use contactwav_core::rotation::Quat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wav::read_wav;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub t_s: f64,
    pub image: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseEntry {
    pub t_s: f64,
    pub pos: [f64; 3],
    pub quat_wxyz: [f64; 4],
    pub gripper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub id: String,
    pub audio_wav: String,
    pub audio_start_s: f64,
    pub frames: Vec<FrameEntry>,
    pub poses: Vec<PoseEntry>,
    pub environment: String,
    #[serde(default)]
    pub latency_s: f64,
}

fn base_dir(manifest_path: &Path) -> &Path {
    manifest_path.parent().unwrap_or(Path::new(""))
}

fn relative_to(path: &str, base: &Path) -> String {
    Path::new(path).strip_prefix(base).map(|p| p.to_string_lossy().into_owned()).unwrap_or_else(|_| path.to_owned())
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parses manifest text; `path` is only used in error messages.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let manifest: Manifest = serde_path_to_error::deserialize(de).map_err(|e| Error::MalformedManifest {
            path: path.to_path_buf(),
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        manifest.check_fields(path)?;
        Ok(manifest)
    }

    fn check_fields(&self, path: &Path) -> Result<()> {
        let malformed =
            |field: String, message: String| Err(Error::MalformedManifest { path: path.to_path_buf(), field, message });
        if self.id.is_empty() {
            return malformed("id".into(), "must be nonempty".into());
        }
        if !self.audio_start_s.is_finite() {
            return malformed("audio_start_s".into(), "must be finite".into());
        }
        if !self.latency_s.is_finite() {
            return malformed("latency_s".into(), "must be finite".into());
        }
        for (i, p) in self.poses.iter().enumerate() {
            let q = Quat::from_wxyz(p.quat_wxyz);
            if !q.is_unit() {
                return malformed(format!("poses[{i}].quat_wxyz"), format!("norm {} is not 1", q.norm()));
            }
            if !(0.0..=1.0).contains(&p.gripper) {
                return malformed(format!("poses[{i}].gripper"), format!("{} outside [0, 1]", p.gripper));
            }
        }
        Ok(())
    }

    /// Builds the episode, reading the audio and resolving every path
    /// against `base`.
    pub fn to_episode(&self, base: &Path) -> Result<Episode> {
        let audio = read_wav(&base.join(&self.audio_wav), self.audio_start_s)?;
        let frames = FrameIndex::new(
            self.frames.iter().map(|f| f.t_s).collect(),
            self.frames
                .iter()
                .map(|f| FrameRef { path: base.join(&f.image).to_string_lossy().into_owned(), index: 0 })
                .collect(),
        )?;
        let poses = self
            .poses
            .iter()
            .map(|p| PoseSample {
                t_s: p.t_s,
                position_m: p.pos,
                orientation: Quat::from_wxyz(p.quat_wxyz),
                gripper_width: p.gripper,
            })
            .collect();
        Ok(Episode::new(self.id.clone(), audio, frames, poses, self.environment.clone(), self.latency_s)?)
    }

    /// Inverse of [`Manifest::to_episode`]: image paths under `base` are
    /// written relative to it. The audio itself is not serialized, only the
    /// given `audio_wav` reference.
    pub fn from_episode(episode: &Episode, audio_wav: &str, base: &Path) -> Self {
        Manifest {
            id: episode.id.clone(),
            audio_wav: audio_wav.to_owned(),
            audio_start_s: episode.audio.start_time_s,
            frames: episode
                .frames
                .timestamps_s
                .iter()
                .zip(&episode.frames.frame_refs)
                .map(|(&t_s, r)| FrameEntry { t_s, image: relative_to(&r.path, base) })
                .collect(),
            poses: episode
                .poses
                .iter()
                .map(|p| PoseEntry {
                    t_s: p.t_s,
                    pos: p.position_m,
                    quat_wxyz: p.orientation.to_wxyz(),
                    gripper: p.gripper_width,
                })
                .collect(),
            environment: episode.environment_tag.clone(),
            latency_s: episode.latency_s,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

/// Reads and validates a manifest and everything it references.
pub fn load_episode(manifest_path: &Path) -> Result<Episode> {
    Manifest::read(manifest_path)?
        .to_episode(base_dir(manifest_path))
        .map_err(|e| e.context(format!("loading {}", manifest_path.display())))
}

/// Every `*.json` file directly inside `dir`, sorted by file name.
pub fn manifest_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    Ok(paths)
}

/// Loads every manifest in `dir`, in file-name order.
pub fn load_manifest_dir(dir: &Path) -> Result<Vec<Episode>> {
    manifest_paths(dir)?.iter().map(|p| load_episode(p)).collect()
}
