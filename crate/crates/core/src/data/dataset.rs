use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::frame::DescriptorSet;
use super::frame_file::{read_frame, write_frame};
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Pose};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Intrinsics plus image size, shared by every frame of a scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    #[serde(flatten)]
    pub intrinsics: CameraIntrinsics,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    pub fn contains(&self, px: &nalgebra::Vector2<f64>) -> bool {
        px.x >= 0.0 && px.y >= 0.0 && px.x < self.width as f64 && px.y < self.height as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFrame {
    pub set: DescriptorSet,
    pub split: Split,
    pub pose: Option<Pose>,
}

/// A scene: camera, descriptor dimension and its train/test frames.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneDataset {
    pub scene: String,
    pub dim: usize,
    pub camera: Camera,
    pub frames: Vec<DatasetFrame>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestFrame {
    id: String,
    desc_file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pose: Option<[f64; 7]>,
    split: Split,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    scene: String,
    version: u32,
    #[serde(rename = "M")]
    dim: usize,
    intrinsics: Camera,
    frames: Vec<ManifestFrame>,
}

impl SceneDataset {
    pub fn split(&self, split: Split) -> SceneDataset {
        SceneDataset {
            frames: self
                .frames
                .iter()
                .filter(|f| f.split == split)
                .cloned()
                .collect(),
            ..self.clone_header()
        }
    }

    pub(crate) fn clone_header(&self) -> SceneDataset {
        SceneDataset {
            scene: self.scene.clone(),
            dim: self.dim,
            camera: self.camera,
            frames: Vec::new(),
        }
    }

    pub fn descriptor_sets(&self) -> Vec<DescriptorSet> {
        self.frames.iter().map(|f| f.set.clone()).collect()
    }

    /// Checks every dataset invariant, naming the first offending frame.
    pub fn validate(&self) -> Result<()> {
        let bad = |id: &str, msg: String| Error::InvalidInput(format!("frame {id}: {msg}"));
        if self.dim == 0 {
            return Err(Error::InvalidInput("descriptor dimension M is zero".into()));
        }
        self.camera.intrinsics.validate()?;
        if self.camera.width == 0 || self.camera.height == 0 {
            return Err(Error::InvalidInput("image size must be positive".into()));
        }
        let mut ids = HashSet::new();
        for f in &self.frames {
            let id = f.set.frame_id();
            if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) || id.starts_with('.') {
                return Err(bad(id, "ids must be non-empty and use [A-Za-z0-9-_.]".into()));
            }
            if !ids.insert(id) {
                return Err(bad(id, "duplicate frame id".into()));
            }
            if f.set.dim() != self.dim {
                return Err(bad(
                    id,
                    format!("descriptor dimension {} but manifest M = {}", f.set.dim(), self.dim),
                ));
            }
            let finite = f.set.keypoints().iter().flatten().all(|v| v.is_finite())
                && f.set.descriptors().iter().all(|v| v.is_finite());
            if !finite {
                return Err(bad(id, "non-finite keypoint or descriptor".into()));
            }
            if f.set.scores().iter().any(|s| !(0.0..=1.0).contains(s)) {
                return Err(bad(id, "detector score outside [0, 1]".into()));
            }
            if let Some(gt) = f.set.gt() {
                let finite = gt
                    .coords
                    .iter()
                    .zip(&gt.valid)
                    .filter(|(_, v)| **v)
                    .all(|(c, _)| c.iter().all(|x| x.is_finite()));
                if !finite {
                    return Err(bad(id, "non-finite valid ground-truth coordinate".into()));
                }
            }
            match f.split {
                Split::Train if f.set.gt().is_none() => {
                    return Err(bad(id, "train frame without ground-truth coordinates".into()))
                }
                Split::Test if f.pose.is_none() => {
                    return Err(bad(id, "test frame without ground-truth pose".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn frame_file_name(id: &str) -> String {
    format!("frames/{id}.f2m")
}

/// Writes `manifest.json` and one `.f2m` file per frame under `dir`.
pub fn write_dataset(dataset: &SceneDataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    dataset.validate()?;
    fs::create_dir_all(dir.join("frames")).map_err(|e| Error::io(dir, e))?;
    let mut frames = Vec::with_capacity(dataset.frames.len());
    for f in &dataset.frames {
        let desc_file = frame_file_name(f.set.frame_id());
        write_frame(&f.set, dir.join(&desc_file))?;
        frames.push(ManifestFrame {
            id: f.set.frame_id().to_string(),
            desc_file,
            pose: f.pose.map(|p| p.to_array()),
            split: f.split,
        });
    }
    let manifest = Manifest {
        scene: dataset.scene.clone(),
        version: MANIFEST_VERSION,
        dim: dataset.dim,
        intrinsics: dataset.camera,
        frames,
    };
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Json {
        path: path.clone(),
        source: e,
    })?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Loads a dataset directory and checks its invariants.
pub fn read_dataset(dir: impl AsRef<Path>) -> Result<SceneDataset> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.clone(),
        source: e,
    })?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::format(
            &path,
            format!("unsupported manifest version {}", manifest.version),
        ));
    }
    let mut frames = Vec::with_capacity(manifest.frames.len());
    for mf in &manifest.frames {
        let fpath: PathBuf = dir.join(&mf.desc_file);
        let set = read_frame(&fpath, &mf.id)?;
        if set.dim() != manifest.dim {
            return Err(Error::format(
                &fpath,
                format!(
                    "frame {}: stores M = {} but manifest M = {}",
                    mf.id,
                    set.dim(),
                    manifest.dim
                ),
            ));
        }
        let pose = mf
            .pose
            .map(Pose::from_array)
            .transpose()
            .map_err(|e| Error::format(&path, format!("frame {}: {e}", mf.id)))?;
        frames.push(DatasetFrame {
            set,
            split: mf.split,
            pose,
        });
    }
    let dataset = SceneDataset {
        scene: manifest.scene,
        dim: manifest.dim,
        camera: manifest.intrinsics,
        frames,
    };
    dataset
        .validate()
        .map_err(|e| Error::format(&path, e.to_string()))?;
    Ok(dataset)
}
