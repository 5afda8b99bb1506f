//! Prediction directories mirror a dataset split:
//!
//! ```text
//! <dir>/split.json
//! <dir>/<id>/semantic.png          class ids
//! <dir>/<id>/semantic_logits.emt   C×H×W (forward only)
//! <dir>/<id>/side_<k>.emt          side-output logits (forward only)
//! <dir>/<id>/center.emt            1×H×W heatmap
//! <dir>/<id>/offset.emt            2×H×W normalized offsets
//! <dir>/<id>/orientation.emt       2×H×W biternions
//! <dir>/<id>/scene.json            {"scene": id, "logits": [...]}
//! <dir>/<id>/instances.png|json    decode output
//! <dir>/<id>/panoptic.png|json     merge output
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mtscene_core::dataset::SplitManifest;
use mtscene_tensor::{read_tensor, write_tensor, Tensor};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const SEMANTIC: &str = "semantic.png";
pub const SEMANTIC_LOGITS: &str = "semantic_logits.emt";
pub const CENTER: &str = "center.emt";
pub const OFFSET: &str = "offset.emt";
pub const ORIENTATION: &str = "orientation.emt";
pub const SCENE: &str = "scene.json";
pub const CENTERS: &str = "centers.json";
pub const INSTANCES_PNG: &str = "instances.png";
pub const INSTANCES_JSON: &str = "instances.json";
pub const PANOPTIC_PNG: &str = "panoptic.png";
pub const PANOPTIC_JSON: &str = "panoptic.json";

pub fn side_output(k: usize) -> String {
    format!("side_{k}.emt")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub scene: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logits: Option<Vec<f32>>,
}

pub struct PredDir {
    pub root: PathBuf,
}

impl PredDir {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }

    pub fn ids(&self) -> Result<Vec<String>> {
        let manifest: SplitManifest = read_json(&self.root.join("split.json"))?;
        Ok(manifest.samples)
    }

    pub fn write_ids(&self, split: &str, ids: &[String]) -> Result<()> {
        let manifest = SplitManifest {
            split: split.to_string(),
            samples: ids.to_vec(),
        };
        write_json(&self.root.join("split.json"), &manifest)
    }

    /// Path of `name` inside the sample directory, creating the directory.
    pub fn file(&self, id: &str, name: &str) -> Result<PathBuf> {
        let dir = self.root.join(id);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir.join(name))
    }

    pub fn path(&self, id: &str, name: &str) -> PathBuf {
        self.root.join(id).join(name)
    }

    pub fn read_tensor(&self, id: &str, name: &str) -> Result<Tensor> {
        let path = self.path(id, name);
        read_tensor(&path).with_context(|| format!("reading {}", path.display()))
    }

    pub fn read_optional_tensor(&self, id: &str, name: &str) -> Result<Option<Tensor>> {
        if self.path(id, name).exists() {
            self.read_tensor(id, name).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn write_tensor(&self, id: &str, name: &str, t: &Tensor) -> Result<()> {
        let path = self.file(id, name)?;
        write_tensor(&path, t).with_context(|| format!("writing {}", path.display()))
    }

    /// Copies files that later stages need when reading and writing
    /// different directories.
    pub fn carry(&self, to: &PredDir, id: &str, names: &[&str]) -> Result<()> {
        if self.root == to.root {
            return Ok(());
        }
        for name in names {
            let src = self.path(id, name);
            if src.exists() {
                let dst = to.file(id, name)?;
                fs::copy(&src, &dst).with_context(|| format!("copying {} to {}", src.display(), dst.display()))?;
            }
        }
        Ok(())
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}
