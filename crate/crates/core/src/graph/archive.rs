//! Weight archives: a directory of EMT1 tensor files plus `manifest.json`
//! mapping parameter names to files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use mtscene_tensor::{read_tensor, write_tensor, Tensor};
use serde::{Deserialize, Serialize};

use super::{Graph, GraphConfig, ParamVisitor};
use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
const FORMAT: &str = "mtscene-weights/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightManifest {
    pub format: String,
    pub config: GraphConfig,
    pub tensors: BTreeMap<String, String>,
}

fn file_name(param: &str) -> String {
    format!("{param}.emt")
}

pub fn save_weights(graph: &mut Graph, dir: &Path) -> Result<()> {
    struct Writer<'a> {
        dir: &'a Path,
        tensors: BTreeMap<String, String>,
    }
    impl ParamVisitor for Writer<'_> {
        fn tensor(&mut self, name: &str, t: &mut Tensor) -> Result<()> {
            let file = file_name(name);
            write_tensor(self.dir.join(&file), t)?;
            if self.tensors.insert(name.to_string(), file).is_some() {
                return Err(Error::Graph(format!("duplicate parameter name {name}")));
            }
            Ok(())
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut w = Writer {
        dir,
        tensors: BTreeMap::new(),
    };
    graph.visit_params(&mut w)?;
    let manifest = WeightManifest {
        format: FORMAT.into(),
        config: graph.config.clone(),
        tensors: w.tensors,
    };
    let path = dir.join(MANIFEST);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
}

/// Loads an archive. Every parameter of the configured graph must be
/// present with the expected shape, and the archive may not carry extras.
pub fn load_weights(dir: &Path) -> Result<Graph> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: WeightManifest = serde_json::from_str(&text)?;
    if manifest.format != FORMAT {
        return Err(Error::Graph(format!("unsupported archive format '{}'", manifest.format)));
    }
    struct Reader<'a> {
        dir: &'a Path,
        manifest: &'a WeightManifest,
        seen: usize,
    }
    impl ParamVisitor for Reader<'_> {
        fn tensor(&mut self, name: &str, t: &mut Tensor) -> Result<()> {
            let file = self
                .manifest
                .tensors
                .get(name)
                .ok_or_else(|| Error::Graph(format!("archive lacks parameter {name}")))?;
            let loaded = read_tensor(self.dir.join(file))?;
            if loaded.shape() != t.shape() {
                return Err(Error::Graph(format!(
                    "parameter {name}: archive shape {:?}, graph expects {:?}",
                    loaded.shape(),
                    t.shape()
                )));
            }
            *t = loaded;
            self.seen += 1;
            Ok(())
        }
    }
    let mut graph = Graph::build(manifest.config.clone(), 0)?;
    let mut r = Reader {
        dir,
        manifest: &manifest,
        seen: 0,
    };
    graph.visit_params(&mut r)?;
    if r.seen != manifest.tensors.len() {
        return Err(Error::Graph(format!(
            "archive has {} tensors, graph uses {}",
            manifest.tensors.len(),
            r.seen
        )));
    }
    Ok(graph)
}
