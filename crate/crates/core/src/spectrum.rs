//! Semantic and scene class spectra. The stuff/thing split, the
//! orientation-relevant subset and evaluation exclusions are data, shipped as
//! versioned JSON files.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::LabelMap;

const NYUV2_40: &str = include_str!("../spectra/nyuv2_40.json");
const SUNRGBD_37: &str = include_str!("../spectra/sunrgbd_37.json");
const SCENES: &str = include_str!("../spectra/scenes.json");

/// Ordered semantic classes; the index of a name is its id and id
/// `void_id` is the void class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSpectrum {
    pub name: String,
    pub version: u32,
    pub void_id: u32,
    pub classes: Vec<String>,
    pub stuff: BTreeSet<u32>,
    pub orientation: BTreeSet<u32>,
    #[serde(default)]
    pub eval_excluded: BTreeSet<u32>,
}

impl ClassSpectrum {
    /// NYUv2 in its 40-class setting.
    pub fn nyuv2_40() -> Self {
        Self::from_json(NYUV2_40).expect("bundled spectrum is valid")
    }

    /// SUNRGB-D: the NYUv2 classes without the three filler classes, with
    /// floor mat and shower curtain excluded from panoptic aggregation.
    pub fn sunrgbd_37() -> Self {
        Self::from_json(SUNRGBD_37).expect("bundled spectrum is valid")
    }

    pub fn bundled(name: &str) -> Option<Self> {
        match name {
            "nyuv2-40" => Some(Self::nyuv2_40()),
            "sunrgbd-37" => Some(Self::sunrgbd_37()),
            _ => None,
        }
    }

    /// Resolves a bundled name or a JSON file path.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if let Some(s) = Self::bundled(name_or_path) {
            return Ok(s);
        }
        let text = std::fs::read_to_string(name_or_path).map_err(|e| Error::io(name_or_path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spectrum serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_json()).map_err(|e| Error::io(path, e))
    }

    fn validate(&self) -> Result<()> {
        let n = self.classes.len() as u32;
        if n < 3 {
            return Err(Error::config("spectrum", "needs void plus at least two classes"));
        }
        if self.void_id >= n {
            return Err(Error::config("spectrum", format!("void id {} out of range", self.void_id)));
        }
        for (set, label) in [
            (&self.stuff, "stuff"),
            (&self.orientation, "orientation"),
            (&self.eval_excluded, "eval_excluded"),
        ] {
            if let Some(&bad) = set.iter().find(|&&id| id >= n || id == self.void_id) {
                return Err(Error::config("spectrum", format!("{label} id {bad} is void or out of range")));
            }
        }
        if let Some(&bad) = self.orientation.intersection(&self.stuff).next() {
            return Err(Error::config("spectrum", format!("orientation class {bad} is a stuff class")));
        }
        Ok(())
    }

    /// Total number of ids including void.
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Number of non-void classes; network logits have this many channels.
    pub fn num_classes(&self) -> usize {
        self.classes.len() - 1
    }

    pub fn contains(&self, id: u32) -> bool {
        (id as usize) < self.classes.len()
    }

    pub fn is_void(&self, id: u32) -> bool {
        id == self.void_id
    }

    pub fn is_stuff(&self, id: u32) -> bool {
        self.stuff.contains(&id)
    }

    pub fn is_thing(&self, id: u32) -> bool {
        self.contains(id) && !self.is_void(id) && !self.is_stuff(id)
    }

    pub fn is_orientation_relevant(&self, id: u32) -> bool {
        self.orientation.contains(&id)
    }

    pub fn thing_ids(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.classes.len() as u32).filter(|&id| self.is_thing(id))
    }

    pub fn id_of(&self, name: &str) -> Option<u32> {
        self.classes.iter().position(|c| c == name).map(|i| i as u32)
    }

    pub fn name_of(&self, id: u32) -> Option<&str> {
        self.classes.get(id as usize).map(String::as_str)
    }

    /// Logit channel of a non-void class id (void is assumed to be id 0).
    pub fn channel_of(&self, id: u32) -> Option<usize> {
        (self.contains(id) && !self.is_void(id)).then(|| if id > self.void_id { id as usize - 1 } else { id as usize })
    }

    /// Inverse of [`Self::channel_of`].
    pub fn id_of_channel(&self, channel: usize) -> u32 {
        if (channel as u32) < self.void_id {
            channel as u32
        } else {
            channel as u32 + 1
        }
    }

    pub fn check_map(&self, map: &LabelMap, context: &'static str) -> Result<()> {
        match map.data().iter().find(|&&id| !self.contains(id)) {
            Some(&id) => Err(Error::UnknownClass {
                context,
                id,
                spectrum: self.name.clone(),
            }),
            None => Ok(()),
        }
    }
}

/// Unified indoor scene classes; id 0 is void.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneSpectrum {
    pub name: String,
    pub version: u32,
    pub classes: Vec<String>,
}

impl SceneSpectrum {
    pub const CLASSES: [&'static str; 11] = [
        "void",
        "bathroom",
        "bedroom",
        "dining room",
        "discussion room",
        "hallway",
        "kitchen",
        "living room",
        "office",
        "other indoor",
        "stairs",
    ];

    pub fn indoor() -> Self {
        Self::from_json(SCENES).expect("bundled scene spectrum is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        if s.classes.iter().map(String::as_str).ne(Self::CLASSES) {
            return Err(Error::config("scene spectrum", "classes must be the 11 unified indoor scene classes in order"));
        }
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene spectrum serializes")
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn id_of(&self, name: &str) -> Option<u32> {
        self.classes.iter().position(|c| c == name).map(|i| i as u32)
    }

    pub fn name_of(&self, id: u32) -> Option<&str> {
        self.classes.get(id as usize).map(String::as_str)
    }

    /// Scene classifier outputs cover every class except void.
    pub fn num_classes(&self) -> usize {
        self.classes.len() - 1
    }
}
