//! Panoptic merging of semantic and class-agnostic instance predictions.

use std::collections::BTreeMap;
use std::path::Path;

use image::{ImageBuffer, Luma};

use crate::codec::DetectedInstance;
use crate::error::{Error, Result};
use crate::labels::{LabelMap, Mask};
use crate::spectrum::ClassSpectrum;

/// Instance ids must stay below this to fit the PNG encoding.
pub const PANOPTIC_DIVISOR: u32 = 1000;

/// Per-pixel `(semantic id, instance id)`; instance id 0 marks stuff and
/// unknown pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanopticMap {
    pub semantic: LabelMap,
    pub instance: LabelMap,
}

impl PanopticMap {
    pub fn new(semantic: LabelMap, instance: LabelMap) -> Result<Self> {
        instance.expect_extents(semantic.extents(), "panoptic instance map")?;
        Ok(Self { semantic, instance })
    }

    pub fn extents(&self) -> (usize, usize) {
        self.semantic.extents()
    }

    /// Checks that every instance id lives under exactly one semantic class
    /// and that stuff pixels carry no instance.
    pub fn validate(&self, spectrum: &ClassSpectrum) -> Result<()> {
        let mut owner: BTreeMap<u32, u32> = BTreeMap::new();
        for (&s, &i) in self.semantic.data().iter().zip(self.instance.data()) {
            if i == 0 {
                continue;
            }
            if spectrum.is_stuff(s) || spectrum.is_void(s) {
                return Err(Error::Merge(format!("instance {i} placed on non-thing class {s}")));
            }
            if let Some(prev) = owner.insert(i, s) {
                if prev != s {
                    return Err(Error::Merge(format!("instance {i} spans classes {prev} and {s}")));
                }
            }
        }
        Ok(())
    }

    /// `semantic · 1000 + instance` per pixel.
    pub fn encode(&self) -> Result<Vec<u16>> {
        self.semantic
            .data()
            .iter()
            .zip(self.instance.data())
            .map(|(&s, &i)| {
                if i >= PANOPTIC_DIVISOR {
                    return Err(Error::Merge(format!("instance id {i} must be < {PANOPTIC_DIVISOR}")));
                }
                u16::try_from(s * PANOPTIC_DIVISOR + i)
                    .map_err(|_| Error::Merge(format!("semantic id {s} too large for 16-bit encoding")))
            })
            .collect()
    }

    pub fn decode(height: usize, width: usize, values: &[u16]) -> Result<Self> {
        let semantic = values.iter().map(|&v| v as u32 / PANOPTIC_DIVISOR).collect();
        let instance = values.iter().map(|&v| v as u32 % PANOPTIC_DIVISOR).collect();
        Self::new(LabelMap::new(height, width, semantic)?, LabelMap::new(height, width, instance)?)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let (h, w) = self.extents();
        ImageBuffer::<Luma<u16>, _>::from_raw(w as u32, h as u32, self.encode()?)
            .expect("sized")
            .save(path)
            .map_err(|e| Error::Image {
                path: path.display().to_string(),
                reason: e.to_string(),
            })
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let err = |reason: String| Error::Image {
            path: path.display().to_string(),
            reason,
        };
        let img = image::open(path).map_err(|e| err(e.to_string()))?;
        let image::DynamicImage::ImageLuma16(buf) = img else {
            return Err(err("panoptic maps are 16-bit single-channel PNGs".into()));
        };
        let (w, h) = buf.dimensions();
        Self::decode(h as usize, w as usize, buf.as_raw())
    }

    /// Rebuilds the instance list (pixels and voted classes) from the map.
    pub fn instances(&self) -> Vec<DetectedInstance> {
        let mut inst = crate::codec::label_map_to_instances(&self.instance);
        for d in &mut inst {
            d.semantic_class = Some(self.semantic.data()[d.pixels[0] as usize]);
        }
        inst
    }
}

/// True exactly on thing-class pixels.
pub fn foreground_mask(sem: &LabelMap, spectrum: &ClassSpectrum) -> Result<Mask> {
    spectrum.check_map(sem, "foreground_mask")?;
    Ok(Mask::from_fn(sem, |id| spectrum.is_thing(id)))
}

/// Most frequent thing class among the instance's pixels; ties go to the
/// lower class id. `None` when no pixel carries a thing class.
pub fn majority_vote(instance: &DetectedInstance, sem: &LabelMap, spectrum: &ClassSpectrum) -> Result<Option<u32>> {
    if instance.pixels.is_empty() {
        return Err(Error::Merge(format!("instance {} has no pixels", instance.id)));
    }
    let mut votes = vec![0usize; spectrum.len()];
    for &p in &instance.pixels {
        let id = *sem
            .data()
            .get(p as usize)
            .ok_or_else(|| Error::Merge(format!("pixel {p} outside the semantic map")))?;
        if !spectrum.contains(id) {
            return Err(Error::UnknownClass {
                context: "majority_vote",
                id,
                spectrum: spectrum.name.clone(),
            });
        }
        if spectrum.is_thing(id) {
            votes[id as usize] += 1;
        }
    }
    let best = votes
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)));
    Ok(best.map(|(id, _)| id as u32))
}

/// Fuses the semantic map with instances. Thing pixels of an instance take
/// the voted class and the instance id; every other pixel (including stuff
/// or void pixels the instance happened to cover) keeps its semantic class
/// with instance id 0. Instances whose vote finds no thing pixel are
/// dropped and their pixels left to the semantic prediction.
///
/// Returns the map together with the surviving instances (voted classes
/// filled in).
pub fn merge(
    sem: &LabelMap,
    instances: &[DetectedInstance],
    spectrum: &ClassSpectrum,
) -> Result<(PanopticMap, Vec<DetectedInstance>)> {
    spectrum.check_map(sem, "merge")?;
    let (h, w) = sem.extents();
    let mut owner = vec![0u32; h * w];
    let mut semantic = sem.clone();
    let mut instance = LabelMap::filled(h, w, 0);
    let mut kept = Vec::new();
    for inst in instances {
        if inst.id == 0 {
            return Err(Error::Merge("instance id 0 is reserved".into()));
        }
        for &p in &inst.pixels {
            let slot = owner
                .get_mut(p as usize)
                .ok_or_else(|| Error::Merge(format!("pixel {p} outside a {h}x{w} map")))?;
            if *slot != 0 {
                return Err(Error::Merge(format!("pixel {p} claimed by instances {} and {}", *slot, inst.id)));
            }
            *slot = inst.id;
        }
        let Some(class) = majority_vote(inst, sem, spectrum)? else {
            continue;
        };
        let members: Vec<u32> = inst
            .pixels
            .iter()
            .copied()
            .filter(|&p| spectrum.is_thing(sem.data()[p as usize]))
            .collect();
        for &p in &members {
            semantic.data_mut()[p as usize] = class;
            instance.data_mut()[p as usize] = inst.id;
        }
        kept.push(DetectedInstance {
            semantic_class: Some(class),
            pixels: members,
            ..inst.clone()
        });
    }
    Ok((PanopticMap { semantic, instance }, kept))
}
