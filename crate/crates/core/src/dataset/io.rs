use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma, Rgb};
use mtscene_tensor::Tensor;
use serde::{Deserialize, Serialize};

use super::Sample;
use crate::error::{Error, Result};
use crate::labels::LabelMap;
use crate::orientation::Angle;
use crate::spectrum::{ClassSpectrum, SceneSpectrum};

/// `split.json`: the ordered sample ids of one split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub split: String,
    pub samples: Vec<String>,
}

/// File locations of one sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRecord {
    pub id: String,
    pub rgb: PathBuf,
    pub depth: PathBuf,
    pub semantic: PathBuf,
    pub instance: PathBuf,
    pub orientations: Option<PathBuf>,
    pub scene: PathBuf,
}

impl SampleRecord {
    pub fn in_dir(dir: &Path, id: &str) -> Self {
        let orientations = dir.join("orientations.csv");
        Self {
            id: id.to_string(),
            rgb: dir.join("rgb.png"),
            depth: dir.join("depth.png"),
            semantic: dir.join("semantic.png"),
            instance: dir.join("instance.png"),
            orientations: orientations.exists().then_some(orientations),
            scene: dir.join("scene.txt"),
        }
    }
}

/// A split directory with its manifest.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: SplitManifest,
}

impl Dataset {
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let path = root.join("split.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest = serde_json::from_str(&text)?;
        Ok(Self { root, manifest })
    }

    pub fn create(root: impl AsRef<Path>, split: &str) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(Self {
            root,
            manifest: SplitManifest {
                split: split.to_string(),
                samples: Vec::new(),
            },
        })
    }

    pub fn sample_dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    pub fn records(&self) -> Vec<SampleRecord> {
        self.manifest
            .samples
            .iter()
            .map(|id| SampleRecord::in_dir(&self.sample_dir(id), id))
            .collect()
    }

    pub fn load(&self, id: &str, spectrum: &ClassSpectrum) -> Result<Sample> {
        load_sample(&SampleRecord::in_dir(&self.sample_dir(id), id), spectrum)
    }

    /// Writes the sample and appends it to the manifest (not yet flushed).
    pub fn add(&mut self, sample: &Sample) -> Result<()> {
        save_sample(&self.sample_dir(&sample.id), sample)?;
        if !self.manifest.samples.contains(&sample.id) {
            self.manifest.samples.push(sample.id.clone());
        }
        Ok(())
    }

    pub fn write_manifest(&self) -> Result<()> {
        let path = self.root.join("split.json");
        let text = serde_json::to_string_pretty(&self.manifest)?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

fn image_err(path: &Path, reason: impl ToString) -> Error {
    Error::Image {
        path: path.display().to_string(),
        reason: reason.to_string(),
    }
}

/// Reads an 8- or 16-bit single-channel PNG as a label map.
pub fn read_label_png(path: &Path) -> Result<LabelMap> {
    let img = image::open(path).map_err(|e| image_err(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<u32> = match img {
        image::DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(u32::from).collect(),
        image::DynamicImage::ImageLuma16(b) => b.into_raw().into_iter().map(u32::from).collect(),
        other => return Err(image_err(path, format!("expected a single-channel PNG, got {:?}", other.color()))),
    };
    LabelMap::new(h, w, data)
}

/// Writes a label map as an 8-bit PNG when every id fits, 16-bit otherwise
/// (or when `wide` is set).
pub fn write_label_png(path: &Path, map: &LabelMap, wide: bool) -> Result<()> {
    let (w, h) = (map.width() as u32, map.height() as u32);
    let max = map.data().iter().copied().max().unwrap_or(0);
    if max > u16::MAX as u32 {
        return Err(image_err(path, format!("label {max} does not fit in 16 bits")));
    }
    let res = if wide || max > u8::MAX as u32 {
        let raw: Vec<u16> = map.data().iter().map(|&v| v as u16).collect();
        ImageBuffer::<Luma<u16>, _>::from_raw(w, h, raw).expect("sized").save(path)
    } else {
        let raw: Vec<u8> = map.data().iter().map(|&v| v as u8).collect();
        ImageBuffer::<Luma<u8>, _>::from_raw(w, h, raw).expect("sized").save(path)
    };
    res.map_err(|e| image_err(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct OrientationRow {
    instance_id: u32,
    angle_deg: f64,
}

pub fn read_orientations(path: &Path) -> Result<BTreeMap<u32, Angle>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = BTreeMap::new();
    for row in rdr.deserialize() {
        let row: OrientationRow = row?;
        if !row.angle_deg.is_finite() {
            return Err(Error::Dataset {
                path: path.display().to_string(),
                reason: format!("non-finite angle for instance {}", row.instance_id),
            });
        }
        out.insert(row.instance_id, Angle::from_degrees(row.angle_deg));
    }
    Ok(out)
}

pub fn write_orientations(path: &Path, orientations: &BTreeMap<u32, Angle>) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    for (&instance_id, a) in orientations {
        wtr.serialize(OrientationRow {
            instance_id,
            angle_deg: a.degrees(),
        })?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

fn read_scene(path: &Path) -> Result<u32> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let text = text.trim();
    let scenes = SceneSpectrum::indoor();
    text.parse::<u32>()
        .ok()
        .filter(|&id| (id as usize) < scenes.len())
        .or_else(|| scenes.id_of(text))
        .ok_or_else(|| Error::Dataset {
            path: path.display().to_string(),
            reason: format!("unknown scene class '{text}'"),
        })
}

pub fn load_sample(rec: &SampleRecord, spectrum: &ClassSpectrum) -> Result<Sample> {
    let rgb_img = image::open(&rec.rgb).map_err(|e| image_err(&rec.rgb, e))?.to_rgb8();
    let (h, w) = (rgb_img.height() as usize, rgb_img.width() as usize);
    let mut rgb = vec![0.0f32; 3 * h * w];
    for (i, px) in rgb_img.pixels().enumerate() {
        for c in 0..3 {
            rgb[c * h * w + i] = px[c] as f32 / 255.0;
        }
    }

    let depth_img = image::open(&rec.depth).map_err(|e| image_err(&rec.depth, e))?;
    let image::DynamicImage::ImageLuma16(depth_img) = depth_img else {
        return Err(image_err(&rec.depth, "depth must be a 16-bit single-channel PNG"));
    };
    let depth_extents = (depth_img.height() as usize, depth_img.width() as usize);
    let depth: Vec<f32> = depth_img.into_raw().into_iter().map(|mm| mm as f32 / 1000.0).collect();

    let semantic = read_label_png(&rec.semantic)?;
    let instance = read_label_png(&rec.instance)?;
    for (actual, context) in [
        (depth_extents, "depth extents"),
        (semantic.extents(), "semantic extents"),
        (instance.extents(), "instance extents"),
    ] {
        if actual != (h, w) {
            return Err(Error::Extent {
                context,
                expected: (h, w),
                actual,
            });
        }
    }
    spectrum.check_map(&semantic, "semantic map")?;

    let orientations = match &rec.orientations {
        Some(p) => read_orientations(p)?,
        None => BTreeMap::new(),
    };
    let present = instance.histogram();
    if let Some(id) = orientations.keys().find(|id| !present.contains_key(id) || **id == 0) {
        return Err(Error::Dataset {
            path: rec.orientations.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            reason: format!("orientation given for instance {id} which is absent from the instance map"),
        });
    }

    Ok(Sample {
        id: rec.id.clone(),
        rgb: Tensor::new(vec![3, h, w], rgb)?,
        depth: Tensor::new(vec![1, h, w], depth)?,
        semantic,
        instance,
        orientations,
        scene: read_scene(&rec.scene)?,
    })
}

pub fn save_sample(dir: &Path, s: &Sample) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (h, w) = s.extents();
    let hw = h * w;
    let rgb: Vec<u8> = (0..hw)
        .flat_map(|i| (0..3).map(move |c| (c, i)))
        .map(|(c, i)| (s.rgb.data()[c * hw + i] * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    let path = dir.join("rgb.png");
    ImageBuffer::<Rgb<u8>, _>::from_raw(w as u32, h as u32, rgb)
        .expect("sized")
        .save(&path)
        .map_err(|e| image_err(&path, e))?;

    let depth: Vec<u16> = s
        .depth
        .data()
        .iter()
        .map(|m| (m * 1000.0).round().clamp(0.0, u16::MAX as f32) as u16)
        .collect();
    let path = dir.join("depth.png");
    ImageBuffer::<Luma<u16>, _>::from_raw(w as u32, h as u32, depth)
        .expect("sized")
        .save(&path)
        .map_err(|e| image_err(&path, e))?;

    if s.semantic.data().iter().any(|&v| v > u8::MAX as u32) {
        return Err(image_err(&dir.join("semantic.png"), "semantic ids must fit in 8 bits"));
    }
    write_label_png(&dir.join("semantic.png"), &s.semantic, false)?;
    write_label_png(&dir.join("instance.png"), &s.instance, true)?;
    let csv_path = dir.join("orientations.csv");
    if s.orientations.is_empty() {
        if csv_path.exists() {
            fs::remove_file(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        }
    } else {
        write_orientations(&csv_path, &s.orientations)?;
    }
    let scene = SceneSpectrum::indoor()
        .name_of(s.scene)
        .map(str::to_string)
        .unwrap_or_else(|| s.scene.to_string());
    let path = dir.join("scene.txt");
    fs::write(&path, format!("{scene}\n")).map_err(|e| Error::io(&path, e))
}
