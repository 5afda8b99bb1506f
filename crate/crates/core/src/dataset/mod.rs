//! On-disk dataset contract.
//!
//! ```text
//! <split>/split.json
//! <split>/<sample_id>/rgb.png           8-bit RGB
//! <split>/<sample_id>/depth.png         16-bit, millimeters, 0 = invalid
//! <split>/<sample_id>/semantic.png      8-bit class ids, 0 = void
//! <split>/<sample_id>/instance.png      16-bit instance ids, 0 = none
//! <split>/<sample_id>/orientations.csv  instance_id,angle_deg (optional)
//! <split>/<sample_id>/scene.txt         scene class name
//! ```

mod io;
mod synth;

pub use io::{
    load_sample, read_label_png, read_orientations, save_sample, write_label_png, write_orientations, Dataset,
    SampleRecord, SplitManifest,
};
pub use synth::{synth_scene, SynthOptions};

use std::collections::BTreeMap;

use mtscene_tensor::Tensor;

use crate::error::{Error, Result};
use crate::labels::LabelMap;
use crate::orientation::Angle;

/// Minimum instance area as a fraction of the image area.
pub const MIN_INSTANCE_FRACTION: f64 = 0.0025;

/// A fully loaded sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    /// `3×H×W`, values in `[0, 1]`.
    pub rgb: Tensor,
    /// `1×H×W`, meters; 0 marks invalid depth.
    pub depth: Tensor,
    pub semantic: LabelMap,
    pub instance: LabelMap,
    pub orientations: BTreeMap<u32, Angle>,
    pub scene: u32,
}

impl Sample {
    pub fn extents(&self) -> (usize, usize) {
        self.semantic.extents()
    }
}

/// Relabels instances covering fewer than `min_fraction · H · W` pixels to 0.
pub fn filter_small_instances(inst: &LabelMap, min_fraction: f64) -> Result<LabelMap> {
    if !(min_fraction > 0.0 && min_fraction < 1.0) {
        return Err(Error::config("min_fraction", format!("must lie in (0, 1), got {min_fraction}")));
    }
    let threshold = min_fraction * inst.len() as f64;
    let hist = inst.histogram();
    let mut out = inst.clone();
    for v in out.data_mut() {
        if *v != 0 && (hist[v] as f64) < threshold {
            *v = 0;
        }
    }
    Ok(out)
}
