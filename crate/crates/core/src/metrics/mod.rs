//! Evaluation: mIoU, panoptic quality, MAAE in both settings and balanced
//! scene accuracy, accumulated over images into a [`MetricReport`].

mod confusion;
mod maae;
mod pq;
mod scene;
mod sum;

use std::collections::BTreeMap;

use mtscene_tensor::Tensor;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use confusion::{miou, ConfusionMatrix, IouReport};
pub use maae::{maae, pairing, pairings, GtInstances, MaaePairing, OrientationEval, PanopticMatched};
pub use pq::{panoptic_quality, ClassTally, PqAccumulator, Quality, SegmentMatch};
pub use scene::balanced_accuracy;
pub use sum::CompensatedSum;

use crate::error::Result;
use crate::orientation::{angular_error, Angle};
use crate::panoptic::PanopticMap;
use crate::spectrum::ClassSpectrum;

/// One image worth of predictions and ground truth.
#[derive(Debug, Clone, Copy)]
pub struct EvalImage<'a> {
    pub pred: &'a PanopticMap,
    pub gt: &'a PanopticMap,
    pub gt_orientations: &'a BTreeMap<u32, Angle>,
    pub pred_orientations: &'a BTreeMap<u32, Angle>,
    pub orientation_field: Option<&'a Tensor>,
    pub pred_scene: Option<u32>,
    pub gt_scene: Option<u32>,
}

#[derive(Debug, Clone, Copy, Default)]
struct ErrorSum {
    sum: CompensatedSum,
    n: u64,
}

#[derive(Debug, Clone)]
struct ImageTally {
    confusion: ConfusionMatrix,
    pq: PqAccumulator,
    maae: Vec<ErrorSum>,
    scene: Option<(u32, u32)>,
}

fn tally_image(img: &EvalImage<'_>, spectrum: &ClassSpectrum, pairings: &[Box<dyn MaaePairing>]) -> Result<ImageTally> {
    let (h, w) = img.gt.extents();
    let resized;
    let pred = if img.pred.extents() == (h, w) {
        img.pred
    } else {
        resized = PanopticMap::new(img.pred.semantic.resize_nearest(h, w), img.pred.instance.resize_nearest(h, w))?;
        &resized
    };
    let mut confusion = ConfusionMatrix::new(spectrum);
    confusion.add(&pred.semantic, &img.gt.semantic)?;
    let mut pq = PqAccumulator::new(spectrum);
    let matches = pq.add(pred, img.gt, spectrum)?;

    let mut class_of: BTreeMap<u32, u32> = BTreeMap::new();
    for (&s, &i) in img.gt.semantic.data().iter().zip(img.gt.instance.data()) {
        if i > 0 {
            class_of.entry(i).or_insert(s);
        }
    }
    let gt_orientations: BTreeMap<u32, Angle> = img
        .gt_orientations
        .iter()
        .filter(|(id, _)| class_of.get(id).is_some_and(|&c| spectrum.is_orientation_relevant(c)))
        .map(|(&id, &a)| (id, a))
        .collect();
    let eval = OrientationEval {
        gt_instances: &img.gt.instance,
        gt_orientations: &gt_orientations,
        field: img.orientation_field,
        pred_orientations: img.pred_orientations,
        matches: &matches,
    };
    let maae = pairings
        .iter()
        .map(|p| {
            if p.name() == GtInstances.name() && img.orientation_field.is_none() {
                return Ok(ErrorSum::default());
            }
            let mut acc = ErrorSum::default();
            for (pred, gt) in p.pairs(&eval)? {
                acc.sum.add(angular_error(pred, gt));
                acc.n += 1;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ImageTally {
        confusion,
        pq,
        maae,
        scene: img.pred_scene.zip(img.gt_scene),
    })
}

/// Per-class entries of a [`MetricReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub id: u32,
    pub name: String,
    pub stuff: bool,
    pub excluded: bool,
    pub iou: Option<f64>,
    pub pq: Option<f64>,
    pub rq: Option<f64>,
    pub sq: Option<f64>,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub spectrum: String,
    pub images: usize,
    pub miou: f64,
    pub pq: Option<f64>,
    pub rq: Option<f64>,
    pub sq: Option<f64>,
    pub pq_stuff: Option<f64>,
    pub rq_stuff: Option<f64>,
    pub sq_stuff: Option<f64>,
    pub pq_things: Option<f64>,
    pub rq_things: Option<f64>,
    pub sq_things: Option<f64>,
    /// MAAE over ground-truth instances.
    pub maae_gt: Option<f64>,
    /// MAAE over instances matched after panoptic merging.
    pub maae_matched: Option<f64>,
    pub maae_gt_instances: u64,
    pub maae_matched_instances: u64,
    pub bacc: Option<f64>,
    pub per_class: Vec<ClassReport>,
}

/// Accumulates images into dataset-level metrics. Image order never
/// affects integer counts; float sums are reduced in input order.
pub struct Evaluator {
    spectrum: ClassSpectrum,
    pairings: Vec<Box<dyn MaaePairing>>,
    confusion: ConfusionMatrix,
    pq: PqAccumulator,
    maae: Vec<ErrorSum>,
    scenes: (Vec<u32>, Vec<u32>),
    images: usize,
}

impl Evaluator {
    pub fn new(spectrum: ClassSpectrum) -> Self {
        let pairings = pairings();
        Self {
            confusion: ConfusionMatrix::new(&spectrum),
            pq: PqAccumulator::new(&spectrum),
            maae: vec![ErrorSum::default(); pairings.len()],
            pairings,
            spectrum,
            scenes: (Vec::new(), Vec::new()),
            images: 0,
        }
    }

    pub fn spectrum(&self) -> &ClassSpectrum {
        &self.spectrum
    }

    fn absorb(&mut self, t: ImageTally) {
        self.confusion.merge(&t.confusion);
        self.pq.merge(&t.pq);
        for (a, b) in self.maae.iter_mut().zip(&t.maae) {
            a.sum.merge(&b.sum);
            a.n += b.n;
        }
        if let Some((p, g)) = t.scene {
            self.scenes.0.push(p);
            self.scenes.1.push(g);
        }
        self.images += 1;
    }

    pub fn add(&mut self, img: &EvalImage<'_>) -> Result<()> {
        let t = tally_image(img, &self.spectrum, &self.pairings)?;
        self.absorb(t);
        Ok(())
    }

    /// Evaluates images in parallel, then reduces sequentially in order.
    pub fn add_all(&mut self, imgs: &[EvalImage<'_>]) -> Result<()> {
        let tallies: Vec<Result<ImageTally>> = imgs
            .par_iter()
            .map(|img| tally_image(img, &self.spectrum, &self.pairings))
            .collect();
        for t in tallies {
            self.absorb(t?);
        }
        Ok(())
    }

    pub fn report(&self) -> Result<MetricReport> {
        let s = &self.spectrum;
        let ious: BTreeMap<u32, Option<f64>> = self.confusion.ious().into_iter().collect();
        let per_class = (0..s.len() as u32)
            .filter(|&c| !s.is_void(c))
            .map(|c| {
                let t = &self.pq.tallies[c as usize];
                let counted = t.counted();
                ClassReport {
                    id: c,
                    name: s.name_of(c).unwrap_or_default().to_string(),
                    stuff: s.is_stuff(c),
                    excluded: s.eval_excluded.contains(&c),
                    iou: ious.get(&c).copied().flatten(),
                    pq: counted.then(|| t.pq()),
                    rq: counted.then(|| t.rq()),
                    sq: counted.then(|| t.sq()),
                    tp: t.tp,
                    fp: t.fp,
                    fn_: t.fn_,
                }
            })
            .collect();
        let (all, stuff, things) = (self.pq.all(s), self.pq.stuff(s), self.pq.things(s));
        let mean = |e: &ErrorSum| (e.n > 0).then(|| e.sum.value() / e.n as f64);
        let bacc = if self.scenes.1.iter().any(|&g| g != 0) {
            Some(balanced_accuracy(&self.scenes.0, &self.scenes.1, 0)?)
        } else {
            None
        };
        Ok(MetricReport {
            spectrum: s.name.clone(),
            images: self.images,
            miou: self.confusion.miou()?,
            pq: all.map(|q| q.pq),
            rq: all.map(|q| q.rq),
            sq: all.map(|q| q.sq),
            pq_stuff: stuff.map(|q| q.pq),
            rq_stuff: stuff.map(|q| q.rq),
            sq_stuff: stuff.map(|q| q.sq),
            pq_things: things.map(|q| q.pq),
            rq_things: things.map(|q| q.rq),
            sq_things: things.map(|q| q.sq),
            maae_gt: mean(&self.maae[0]),
            maae_matched: mean(&self.maae[1]),
            maae_gt_instances: self.maae[0].n,
            maae_matched_instances: self.maae[1].n,
            bacc,
            per_class,
        })
    }
}
