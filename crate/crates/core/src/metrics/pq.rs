use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::sum::CompensatedSum;
use crate::error::{Error, Result};
use crate::panoptic::PanopticMap;
use crate::spectrum::ClassSpectrum;

/// A ground-truth and a predicted segment of the same class with IoU > 0.5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentMatch {
    pub class: u32,
    pub gt_instance: u32,
    pub pred_instance: u32,
    pub iou: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClassTally {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub iou_sum: CompensatedSum,
}

impl ClassTally {
    pub fn denominator(&self) -> f64 {
        self.tp as f64 + 0.5 * self.fp as f64 + 0.5 * self.fn_ as f64
    }

    pub fn counted(&self) -> bool {
        self.tp + self.fp + self.fn_ > 0
    }

    pub fn pq(&self) -> f64 {
        self.iou_sum.value() / self.denominator()
    }

    pub fn rq(&self) -> f64 {
        self.tp as f64 / self.denominator()
    }

    pub fn sq(&self) -> f64 {
        if self.tp == 0 {
            0.0
        } else {
            self.iou_sum.value() / self.tp as f64
        }
    }
}

/// Aggregated PQ, RQ and SQ over a set of classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quality {
    pub pq: f64,
    pub rq: f64,
    pub sq: f64,
    pub classes: usize,
}

/// Per-class TP/FP/FN and matched IoU sums, accumulated over images.
#[derive(Debug, Clone, PartialEq)]
pub struct PqAccumulator {
    pub tallies: Vec<ClassTally>,
}

type Segment = (u32, u32);

fn segments(map: &PanopticMap, valid: &[bool], spectrum: &ClassSpectrum, gt: bool) -> Result<Vec<Option<Segment>>> {
    map.semantic
        .data()
        .iter()
        .zip(map.instance.data())
        .zip(valid)
        .map(|((&s, &i), &ok)| {
            if !spectrum.contains(s) {
                return Err(Error::Metric(format!(
                    "{} panoptic map carries class {s} outside spectrum '{}'",
                    if gt { "ground-truth" } else { "predicted" },
                    spectrum.name
                )));
            }
            if spectrum.is_stuff(s) && i != 0 {
                return Err(Error::Metric(format!("stuff class {s} carries instance id {i}")));
            }
            Ok(match () {
                _ if !ok || spectrum.is_void(s) => None,
                _ if spectrum.is_stuff(s) => Some((s, 0)),
                _ if i == 0 => None,
                _ => Some((s, i)),
            })
        })
        .collect()
}

impl PqAccumulator {
    pub fn new(spectrum: &ClassSpectrum) -> Self {
        Self {
            tallies: vec![ClassTally::default(); spectrum.len()],
        }
    }

    /// Adds one image and returns its thing-segment matches.
    ///
    /// Only pixels with non-void ground truth take part; ground-truth thing
    /// pixels without an instance id are treated like void. Predicted thing
    /// pixels without an instance id belong to no segment. Each stuff class
    /// forms a single segment.
    pub fn add(&mut self, pred: &PanopticMap, gt: &PanopticMap, spectrum: &ClassSpectrum) -> Result<Vec<SegmentMatch>> {
        if pred.extents() != gt.extents() {
            return Err(Error::Extent {
                context: "panoptic quality",
                expected: gt.extents(),
                actual: pred.extents(),
            });
        }
        let valid: Vec<bool> = gt
            .semantic
            .data()
            .iter()
            .zip(gt.instance.data())
            .map(|(&s, &i)| !spectrum.is_void(s) && !(spectrum.is_thing(s) && i == 0))
            .collect();
        let gt_seg = segments(gt, &valid, spectrum, true)?;
        let pred_seg = segments(pred, &valid, spectrum, false)?;

        let mut gt_area: BTreeMap<Segment, u64> = BTreeMap::new();
        let mut pred_area: BTreeMap<Segment, u64> = BTreeMap::new();
        let mut inter: HashMap<(Segment, Segment), u64> = HashMap::new();
        for (g, p) in gt_seg.iter().zip(&pred_seg) {
            if let Some(g) = g {
                *gt_area.entry(*g).or_default() += 1;
            }
            if let Some(p) = p {
                *pred_area.entry(*p).or_default() += 1;
            }
            if let (Some(g), Some(p)) = (g, p) {
                if g.0 == p.0 {
                    *inter.entry((*g, *p)).or_default() += 1;
                }
            }
        }

        let mut matched_gt = BTreeMap::new();
        let mut matched_pred = BTreeMap::new();
        let mut pairs: Vec<_> = inter.into_iter().collect();
        pairs.sort_unstable_by_key(|(k, _)| *k);
        let mut matches = Vec::new();
        for ((g, p), n) in pairs {
            let union = gt_area[&g] + pred_area[&p] - n;
            let iou = n as f64 / union as f64;
            if iou > 0.5 {
                matched_gt.insert(g, ());
                matched_pred.insert(p, ());
                let t = &mut self.tallies[g.0 as usize];
                t.tp += 1;
                t.iou_sum.add(iou);
                if spectrum.is_thing(g.0) {
                    matches.push(SegmentMatch {
                        class: g.0,
                        gt_instance: g.1,
                        pred_instance: p.1,
                        iou,
                    });
                }
            }
        }
        for g in gt_area.keys().filter(|g| !matched_gt.contains_key(*g)) {
            self.tallies[g.0 as usize].fn_ += 1;
        }
        for p in pred_area.keys().filter(|p| !matched_pred.contains_key(*p)) {
            self.tallies[p.0 as usize].fp += 1;
        }
        Ok(matches)
    }

    pub fn merge(&mut self, other: &PqAccumulator) {
        for (a, b) in self.tallies.iter_mut().zip(&other.tallies) {
            a.tp += b.tp;
            a.fp += b.fp;
            a.fn_ += b.fn_;
            a.iou_sum.merge(&b.iou_sum);
        }
    }

    /// Classes that count towards the aggregates: non-void, not excluded
    /// from evaluation, with at least one TP, FP or FN.
    pub fn counted_classes<'a>(&'a self, spectrum: &'a ClassSpectrum) -> impl Iterator<Item = u32> + 'a {
        (0..self.tallies.len() as u32).filter(move |&c| {
            !spectrum.is_void(c) && !spectrum.eval_excluded.contains(&c) && self.tallies[c as usize].counted()
        })
    }

    fn average(&self, classes: impl Iterator<Item = u32>) -> Option<Quality> {
        let (mut pq, mut rq, mut sq, mut n) = (0.0, 0.0, 0.0, 0usize);
        for c in classes {
            let t = &self.tallies[c as usize];
            pq += t.pq();
            rq += t.rq();
            sq += t.sq();
            n += 1;
        }
        (n > 0).then(|| Quality {
            pq: pq / n as f64,
            rq: rq / n as f64,
            sq: sq / n as f64,
            classes: n,
        })
    }

    pub fn all(&self, spectrum: &ClassSpectrum) -> Option<Quality> {
        self.average(self.counted_classes(spectrum))
    }

    pub fn stuff(&self, spectrum: &ClassSpectrum) -> Option<Quality> {
        self.average(self.counted_classes(spectrum).filter(|&c| spectrum.is_stuff(c)))
    }

    pub fn things(&self, spectrum: &ClassSpectrum) -> Option<Quality> {
        self.average(self.counted_classes(spectrum).filter(|&c| spectrum.is_thing(c)))
    }
}

/// Single-image panoptic quality.
pub fn panoptic_quality(
    pred: &PanopticMap,
    gt: &PanopticMap,
    spectrum: &ClassSpectrum,
) -> Result<(PqAccumulator, Vec<SegmentMatch>)> {
    let mut acc = PqAccumulator::new(spectrum);
    let matches = acc.add(pred, gt, spectrum)?;
    Ok((acc, matches))
}
