//! Mean absolute angular error under interchangeable instance pairings.

use std::collections::BTreeMap;

use mtscene_tensor::Tensor;

use super::pq::SegmentMatch;
use crate::error::{Error, Result};
use crate::labels::LabelMap;
use crate::orientation::{angular_error, instance_orientation, Angle};

/// Everything a pairing may need for one image.
#[derive(Debug, Clone, Copy)]
pub struct OrientationEval<'a> {
    pub gt_instances: &'a LabelMap,
    /// Ground-truth angles of the evaluable (orientation-relevant) instances.
    pub gt_orientations: &'a BTreeMap<u32, Angle>,
    /// Predicted dense biternion field, `2×H×W`.
    pub field: Option<&'a Tensor>,
    /// Angles of predicted instances after merging, by predicted id.
    pub pred_orientations: &'a BTreeMap<u32, Angle>,
    pub matches: &'a [SegmentMatch],
}

pub trait MaaePairing: Send + Sync {
    fn name(&self) -> &'static str;

    /// `(predicted, ground truth)` angle pairs to score.
    fn pairs(&self, eval: &OrientationEval<'_>) -> Result<Vec<(Angle, Angle)>>;
}

/// Averages the predicted field over each ground-truth instance, independent
/// of the other tasks.
pub struct GtInstances;

impl MaaePairing for GtInstances {
    fn name(&self) -> &'static str {
        "gt-instances"
    }

    fn pairs(&self, eval: &OrientationEval<'_>) -> Result<Vec<(Angle, Angle)>> {
        let field = eval
            .field
            .ok_or_else(|| Error::Metric("gt-instances pairing needs the predicted orientation field".into()))?;
        let mut pixels: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for (i, &id) in eval.gt_instances.data().iter().enumerate() {
            if eval.gt_orientations.contains_key(&id) {
                pixels.entry(id).or_default().push(i as u32);
            }
        }
        eval.gt_orientations
            .iter()
            .map(|(id, &gt)| {
                let px = pixels
                    .get(id)
                    .ok_or_else(|| Error::Metric(format!("oriented instance {id} has no pixels")))?;
                Ok((instance_orientation(field, px)?, gt))
            })
            .collect()
    }
}

/// Scores predicted instances matched to ground truth by panoptic
/// matching; unmatched instances contribute nothing.
pub struct PanopticMatched;

impl MaaePairing for PanopticMatched {
    fn name(&self) -> &'static str {
        "panoptic-matched"
    }

    fn pairs(&self, eval: &OrientationEval<'_>) -> Result<Vec<(Angle, Angle)>> {
        Ok(eval
            .matches
            .iter()
            .filter_map(|m| {
                let gt = eval.gt_orientations.get(&m.gt_instance)?;
                let pred = eval.pred_orientations.get(&m.pred_instance)?;
                Some((*pred, *gt))
            })
            .collect())
    }
}

pub fn pairings() -> Vec<Box<dyn MaaePairing>> {
    vec![Box::new(GtInstances), Box::new(PanopticMatched)]
}

pub fn pairing(name: &str) -> Result<Box<dyn MaaePairing>> {
    pairings().into_iter().find(|p| p.name() == name).ok_or_else(|| {
        let known: Vec<_> = pairings().iter().map(|p| p.name()).collect();
        Error::config("maae pairing", format!("unknown '{name}', expected one of {known:?}"))
    })
}

/// Mean angular error in degrees; `None` when nothing is evaluable.
pub fn maae(pairs: &[(Angle, Angle)]) -> Option<f64> {
    (!pairs.is_empty()).then(|| pairs.iter().map(|&(p, g)| angular_error(p, g)).sum::<f64>() / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deg(d: f64) -> Angle {
        Angle::from_degrees(d)
    }

    #[test]
    fn arithmetic_mean() {
        assert_eq!(maae(&[]), None);
        assert_eq!(maae(&[(deg(10.0), deg(10.0))]), Some(0.0));
        let m = maae(&[(deg(10.0), deg(0.0)), (deg(330.0), deg(0.0))]).unwrap();
        assert!((m - 20.0).abs() < 1e-12);
    }

    #[test]
    fn matched_setting_skips_unmatched() {
        let gt_inst = LabelMap::new(1, 4, vec![1, 1, 2, 2]).unwrap();
        let gt = BTreeMap::from([(1, deg(0.0)), (2, deg(90.0))]);
        let pred = BTreeMap::from([(7, deg(10.0)), (8, deg(270.0))]);
        let matches = [SegmentMatch {
            class: 5,
            gt_instance: 1,
            pred_instance: 7,
            iou: 1.0,
        }];
        let eval = OrientationEval {
            gt_instances: &gt_inst,
            gt_orientations: &gt,
            field: None,
            pred_orientations: &pred,
            matches: &matches,
        };
        let pairs = pairing("panoptic-matched").unwrap().pairs(&eval).unwrap();
        assert!((maae(&pairs).unwrap() - 10.0).abs() < 1e-12);
        assert!(pairing("gt-instances").unwrap().pairs(&eval).is_err());
        assert!(pairing("nearest").is_err());
    }
}
