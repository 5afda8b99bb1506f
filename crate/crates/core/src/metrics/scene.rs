use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Mean per-class recall over the classes present in the ground truth,
/// skipping entries whose ground truth is `void_id`.
pub fn balanced_accuracy(pred: &[u32], gt: &[u32], void_id: u32) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::Metric(format!("{} predictions for {} labels", pred.len(), gt.len())));
    }
    let mut per_class: BTreeMap<u32, (u64, u64)> = BTreeMap::new();
    for (&p, &g) in pred.iter().zip(gt) {
        if g == void_id {
            continue;
        }
        let e = per_class.entry(g).or_default();
        e.0 += u64::from(p == g);
        e.1 += 1;
    }
    if per_class.is_empty() {
        return Err(Error::Metric("no non-void scene labels".into()));
    }
    let recall: f64 = per_class.values().map(|&(hit, n)| hit as f64 / n as f64).sum();
    Ok(recall / per_class.len() as f64)
}
