use crate::error::{Error, Result};
use crate::labels::LabelMap;
use crate::spectrum::ClassSpectrum;

/// Pixel counts indexed by `(gt id, pred id)`, void ground truth excluded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n: usize,
    void_id: u32,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(spectrum: &ClassSpectrum) -> Self {
        let n = spectrum.len();
        Self {
            n,
            void_id: spectrum.void_id,
            counts: vec![0; n * n],
        }
    }

    pub fn add(&mut self, pred: &LabelMap, gt: &LabelMap) -> Result<()> {
        pred.expect_extents(gt.extents(), "confusion matrix prediction")?;
        for (&p, &g) in pred.data().iter().zip(gt.data()) {
            if g == self.void_id {
                continue;
            }
            if g as usize >= self.n || p as usize >= self.n {
                return Err(Error::Metric(format!("label {} outside a spectrum of {} ids", g.max(p), self.n)));
            }
            self.counts[g as usize * self.n + p as usize] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn get(&self, gt: u32, pred: u32) -> u64 {
        self.counts[gt as usize * self.n + pred as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `(tp, fp, fn)` of one class.
    pub fn class_counts(&self, id: u32) -> (u64, u64, u64) {
        let c = id as usize;
        let tp = self.counts[c * self.n + c];
        let gt: u64 = self.counts[c * self.n..(c + 1) * self.n].iter().sum();
        let pred: u64 = (0..self.n).map(|g| self.counts[g * self.n + c]).sum();
        (tp, pred - tp, gt - tp)
    }

    /// IoU per non-void id; `None` for classes absent from both maps.
    pub fn ious(&self) -> Vec<(u32, Option<f64>)> {
        (0..self.n as u32)
            .filter(|&id| id != self.void_id)
            .map(|id| {
                let (tp, fp, fn_) = self.class_counts(id);
                let denom = tp + fp + fn_;
                (id, (denom > 0).then(|| tp as f64 / denom as f64))
            })
            .collect()
    }

    /// Mean IoU over classes present in ground truth or prediction.
    pub fn miou(&self) -> Result<f64> {
        if self.total() == 0 {
            return Err(Error::Metric("ground truth is entirely void".into()));
        }
        let present: Vec<f64> = self.ious().into_iter().filter_map(|(_, v)| v).collect();
        Ok(present.iter().sum::<f64>() / present.len() as f64)
    }
}

/// Per-class IoU and mean IoU of a single image pair.
#[derive(Debug, Clone, PartialEq)]
pub struct IouReport {
    pub per_class: Vec<(u32, Option<f64>)>,
    pub miou: f64,
}

pub fn miou(pred: &LabelMap, gt: &LabelMap, spectrum: &ClassSpectrum) -> Result<IouReport> {
    let mut cm = ConfusionMatrix::new(spectrum);
    cm.add(pred, gt)?;
    Ok(IouReport {
        miou: cm.miou()?,
        per_class: cm.ious(),
    })
}
