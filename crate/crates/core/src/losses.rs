//! Forward evaluation of the multi-task training losses.

use std::fmt;
use std::str::FromStr;

use mtscene_tensor::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{LabelMap, Mask};
use crate::orientation::{von_mises_loss, Angle, Biternion};
use crate::spectrum::ClassSpectrum;

pub const DEFAULT_LABEL_SMOOTHING: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskWeights {
    pub semantic: f64,
    pub scene: f64,
    /// Shared by the center and offset losses.
    pub instance: f64,
    pub orientation: f64,
}

impl Default for TaskWeights {
    fn default() -> Self {
        Self {
            semantic: 1.0,
            scene: 0.25,
            instance: 3.0,
            orientation: 1.0,
        }
    }
}

impl TaskWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.semantic, self.scene, self.instance, self.orientation];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::config("task_weights", format!("must be finite and non-negative, got {self}")));
        }
        if all.iter().all(|&w| w == 0.0) {
            return Err(Error::config("task_weights", "at least one weight must be positive"));
        }
        Ok(())
    }
}

impl fmt::Display for TaskWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}:{}", self.semantic, self.scene, self.instance, self.orientation)
    }
}

/// Parses `semantic:scene:instance:orientation`.
impl FromStr for TaskWeights {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::config("task_weights", format!("'{s}': {e}")))?;
        let [semantic, scene, instance, orientation] = parts[..] else {
            return Err(Error::config("task_weights", format!("'{s}' needs four ':'-separated values")));
        };
        let tw = Self {
            semantic,
            scene,
            instance,
            orientation,
        };
        tw.validate()?;
        Ok(tw)
    }
}

/// A masked mean; `empty` flags a mask without pixels (value 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskedLoss {
    pub value: f64,
    pub empty: bool,
}

fn chw(t: &Tensor, channels: Option<usize>, what: &'static str) -> Result<(usize, usize, usize)> {
    let (n, c, h, w) = t.nchw(what)?;
    if n != 1 {
        return Err(Error::Loss(format!("{what}: batch of {n}, expected a single image")));
    }
    if let Some(expected) = channels {
        if c != expected {
            return Err(Error::Loss(format!("{what}: {c} channels, expected {expected}")));
        }
    }
    Ok((c, h, w))
}

fn check_mask(mask: &Mask, extents: (usize, usize), context: &'static str) -> Result<()> {
    if mask.extents() != extents {
        return Err(Error::Extent {
            context,
            expected: extents,
            actual: mask.extents(),
        });
    }
    Ok(())
}

/// Class-weighted cross-entropy over the full-resolution logits and every
/// side output. Ground truth for lower resolutions is nearest-downsampled.
/// Void pixels add nothing to the sum but count in the denominator, which
/// is the number of pixels across all outputs.
///
/// `class_weights` is indexed by logit channel.
pub fn semantic_loss(logits: &[&Tensor], gt: &LabelMap, class_weights: &[f64], spectrum: &ClassSpectrum) -> Result<f64> {
    if logits.is_empty() {
        return Err(Error::Loss("semantic loss needs at least one output".into()));
    }
    let c = spectrum.num_classes();
    if class_weights.len() != c {
        return Err(Error::Loss(format!("{} class weights for {c} classes", class_weights.len())));
    }
    spectrum.check_map(gt, "semantic loss ground truth")?;
    let (mut total, mut pixels) = (0.0f64, 0usize);
    for (k, t) in logits.iter().enumerate() {
        let (_, h, w) = chw(t, Some(c), "semantic logits")?;
        if k == 0 && (h, w) != gt.extents() {
            return Err(Error::Extent {
                context: "semantic logits",
                expected: gt.extents(),
                actual: (h, w),
            });
        }
        let target = if (h, w) == gt.extents() { gt.clone() } else { gt.resize_nearest(h, w) };
        let hw = h * w;
        let data = t.data();
        for (i, &id) in target.data().iter().enumerate() {
            let Some(ch) = spectrum.channel_of(id) else { continue };
            let max = (0..c).map(|j| data[j * hw + i] as f64).fold(f64::NEG_INFINITY, f64::max);
            let lse = max + (0..c).map(|j| (data[j * hw + i] as f64 - max).exp()).sum::<f64>().ln();
            total += class_weights[ch] * (lse - data[ch * hw + i] as f64);
        }
        pixels += hw;
    }
    Ok(total / pixels as f64)
}

/// Mean squared error over the ground-truth instance mask.
pub fn center_loss(pred: &Tensor, target: &Tensor, mask: &Mask) -> Result<MaskedLoss> {
    let (_, h, w) = chw(pred, Some(1), "center prediction")?;
    target.expect_shape(pred.shape(), "center target")?;
    check_mask(mask, (h, w), "center loss mask")?;
    let n = mask.count();
    if n == 0 {
        return Ok(MaskedLoss { value: 0.0, empty: true });
    }
    let sum: f64 = mask
        .indices()
        .map(|i| {
            let d = pred.data()[i as usize] as f64 - target.data()[i as usize] as f64;
            d * d
        })
        .sum();
    Ok(MaskedLoss {
        value: sum / n as f64,
        empty: false,
    })
}

/// Mean absolute error over both offset channels inside the mask.
pub fn offset_loss(pred: &Tensor, target: &Tensor, mask: &Mask) -> Result<MaskedLoss> {
    let (_, h, w) = chw(pred, Some(2), "offset prediction")?;
    target.expect_shape(pred.shape(), "offset target")?;
    check_mask(mask, (h, w), "offset loss mask")?;
    let n = mask.count();
    if n == 0 {
        return Ok(MaskedLoss { value: 0.0, empty: true });
    }
    let hw = h * w;
    let (p, t) = (pred.data(), target.data());
    let sum: f64 = mask
        .indices()
        .map(|i| {
            let i = i as usize;
            (p[i] as f64 - t[i] as f64).abs() + (p[hw + i] as f64 - t[hw + i] as f64).abs()
        })
        .sum();
    Ok(MaskedLoss {
        value: sum / (2 * n) as f64,
        empty: false,
    })
}

/// Cross-entropy against the smoothed target: `1 − ε` on the true class
/// and `ε / (K − 1)` on each other class.
pub fn scene_loss(logits: &[f32], gt: usize, epsilon: f64) -> Result<f64> {
    let k = logits.len();
    if k < 2 {
        return Err(Error::Loss(format!("scene logits need at least 2 classes, got {k}")));
    }
    if gt >= k {
        return Err(Error::Loss(format!("scene class {gt} outside {k} logits")));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::config("epsilon", format!("must lie in [0, 1), got {epsilon}")));
    }
    let max = logits.iter().map(|&v| v as f64).fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&v| (v as f64 - max).exp()).sum::<f64>().ln();
    let off = epsilon / (k - 1) as f64;
    Ok(logits
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            let q = if j == gt { 1.0 - epsilon } else { off };
            q * (lse - v as f64)
        })
        .sum())
}

/// Mean von Mises loss over supervised pixels. `target` holds ground-truth
/// biternions (see [`crate::orientation::orientation_targets`]).
pub fn orientation_loss(pred: &Tensor, target: &Tensor, mask: &Mask, kappa: f64) -> Result<MaskedLoss> {
    let (_, h, w) = chw(pred, Some(2), "orientation prediction")?;
    target.expect_shape(pred.shape(), "orientation target")?;
    check_mask(mask, (h, w), "orientation loss mask")?;
    if !(kappa > 0.0) {
        return Err(Error::config("kappa", format!("must be > 0, got {kappa}")));
    }
    let n = mask.count();
    if n == 0 {
        return Ok(MaskedLoss { value: 0.0, empty: true });
    }
    let hw = h * w;
    let (p, t) = (pred.data(), target.data());
    let mut sum = 0.0;
    for i in mask.indices() {
        let i = i as usize;
        let gt = Biternion::from_vector(t[i] as f64, t[hw + i] as f64)?;
        let gt = Angle::from_radians(gt.sin.atan2(gt.cos));
        sum += von_mises_loss(Biternion { cos: p[i] as f64, sin: p[hw + i] as f64 }, gt, kappa)?;
    }
    Ok(MaskedLoss {
        value: sum / n as f64,
        empty: false,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub semantic: f64,
    pub scene: f64,
    pub center: f64,
    pub offset: f64,
    pub orientation: f64,
}

/// `w_sem·L_sem + w_scene·L_scene + w_ins·(L_center + L_offset) + w_orient·L_orient`.
pub fn total_loss(parts: &LossParts, tw: &TaskWeights) -> Result<f64> {
    let named = [
        ("semantic", parts.semantic, tw.semantic),
        ("scene", parts.scene, tw.scene),
        ("center", parts.center, tw.instance),
        ("offset", parts.offset, tw.instance),
        ("orientation", parts.orientation, tw.orientation),
    ];
    let mut total = 0.0;
    for (task, value, weight) in named {
        if !value.is_finite() {
            return Err(Error::Loss(format!("{task} loss is {value}")));
        }
        if weight != 0.0 {
            total += weight * value;
        }
    }
    Ok(total)
}

/// Median-frequency class weights indexed by logit channel. The frequency
/// of a class is its pixel count over the pixel count of the images that
/// contain it; weight = median frequency / frequency. Classes that never
/// occur get weight 0.
pub fn median_frequency_weights(maps: &[LabelMap], spectrum: &ClassSpectrum) -> Result<Vec<f64>> {
    let c = spectrum.num_classes();
    let mut count = vec![0u64; c];
    let mut exposure = vec![0u64; c];
    for m in maps {
        spectrum.check_map(m, "median frequency weights")?;
        let mut present = vec![0u64; c];
        for &id in m.data() {
            if let Some(ch) = spectrum.channel_of(id) {
                present[ch] += 1;
            }
        }
        for ch in 0..c {
            if present[ch] > 0 {
                count[ch] += present[ch];
                exposure[ch] += m.len() as u64;
            }
        }
    }
    let freq: Vec<Option<f64>> = (0..c)
        .map(|ch| (count[ch] > 0).then(|| count[ch] as f64 / exposure[ch] as f64))
        .collect();
    let mut sorted: Vec<f64> = freq.iter().flatten().copied().collect();
    if sorted.is_empty() {
        return Err(Error::Loss("no labeled pixels to derive class weights from".into()));
    }
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 { sorted[mid] } else { 0.5 * (sorted[mid - 1] + sorted[mid]) };
    Ok(freq.into_iter().map(|f| f.map_or(0.0, |f| median / f)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spectrum() -> ClassSpectrum {
        ClassSpectrum::nyuv2_40()
    }

    #[test]
    fn weights_parse_and_validate() {
        let tw: TaskWeights = "1:0.25:3:1".parse().unwrap();
        assert_eq!(tw, TaskWeights::default());
        assert!("1:2:3".parse::<TaskWeights>().is_err());
        assert!("0:0:0:0".parse::<TaskWeights>().is_err());
        assert!("1:-1:0:0".parse::<TaskWeights>().is_err());
    }

    #[test]
    fn total_examples() {
        let tw = TaskWeights::default();
        assert_eq!(total_loss(&LossParts::default(), &tw).unwrap(), 0.0);
        let ones = LossParts {
            semantic: 1.0,
            scene: 1.0,
            center: 0.5,
            offset: 0.5,
            orientation: 1.0,
        };
        assert_eq!(total_loss(&ones, &tw).unwrap(), 5.25);
        let diverging = LossParts {
            scene: 1e300,
            ..ones
        };
        let silenced = TaskWeights { scene: 0.0, ..tw };
        assert_eq!(total_loss(&diverging, &silenced).unwrap(), 5.0);
        let nan = LossParts { offset: f64::NAN, ..ones };
        let err = total_loss(&nan, &tw).unwrap_err().to_string();
        assert!(err.contains("offset"), "{err}");
    }

    #[test]
    fn semantic_uniform_and_saturated() {
        let s = spectrum();
        let c = s.num_classes();
        let gt = LabelMap::new(2, 2, vec![1, 5, 40, 0]).unwrap();
        let uniform = Tensor::zeros(&[c, 2, 2]).unwrap();
        let w = vec![1.0; c];
        let l = semantic_loss(&[&uniform], &gt, &w, &s).unwrap();
        assert!((l - 0.75 * (c as f64).ln()).abs() < 1e-12);
        let saturated = Tensor::from_fn(&[c, 2, 2], |i| {
            let (ch, p) = (i / 4, i % 4);
            if s.channel_of(gt.data()[p]) == Some(ch) { 1e4 } else { 0.0 }
        })
        .unwrap();
        assert!(semantic_loss(&[&saturated], &gt, &w, &s).unwrap() < 1e-12);
        let doubled = vec![2.0; c];
        let l2 = semantic_loss(&[&uniform], &gt, &doubled, &s).unwrap();
        assert!((l2 - 2.0 * l).abs() < 1e-12);
    }

    #[test]
    fn semantic_counts_side_output_pixels() {
        let s = spectrum();
        let c = s.num_classes();
        let gt = LabelMap::filled(4, 4, 3);
        let full = Tensor::zeros(&[c, 4, 4]).unwrap();
        let side = Tensor::zeros(&[c, 2, 2]).unwrap();
        let l = semantic_loss(&[&full, &side], &gt, &vec![1.0; c], &s).unwrap();
        assert!((l - (c as f64).ln()).abs() < 1e-12);
        assert!(semantic_loss(&[&side], &gt, &vec![1.0; c], &s).is_err());
    }

    #[test]
    fn masked_losses() {
        let mask = Mask::new(1, 3, vec![true, false, true]).unwrap();
        let t = Tensor::new(vec![1, 1, 3], vec![0.5, 0.0, 1.0]).unwrap();
        assert_eq!(center_loss(&t, &t, &mask).unwrap().value, 0.0);
        let p = t.map(|v| v + 0.25);
        assert!((center_loss(&p, &t, &mask).unwrap().value - 0.0625).abs() < 1e-12);
        let empty = center_loss(&p, &t, &Mask::empty(1, 3)).unwrap();
        assert!(empty.empty && empty.value == 0.0);

        let t2 = Tensor::zeros(&[2, 1, 3]).unwrap();
        let p2 = Tensor::new(vec![2, 1, 3], vec![0.1, 9.0, 0.1, 0.3, 9.0, 0.3]).unwrap();
        assert!((offset_loss(&p2, &t2, &mask).unwrap().value - 0.2).abs() < 1e-7);
    }

    #[test]
    fn scene_cases() {
        let sat: Vec<f32> = (0..11).map(|j| if j == 4 { 1e4 } else { 0.0 }).collect();
        assert!(scene_loss(&sat, 4, 0.0).unwrap() < 1e-12);
        let uniform = vec![0.3f32; 11];
        for eps in [0.0, 0.1, 0.5] {
            assert!((scene_loss(&uniform, 2, eps).unwrap() - 11f64.ln()).abs() < 1e-12);
        }
        assert!(scene_loss(&uniform, 11, 0.1).is_err());
        assert!(scene_loss(&uniform, 1, 1.0).is_err());
    }

    #[test]
    fn orientation_perfect_is_zero() {
        let field = Tensor::new(vec![2, 1, 2], vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let mask = Mask::new(1, 2, vec![true, true]).unwrap();
        assert!(orientation_loss(&field, &field, &mask, 1.0).unwrap().value < 1e-12);
        let opposite = field.map(|v| -v);
        let l = orientation_loss(&opposite, &field, &mask, 1.0).unwrap().value;
        assert!((l - (1.0 - (-2.0f64).exp())).abs() < 1e-9);
    }

    #[test]
    fn median_frequency() {
        let s = spectrum();
        // class 1 everywhere in image A, class 5 on a quarter of image B
        let a = LabelMap::filled(2, 2, 1);
        let b = LabelMap::new(2, 2, vec![5, 2, 2, 2]).unwrap();
        let w = median_frequency_weights(&[a, b], &s).unwrap();
        // freqs: 1 -> 1.0, 2 -> 0.75, 5 -> 0.25; median 0.75
        assert!((w[s.channel_of(1).unwrap()] - 0.75).abs() < 1e-12);
        assert!((w[s.channel_of(2).unwrap()] - 1.0).abs() < 1e-12);
        assert!((w[s.channel_of(5).unwrap()] - 3.0).abs() < 1e-12);
        assert_eq!(w[s.channel_of(7).unwrap()], 0.0);
    }
}
