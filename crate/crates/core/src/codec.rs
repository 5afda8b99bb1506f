//! Bottom-up instance encoding and decoding.
//!
//! Ground truth is encoded as a center heatmap (a Gaussian bump at each
//! instance's center of mass) plus a per-pixel offset field pointing from
//! every instance pixel to its center, normalized by the map extents so the
//! values fit a tanh output. Decoding thresholds the heatmap, keeps local
//! maxima of a max-pooling window (keypoint NMS), keeps the `top_k` best
//! peaks and assigns every foreground pixel, shifted by its offset, to the
//! nearest peak.

use std::cmp::Ordering;

use mtscene_tensor::Tensor;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::filter_small_instances;
use crate::error::{Error, Result};
use crate::labels::{LabelMap, Mask};
use crate::orientation::Angle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodecConfig {
    /// Gaussian sigma of a center bump, in pixels at map resolution.
    pub sigma: f64,
    /// Minimum heatmap score of a center.
    pub threshold: f32,
    /// Side of the square max-pooling window used for keypoint NMS.
    pub pool_size: usize,
    pub top_k: usize,
    /// Pixels whose shifted position is farther than this fraction of the
    /// image diagonal from every center get the unknown label.
    pub unknown_distance: f64,
    /// Instances smaller than this fraction of the image are not encoded.
    pub min_area_fraction: f64,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            sigma: 8.0,
            threshold: 0.1,
            pool_size: 17,
            top_k: 64,
            unknown_distance: 0.05,
            min_area_fraction: 0.0025,
        }
    }
}

impl CodecConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::config("threshold", format!("must lie in (0, 1), got {}", self.threshold)));
        }
        if self.pool_size < 3 || self.pool_size % 2 == 0 {
            return Err(Error::config("pool_size", format!("must be odd and >= 3, got {}", self.pool_size)));
        }
        if self.top_k == 0 {
            return Err(Error::config("top_k", "must be >= 1"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::config("sigma", format!("must be > 0, got {}", self.sigma)));
        }
        if !(self.unknown_distance > 0.0) {
            return Err(Error::config("unknown_distance", format!("must be > 0, got {}", self.unknown_distance)));
        }
        if !(self.min_area_fraction >= 0.0 && self.min_area_fraction < 1.0) {
            return Err(Error::config("min_area_fraction", format!("must lie in [0, 1), got {}", self.min_area_fraction)));
        }
        Ok(())
    }
}

/// Center pixel of one encoded ground-truth instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodedCenter {
    pub id: u32,
    pub row: u32,
    pub col: u32,
    pub area: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceTargets {
    /// `1×H×W`, values in `[0, 1]`.
    pub center: Tensor,
    /// `2×H×W`: `(Δrow / H, Δcol / W)` on instance pixels, zero elsewhere.
    pub offset: Tensor,
    /// Pixels of encoded instances; the center and offset losses are
    /// restricted to it.
    pub instance_mask: Mask,
    /// Pixels of thing classes (set from semantics when available).
    pub thing_mask: Mask,
    pub centers: Vec<EncodedCenter>,
}

impl InstanceTargets {
    pub fn with_thing_mask(mut self, mask: Mask) -> Result<Self> {
        if mask.extents() != self.instance_mask.extents() {
            return Err(Error::Extent {
                context: "thing mask",
                expected: self.instance_mask.extents(),
                actual: mask.extents(),
            });
        }
        self.thing_mask = mask;
        Ok(self)
    }
}

/// Rounded center of mass of each instance id (> 0) with its area.
pub fn instance_centers(instances: &LabelMap) -> Vec<EncodedCenter> {
    let w = instances.width();
    let mut acc: std::collections::BTreeMap<u32, (f64, f64, usize)> = Default::default();
    for (i, &id) in instances.data().iter().enumerate() {
        if id == 0 {
            continue;
        }
        let e = acc.entry(id).or_insert((0.0, 0.0, 0));
        e.0 += (i / w) as f64;
        e.1 += (i % w) as f64;
        e.2 += 1;
    }
    acc.into_iter()
        .map(|(id, (r, c, n))| EncodedCenter {
            id,
            row: (r / n as f64).round() as u32,
            col: (c / n as f64).round() as u32,
            area: n,
        })
        .collect()
}

pub fn encode_targets(instances: &LabelMap, cfg: &CodecConfig) -> Result<InstanceTargets> {
    cfg.validate()?;
    let instances = if cfg.min_area_fraction > 0.0 {
        filter_small_instances(instances, cfg.min_area_fraction)?
    } else {
        instances.clone()
    };
    let (h, w) = instances.extents();
    let centers = instance_centers(&instances);

    let two_sigma_sq = 2.0 * cfg.sigma * cfg.sigma;
    let mut heat = vec![0.0f32; h * w];
    heat.par_chunks_mut(w).enumerate().for_each(|(r, row)| {
        for (c, v) in row.iter_mut().enumerate() {
            let best = centers
                .iter()
                .map(|ct| {
                    let dr = r as f64 - ct.row as f64;
                    let dc = c as f64 - ct.col as f64;
                    (-(dr * dr + dc * dc) / two_sigma_sq).exp()
                })
                .fold(0.0f64, f64::max);
            *v = best as f32;
        }
    });

    let mut offset = vec![0.0f32; 2 * h * w];
    let mut mask = Mask::empty(h, w);
    let lookup: std::collections::HashMap<u32, &EncodedCenter> = centers.iter().map(|c| (c.id, c)).collect();
    for (i, &id) in instances.data().iter().enumerate() {
        if let Some(ct) = lookup.get(&id) {
            let (r, c) = ((i / w) as f64, (i % w) as f64);
            offset[i] = ((ct.row as f64 - r) / h as f64) as f32;
            offset[h * w + i] = ((ct.col as f64 - c) / w as f64) as f32;
            mask.set(i, true);
        }
    }
    Ok(InstanceTargets {
        center: Tensor::new(vec![1, h, w], heat)?,
        offset: Tensor::new(vec![2, h, w], offset)?,
        thing_mask: mask.clone(),
        instance_mask: mask,
        centers,
    })
}

/// A heatmap peak that survived thresholding and NMS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterPeak {
    pub row: u32,
    pub col: u32,
    pub score: f32,
}

/// Descending score, then ascending `(row, col)`.
fn peak_order(a: &CenterPeak, b: &CenterPeak) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.row.cmp(&b.row))
        .then(a.col.cmp(&b.col))
}

fn spatial_extents(t: &Tensor, channels: usize, what: &'static str) -> Result<(usize, usize)> {
    let s = t.shape();
    let ok = s.len() >= 2 && s[..s.len() - 2].iter().product::<usize>() == channels;
    if !ok {
        return Err(Error::Graph(format!("{what} must have {channels} channel(s), got shape {s:?}")));
    }
    Ok((s[s.len() - 2], s[s.len() - 1]))
}

/// Separable sliding-window maximum with the window clipped at the borders.
fn max_filter(src: &[f32], h: usize, w: usize, radius: usize) -> Vec<f32> {
    let mut horiz = vec![f32::NEG_INFINITY; h * w];
    for r in 0..h {
        let row = &src[r * w..(r + 1) * w];
        for c in 0..w {
            let (a, b) = (c.saturating_sub(radius), (c + radius + 1).min(w));
            horiz[r * w + c] = row[a..b].iter().copied().fold(f32::NEG_INFINITY, f32::max);
        }
    }
    let mut out = vec![f32::NEG_INFINITY; h * w];
    for r in 0..h {
        let (a, b) = (r.saturating_sub(radius), (r + radius + 1).min(h));
        for c in 0..w {
            out[r * w + c] = (a..b).map(|rr| horiz[rr * w + c]).fold(f32::NEG_INFINITY, f32::max);
        }
    }
    out
}

/// Thresholding, keypoint NMS via max pooling and top-k selection.
///
/// A pixel survives when its score is at least the threshold and equals the
/// maximum of the pooling window centered on it. Equal-score survivors that
/// share a window are reduced to the lexicographically first.
pub fn decode_centers(heatmap: &Tensor, cfg: &CodecConfig) -> Result<Vec<CenterPeak>> {
    cfg.validate()?;
    let (h, w) = spatial_extents(heatmap, 1, "center heatmap")?;
    let data = heatmap.data();
    let radius = cfg.pool_size / 2;
    let pooled = max_filter(data, h, w, radius);
    let mut peaks: Vec<CenterPeak> = data
        .iter()
        .zip(&pooled)
        .enumerate()
        .filter(|(_, (&v, &m))| v >= cfg.threshold && v == m)
        .map(|(i, (&v, _))| CenterPeak {
            row: (i / w) as u32,
            col: (i % w) as u32,
            score: v,
        })
        .collect();
    peaks.sort_by(peak_order);

    let mut kept: Vec<CenterPeak> = Vec::with_capacity(peaks.len().min(cfg.top_k));
    for p in peaks {
        let plateau_twin = kept.iter().rev().take_while(|k| k.score == p.score).any(|k| {
            k.row.abs_diff(p.row) as usize <= radius && k.col.abs_diff(p.col) as usize <= radius
        });
        if !plateau_twin {
            kept.push(p);
            if kept.len() == cfg.top_k {
                break;
            }
        }
    }
    Ok(kept)
}

/// A decoded, class-agnostic instance. Pixels are linear indices in
/// ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectedInstance {
    pub id: u32,
    pub center: (u32, u32),
    pub score: f32,
    pub pixels: Vec<u32>,
    pub semantic_class: Option<u32>,
    pub orientation: Option<Angle>,
}

/// JSON view of a [`DetectedInstance`] without its pixel list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: u32,
    pub center: [u32; 2],
    pub score: f32,
    pub area: usize,
    pub semantic_class: Option<u32>,
    pub orientation_deg: Option<f64>,
}

impl From<&DetectedInstance> for InstanceRecord {
    fn from(d: &DetectedInstance) -> Self {
        Self {
            id: d.id,
            center: [d.center.0, d.center.1],
            score: d.score,
            area: d.pixels.len(),
            semantic_class: d.semantic_class,
            orientation_deg: d.orientation.map(Angle::degrees),
        }
    }
}

/// Assigns every foreground pixel `q`, shifted to `q + (Δrow·H, Δcol·W)`, to
/// the nearest center. Distance ties go to the higher score, then the
/// lexicographically smaller center. Pixels farther than
/// `unknown_distance · √(H² + W²)` from all centers stay unassigned
/// (unknown). Instance ids are 1-based ranks in center order; instances
/// that receive no pixels are omitted.
pub fn group_pixels(
    centers: &[CenterPeak],
    offsets: &Tensor,
    fg_mask: &Mask,
    cfg: &CodecConfig,
) -> Result<Vec<DetectedInstance>> {
    let labels = assign_pixels(centers, offsets, fg_mask, cfg)?;
    let mut ordered = centers.to_vec();
    ordered.sort_by(peak_order);
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); ordered.len()];
    for (i, &l) in labels.iter().enumerate() {
        if l > 0 {
            buckets[l as usize - 1].push(i as u32);
        }
    }
    Ok(ordered
        .iter()
        .zip(buckets)
        .enumerate()
        .filter(|(_, (_, px))| !px.is_empty())
        .map(|(k, (c, pixels))| DetectedInstance {
            id: k as u32 + 1,
            center: (c.row, c.col),
            score: c.score,
            pixels,
            semantic_class: None,
            orientation: None,
        })
        .collect())
}

/// Per-pixel instance labels of [`group_pixels`] (0 = background or unknown).
pub fn assign_pixels(centers: &[CenterPeak], offsets: &Tensor, fg_mask: &Mask, cfg: &CodecConfig) -> Result<Vec<u32>> {
    let (h, w) = spatial_extents(offsets, 2, "offset field")?;
    if fg_mask.extents() != (h, w) {
        return Err(Error::Extent {
            context: "group_pixels foreground mask",
            expected: (h, w),
            actual: fg_mask.extents(),
        });
    }
    let mut ordered = centers.to_vec();
    ordered.sort_by(peak_order);
    let pts: Vec<(f64, f64)> = ordered.iter().map(|c| (c.row as f64, c.col as f64)).collect();
    let limit = cfg.unknown_distance * ((h * h + w * w) as f64).sqrt();
    let limit_sq = limit * limit;
    let (dr, dc) = offsets.data().split_at(h * w);

    let mut labels = vec![0u32; h * w];
    if pts.is_empty() {
        return Ok(labels);
    }
    labels.par_chunks_mut(w).enumerate().for_each(|(r, row)| {
        for (c, label) in row.iter_mut().enumerate() {
            let i = r * w + c;
            if !fg_mask.get(i) {
                continue;
            }
            let y = r as f64 + dr[i] as f64 * h as f64;
            let x = c as f64 + dc[i] as f64 * w as f64;
            let mut best = (f64::INFINITY, 0usize);
            for (k, &(py, px)) in pts.iter().enumerate() {
                let d = (y - py) * (y - py) + (x - px) * (x - px);
                if d < best.0 {
                    best = (d, k);
                }
            }
            if best.0 <= limit_sq {
                *label = best.1 as u32 + 1;
            }
        }
    });
    Ok(labels)
}

/// Paints instance ids into a map; unassigned pixels are 0.
pub fn instances_to_label_map(instances: &[DetectedInstance], height: usize, width: usize) -> Result<LabelMap> {
    let mut map = LabelMap::filled(height, width, 0);
    for inst in instances {
        for &p in &inst.pixels {
            let p = p as usize;
            if p >= height * width {
                return Err(Error::config("instance pixels", format!("pixel {p} outside {height}x{width}")));
            }
            map.data_mut()[p] = inst.id;
        }
    }
    Ok(map)
}

/// Rebuilds instances from an instance-id map (ids > 0).
pub fn label_map_to_instances(map: &LabelMap) -> Vec<DetectedInstance> {
    let mut groups: std::collections::BTreeMap<u32, Vec<u32>> = Default::default();
    for (i, &id) in map.data().iter().enumerate() {
        if id > 0 {
            groups.entry(id).or_default().push(i as u32);
        }
    }
    let w = map.width();
    groups
        .into_iter()
        .map(|(id, pixels)| {
            let n = pixels.len() as f64;
            let (sr, sc) = pixels
                .iter()
                .fold((0.0, 0.0), |(a, b), &p| (a + (p as usize / w) as f64, b + (p as usize % w) as f64));
            DetectedInstance {
                id,
                center: ((sr / n).round() as u32, (sc / n).round() as u32),
                score: 1.0,
                pixels,
                semantic_class: None,
                orientation: None,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heatmap(h: usize, w: usize, peaks: &[(usize, usize, f32)]) -> Tensor {
        let mut t = Tensor::zeros(&[1, h, w]).unwrap();
        for &(r, c, v) in peaks {
            t.data_mut()[r * w + c] = v;
        }
        t
    }

    #[test]
    fn config_validation() {
        assert!(CodecConfig::default().validate().is_ok());
        for bad in [
            CodecConfig { threshold: 1.0, ..Default::default() },
            CodecConfig { pool_size: 16, ..Default::default() },
            CodecConfig { pool_size: 1, ..Default::default() },
            CodecConfig { top_k: 0, ..Default::default() },
            CodecConfig { sigma: 0.0, ..Default::default() },
            CodecConfig { unknown_distance: 0.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn gaussian_values_and_offsets() {
        let mut inst = LabelMap::filled(100, 100, 0);
        // 21x41 rectangle centered at (20, 30)
        for r in 10..=30 {
            for c in 10..=50 {
                inst.set(r, c, 1);
            }
        }
        let cfg = CodecConfig::default();
        let t = encode_targets(&inst, &cfg).unwrap();
        assert_eq!(t.centers[0].row, 20);
        assert_eq!(t.centers[0].col, 30);
        assert_eq!(t.center.data()[20 * 100 + 30], 1.0);
        let at_sigma = t.center.data()[20 * 100 + 38];
        assert!((at_sigma as f64 - (-0.5f64).exp()).abs() < 1e-6);
        assert!((at_sigma - 0.6065).abs() < 1e-4);
        let q = 10 * 100 + 10;
        assert!((t.offset.data()[q] - 0.10).abs() < 1e-7);
        assert!((t.offset.data()[100 * 100 + q] - 0.20).abs() < 1e-7);
        assert_eq!(t.offset.data()[0], 0.0);
        assert_eq!(t.instance_mask.count(), 21 * 41);
    }

    #[test]
    fn empty_map_gives_zero_targets() {
        let t = encode_targets(&LabelMap::filled(8, 8, 0), &CodecConfig::default()).unwrap();
        assert!(t.center.data().iter().all(|&v| v == 0.0));
        assert!(t.offset.data().iter().all(|&v| v == 0.0));
        assert!(t.centers.is_empty());
        assert!(decode_centers(&t.center, &CodecConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn small_instances_are_not_encoded() {
        let mut inst = LabelMap::filled(100, 100, 0);
        for c in 0..24 {
            inst.set(0, c, 1);
        }
        let t = encode_targets(&inst, &CodecConfig::default()).unwrap();
        assert!(t.centers.is_empty());
        assert_eq!(t.instance_mask.count(), 0);
    }

    #[test]
    fn single_peak_survives() {
        let peaks = decode_centers(&heatmap(20, 20, &[(5, 6, 0.5)]), &CodecConfig::default()).unwrap();
        assert_eq!(peaks, vec![CenterPeak { row: 5, col: 6, score: 0.5 }]);
    }

    #[test]
    fn close_peaks_suppressed_far_peaks_kept() {
        let cfg = CodecConfig::default();
        let near = decode_centers(&heatmap(40, 40, &[(20, 10, 0.9), (20, 15, 0.8)]), &cfg).unwrap();
        assert_eq!(near.len(), 1);
        assert_eq!(near[0].score, 0.9);
        let far = decode_centers(&heatmap(40, 40, &[(20, 10, 0.9), (20, 22, 0.8)]), &cfg).unwrap();
        assert_eq!(far.len(), 2);
    }

    #[test]
    fn plateau_keeps_lexicographically_first() {
        let peaks = decode_centers(&heatmap(30, 30, &[(10, 12, 0.7), (10, 10, 0.7), (12, 10, 0.7)]), &CodecConfig::default()).unwrap();
        assert_eq!(peaks, vec![CenterPeak { row: 10, col: 10, score: 0.7 }]);
    }

    #[test]
    fn threshold_and_top_k() {
        let hm = heatmap(60, 60, &[(5, 5, 0.05), (5, 30, 0.3), (30, 5, 0.6), (30, 30, 0.9), (50, 50, 0.2)]);
        let cfg = CodecConfig { top_k: 2, ..Default::default() };
        let peaks = decode_centers(&hm, &cfg).unwrap();
        assert_eq!(peaks.iter().map(|p| p.score).collect::<Vec<_>>(), vec![0.9, 0.6]);
        let all = decode_centers(&hm, &CodecConfig::default()).unwrap();
        assert_eq!(all.len(), 4);
    }

    #[test]
    fn zero_offsets_single_center_joins_everything() {
        let offsets = Tensor::zeros(&[2, 16, 16]).unwrap();
        let mut fg = Mask::empty(16, 16);
        for i in 40..120 {
            fg.set(i, true);
        }
        let cfg = CodecConfig { unknown_distance: 10.0, ..Default::default() };
        let peaks = [CenterPeak { row: 8, col: 8, score: 0.4 }];
        let inst = group_pixels(&peaks, &offsets, &fg, &cfg).unwrap();
        assert_eq!(inst.len(), 1);
        assert_eq!(inst[0].pixels, (40..120).collect::<Vec<u32>>());
    }

    #[test]
    fn far_pixels_are_unknown_and_no_centers_means_all_unknown() {
        let offsets = Tensor::zeros(&[2, 20, 20]).unwrap();
        let mut fg = Mask::empty(20, 20);
        fg.set(0, true);
        fg.set(10 * 20 + 11, true);
        let cfg = CodecConfig::default(); // limit = 0.05 * sqrt(800) ≈ 1.41 px
        let peaks = [CenterPeak { row: 10, col: 10, score: 0.4 }];
        let inst = group_pixels(&peaks, &offsets, &fg, &cfg).unwrap();
        assert_eq!(inst[0].pixels, vec![211]);
        assert!(group_pixels(&[], &offsets, &fg, &cfg).unwrap().is_empty());
    }

    #[test]
    fn distance_tie_prefers_higher_score() {
        let offsets = Tensor::zeros(&[2, 1, 11]).unwrap();
        let mut fg = Mask::empty(1, 11);
        fg.set(5, true);
        let cfg = CodecConfig { unknown_distance: 10.0, ..Default::default() };
        let peaks = [CenterPeak { row: 0, col: 3, score: 0.3 }, CenterPeak { row: 0, col: 7, score: 0.6 }];
        let inst = group_pixels(&peaks, &offsets, &fg, &cfg).unwrap();
        assert_eq!(inst.len(), 1);
        assert_eq!(inst[0].center, (0, 7));
    }

    #[test]
    fn offset_shape_mismatch() {
        let offsets = Tensor::zeros(&[1, 4, 4]).unwrap();
        assert!(group_pixels(&[], &offsets, &Mask::empty(4, 4), &CodecConfig::default()).is_err());
    }
}
