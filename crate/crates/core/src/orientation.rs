//! Orientation around the ground-plane normal: biternion encoding, the von
//! Mises loss, circular averaging of dense predictions and angular error.
//!
//! Angles are egocentric (camera frame) and measured in degrees.

use std::collections::BTreeMap;

use mtscene_tensor::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{LabelMap, Mask};
use crate::spectrum::ClassSpectrum;

/// Default concentration of the von Mises loss.
pub const DEFAULT_KAPPA: f64 = 1.0;

/// An angle in degrees, canonicalized to `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Angle(f64);

impl Angle {
    pub fn from_degrees(deg: f64) -> Self {
        let mut v = deg.rem_euclid(360.0);
        // rem_euclid can round up to exactly 360 for tiny negative inputs
        if v >= 360.0 {
            v = 0.0;
        }
        Angle(v)
    }

    pub fn from_radians(rad: f64) -> Self {
        Self::from_degrees(rad.to_degrees())
    }

    pub fn degrees(self) -> f64 {
        self.0
    }

    pub fn radians(self) -> f64 {
        self.0.to_radians()
    }
}

/// `(cos θ, sin θ)` on the unit circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biternion {
    pub cos: f64,
    pub sin: f64,
}

impl Biternion {
    /// Normalizes an arbitrary 2-vector; the zero vector has no direction.
    pub fn from_vector(cos: f64, sin: f64) -> Result<Self> {
        let norm = cos.hypot(sin);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Orientation(format!("vector ({cos}, {sin}) has no direction")));
        }
        Ok(Self {
            cos: cos / norm,
            sin: sin / norm,
        })
    }

    pub fn norm(&self) -> f64 {
        self.cos.hypot(self.sin)
    }
}

pub fn encode_biternion(a: Angle) -> Biternion {
    let (sin, cos) = a.radians().sin_cos();
    Biternion { cos, sin }
}

pub fn decode_biternion(b: Biternion) -> Result<Angle> {
    let b = Biternion::from_vector(b.cos, b.sin)?;
    Ok(Angle::from_radians(b.sin.atan2(b.cos)))
}

/// `1 − exp(κ·(cos(θ_pred − θ_gt) − 1))`, bounded by `1 − e^{−2κ}`.
pub fn von_mises_loss(pred: Biternion, gt: Angle, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::config("kappa", format!("must be > 0, got {kappa}")));
    }
    let p = Biternion::from_vector(pred.cos, pred.sin)?;
    let g = encode_biternion(gt);
    let cos_delta = (p.cos * g.cos + p.sin * g.sin).clamp(-1.0, 1.0);
    Ok(1.0 - (kappa * (cos_delta - 1.0)).exp())
}

/// Smallest rotation between two angles, in `[0, 180]`.
pub fn angular_error(a: Angle, b: Angle) -> f64 {
    let d = (a.degrees() - b.degrees()).abs().rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Circular mean of the per-pixel biternions of a `2×H×W` field (channel 0
/// cos, channel 1 sin) over the given linear pixel indices. Each pixel is
/// normalized first; zero vectors carry no direction and are skipped.
pub fn instance_orientation(field: &Tensor, pixels: &[u32]) -> Result<Angle> {
    if pixels.is_empty() {
        return Err(Error::Orientation("empty pixel set".into()));
    }
    let &[2, h, w] = field.shape() else {
        return Err(Error::Orientation(format!("field must be 2xHxW, got {:?}", field.shape())));
    };
    let (cos_plane, sin_plane) = field.data().split_at(h * w);
    let (mut sum_cos, mut sum_sin) = (0.0f64, 0.0f64);
    for &p in pixels {
        let p = p as usize;
        if p >= h * w {
            return Err(Error::Orientation(format!("pixel {p} outside a {h}x{w} field")));
        }
        if let Ok(b) = Biternion::from_vector(cos_plane[p] as f64, sin_plane[p] as f64) {
            sum_cos += b.cos;
            sum_sin += b.sin;
        }
    }
    if sum_cos.hypot(sum_sin) < 1e-9 {
        return Err(Error::Orientation("resultant vector vanishes; mean direction undefined".into()));
    }
    Ok(Angle::from_radians(sum_sin.atan2(sum_cos)))
}

/// Writes a per-pixel biternion field (`2×H×W`) for the given pixels.
pub fn paint_biternions(field: &mut Tensor, pixels: &[u32], angle: Angle) {
    let hw = field.len() / 2;
    let b = encode_biternion(angle);
    let data = field.data_mut();
    for &p in pixels {
        data[p as usize] = b.cos as f32;
        data[hw + p as usize] = b.sin as f32;
    }
}

/// Dense orientation supervision: the ground-truth biternion field
/// (`2×H×W`) over annotated instances of orientation-relevant classes, and
/// the mask of those pixels.
pub fn orientation_targets(
    semantic: &LabelMap,
    instances: &LabelMap,
    orientations: &BTreeMap<u32, Angle>,
    spectrum: &ClassSpectrum,
) -> Result<(Tensor, Mask)> {
    instances.expect_extents(semantic.extents(), "orientation targets instance map")?;
    let (h, w) = semantic.extents();
    let mut field = Tensor::zeros(&[2, h, w])?;
    let mut mask = Mask::empty(h, w);
    for (i, (&s, &id)) in semantic.data().iter().zip(instances.data()).enumerate() {
        if id == 0 || !spectrum.is_orientation_relevant(s) {
            continue;
        }
        if let Some(&a) = orientations.get(&id) {
            paint_biternions(&mut field, &[i as u32], a);
            mask.set(i, true);
        }
    }
    Ok((field, mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field_of(angles: &[f64]) -> Tensor {
        let n = angles.len();
        let mut data = vec![0.0f32; 2 * n];
        for (i, a) in angles.iter().enumerate() {
            let b = encode_biternion(Angle::from_degrees(*a));
            data[i] = b.cos as f32;
            data[n + i] = b.sin as f32;
        }
        Tensor::new(vec![2, 1, n], data).unwrap()
    }

    #[test]
    fn canonical_angles() {
        assert_eq!(Angle::from_degrees(-90.0).degrees(), 270.0);
        assert_eq!(Angle::from_degrees(720.0).degrees(), 0.0);
        assert_eq!(Angle::from_degrees(-1e-20).degrees(), 0.0);
    }

    #[test]
    fn encode_known_angles() {
        let b = encode_biternion(Angle::from_degrees(0.0));
        assert_eq!((b.cos, b.sin), (1.0, 0.0));
        let b = encode_biternion(Angle::from_degrees(90.0));
        assert!(b.cos.abs() < 1e-15 && (b.sin - 1.0).abs() < 1e-15);
    }

    #[test]
    fn decode_zero_vector_fails() {
        assert!(decode_biternion(Biternion { cos: 0.0, sin: 0.0 }).is_err());
        let a = decode_biternion(Biternion { cos: 0.0, sin: -3.0 }).unwrap();
        assert!((a.degrees() - 270.0).abs() < 1e-12);
    }

    #[test]
    fn von_mises_values() {
        let zero = von_mises_loss(encode_biternion(Angle::from_degrees(30.0)), Angle::from_degrees(30.0), 1.0).unwrap();
        assert!(zero.abs() < 1e-15);
        let half_turn = von_mises_loss(encode_biternion(Angle::from_degrees(180.0)), Angle::from_degrees(0.0), 1.0).unwrap();
        assert!((half_turn - (1.0 - (-2.0f64).exp())).abs() < 1e-9);
        assert!((half_turn - 0.8647).abs() < 1e-4);
        let plus = von_mises_loss(encode_biternion(Angle::from_degrees(40.0)), Angle::from_degrees(0.0), 2.0).unwrap();
        let minus = von_mises_loss(encode_biternion(Angle::from_degrees(-40.0)), Angle::from_degrees(0.0), 2.0).unwrap();
        assert!((plus - minus).abs() < 1e-12);
        assert!(von_mises_loss(encode_biternion(Angle::from_degrees(0.0)), Angle::from_degrees(0.0), 0.0).is_err());
    }

    #[test]
    fn circular_means() {
        let all = field_of(&[42.0; 5]);
        let a = instance_orientation(&all, &[0, 1, 2, 3, 4]).unwrap();
        assert!((a.degrees() - 42.0).abs() < 1e-5);
        let wrap = instance_orientation(&field_of(&[350.0, 10.0]), &[0, 1]).unwrap();
        assert!(angular_error(wrap, Angle::from_degrees(0.0)) < 1e-5);
        let quarter = instance_orientation(&field_of(&[90.0, 180.0]), &[0, 1]).unwrap();
        assert!((quarter.degrees() - 135.0).abs() < 1e-5);
    }

    #[test]
    fn undefined_means() {
        let f = field_of(&[0.0, 180.0]);
        assert!(instance_orientation(&f, &[]).is_err());
        assert!(instance_orientation(&f, &[0, 1]).is_err());
    }

    #[test]
    fn targets_cover_annotated_relevant_instances() {
        let s = ClassSpectrum::nyuv2_40();
        // chair (relevant, annotated), table (not relevant), chair without annotation
        let sem = LabelMap::new(1, 4, vec![5, 7, 5, 1]).unwrap();
        let inst = LabelMap::new(1, 4, vec![1, 2, 3, 0]).unwrap();
        let ann = BTreeMap::from([(1, Angle::from_degrees(90.0)), (2, Angle::from_degrees(0.0))]);
        let (field, mask) = orientation_targets(&sem, &inst, &ann, &s).unwrap();
        assert_eq!(mask.data(), &[true, false, false, false]);
        assert!((field.data()[4] - 1.0).abs() < 1e-7);
        assert_eq!(field.data()[1], 0.0);
    }

    #[test]
    fn angular_error_cases() {
        let e = |a: f64, b: f64| angular_error(Angle::from_degrees(a), Angle::from_degrees(b));
        assert_eq!(e(0.0, 0.0), 0.0);
        assert_eq!(e(0.0, 180.0), 180.0);
        assert!((e(350.0, 10.0) - 20.0).abs() < 1e-12);
    }
}
