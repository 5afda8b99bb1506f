//! Seeded synthetic scenes: a wall/floor background with non-overlapping
//! rectangles and ellipses as thing instances.

use std::collections::BTreeMap;

use mtscene_tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Sample, MIN_INSTANCE_FRACTION};
use crate::codec::instance_centers;
use crate::error::{Error, Result};
use crate::labels::LabelMap;
use crate::orientation::Angle;
use crate::spectrum::{ClassSpectrum, SceneSpectrum};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub height: usize,
    pub width: usize,
    pub n_instances: usize,
    /// Centers of distinct instances are more than this many pixels apart
    /// along at least one axis.
    pub min_center_separation: u32,
    pub max_attempts_per_instance: usize,
}

impl SynthOptions {
    pub fn new(height: usize, width: usize, n_instances: usize) -> Self {
        Self {
            height,
            width,
            n_instances,
            min_center_separation: 8,
            max_attempts_per_instance: 400,
        }
    }
}

#[derive(Clone, Copy)]
enum Shape {
    Rect { r0: usize, c0: usize, h: usize, w: usize },
    Ellipse { cr: f64, cc: f64, ar: f64, ac: f64 },
}

impl Shape {
    fn pixels(self, height: usize, width: usize) -> Vec<usize> {
        match self {
            Shape::Rect { r0, c0, h, w } => (r0..r0 + h).flat_map(|r| (c0..c0 + w).map(move |c| r * width + c)).collect(),
            Shape::Ellipse { cr, cc, ar, ac } => {
                let mut px = Vec::new();
                let (r_lo, r_hi) = ((cr - ar).floor().max(0.0) as usize, ((cr + ar).ceil() as usize).min(height - 1));
                let (c_lo, c_hi) = ((cc - ac).floor().max(0.0) as usize, ((cc + ac).ceil() as usize).min(width - 1));
                for r in r_lo..=r_hi {
                    for c in c_lo..=c_hi {
                        let (dr, dc) = ((r as f64 - cr) / ar, (c as f64 - cc) / ac);
                        if dr * dr + dc * dc <= 1.0 {
                            px.push(r * width + c);
                        }
                    }
                }
                px
            }
        }
    }
}

fn stuff_id(spectrum: &ClassSpectrum, name: &str, fallback: usize) -> Result<u32> {
    spectrum
        .id_of(name)
        .filter(|id| spectrum.is_stuff(*id))
        .or_else(|| spectrum.stuff.iter().nth(fallback).or(spectrum.stuff.iter().next()).copied())
        .ok_or_else(|| Error::Synth(format!("spectrum '{}' has no stuff classes", spectrum.name)))
}

/// Generates a deterministic ground-truth sample.
///
/// Instances never overlap, cover at least the minimum instance area, and
/// their rounded centers of mass are pairwise separated by more than
/// `min_center_separation` pixels in Chebyshev distance, so a max-pooling
/// window of side `2·separation + 1` never contains two centers.
pub fn synth_scene(seed: u64, opts: &SynthOptions, spectrum: &ClassSpectrum) -> Result<Sample> {
    let (h, w) = (opts.height, opts.width);
    if h < 16 || w < 16 {
        return Err(Error::Synth(format!("scene {h}x{w} too small (minimum 16x16)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wall = stuff_id(spectrum, "wall", 0)?;
    let floor = stuff_id(spectrum, "floor", 1)?;
    let horizon = rng.random_range(2 * h / 5..=7 * h / 10);
    let mut semantic = LabelMap::new(h, w, (0..h * w).map(|i| if i / w < horizon { wall } else { floor }).collect())?;
    let mut instance = LabelMap::filled(h, w, 0);

    let things: Vec<u32> = spectrum.thing_ids().collect();
    let oriented: Vec<u32> = spectrum.orientation.iter().copied().collect();
    if things.is_empty() && opts.n_instances > 0 {
        return Err(Error::Synth(format!("spectrum '{}' has no thing classes", spectrum.name)));
    }
    let min_area = (MIN_INSTANCE_FRACTION * (h * w) as f64).ceil() as usize;
    let min_side = ((min_area as f64).sqrt().ceil() as usize + 1).max(4);
    let max_side = (h.min(w) / 3).max(min_side + 1);

    let mut centers: Vec<(u32, u32)> = Vec::new();
    let mut orientations = BTreeMap::new();
    let mut classes = BTreeMap::new();
    for k in 0..opts.n_instances {
        let id = k as u32 + 1;
        let mut placed = false;
        for _ in 0..opts.max_attempts_per_instance {
            let sh = rng.random_range(min_side..=max_side);
            let sw = rng.random_range(min_side..=max_side);
            if sh >= h || sw >= w {
                continue;
            }
            let r0 = rng.random_range(0..h - sh);
            let c0 = rng.random_range(0..w - sw);
            let shape = if rng.random_bool(0.5) {
                Shape::Rect { r0, c0, h: sh, w: sw }
            } else {
                Shape::Ellipse {
                    cr: r0 as f64 + sh as f64 / 2.0,
                    cc: c0 as f64 + sw as f64 / 2.0,
                    ar: sh as f64 / 2.0,
                    ac: sw as f64 / 2.0,
                }
            };
            let px = shape.pixels(h, w);
            if px.len() < min_area || px.iter().any(|&p| instance.data()[p] != 0) {
                continue;
            }
            let (sr, sc) = px.iter().fold((0.0, 0.0), |(a, b), &p| (a + (p / w) as f64, b + (p % w) as f64));
            let center = ((sr / px.len() as f64).round() as u32, (sc / px.len() as f64).round() as u32);
            let separated = centers.iter().all(|&(r, c)| {
                r.abs_diff(center.0).max(c.abs_diff(center.1)) > opts.min_center_separation
            });
            if !separated {
                continue;
            }
            let class = if !oriented.is_empty() && rng.random_bool(0.5) {
                oriented[rng.random_range(0..oriented.len())]
            } else {
                things[rng.random_range(0..things.len())]
            };
            for &p in &px {
                instance.data_mut()[p] = id;
                semantic.data_mut()[p] = class;
            }
            if spectrum.is_orientation_relevant(class) {
                let deg = (rng.random_range(0.0..360.0f64) * 100.0).round() / 100.0;
                orientations.insert(id, Angle::from_degrees(deg));
            }
            classes.insert(id, class);
            centers.push(center);
            placed = true;
            break;
        }
        if !placed {
            return Err(Error::Synth(format!(
                "could not place instance {id} of {} in a {h}x{w} scene after {} attempts",
                opts.n_instances, opts.max_attempts_per_instance
            )));
        }
    }
    debug_assert_eq!(
        instance_centers(&instance).iter().map(|c| (c.row, c.col)).collect::<Vec<_>>(),
        centers
    );

    // Flat per-class colors with mild texture; depth recedes toward the horizon.
    let hw = h * w;
    let mut rgb = vec![0.0f32; 3 * hw];
    let mut depth = vec![0.0f32; hw];
    let palette = |id: u32, c: usize| ((id as usize * [97, 57, 31][c] + [40, 90, 160][c]) % 200 + 30) as u32;
    for i in 0..hw {
        let (r, _c) = (i / w, i % w);
        let class = semantic.data()[i];
        let jitter = rng.random_range(0..16u32);
        for c in 0..3 {
            rgb[c * hw + i] = (palette(class, c) + jitter).min(255) as f32 / 255.0;
        }
        let base_mm = if r < horizon {
            4000
        } else {
            4000 - (r - horizon) as u32 * 3000 / (h - horizon).max(1) as u32
        };
        let inst_id = instance.data()[i];
        let mm = if inst_id > 0 { base_mm.saturating_sub(300 + 50 * inst_id) } else { base_mm };
        // a few invalid measurements
        depth[i] = if rng.random_range(0..100) == 0 { 0.0 } else { mm as f32 / 1000.0 };
    }
    let scene = rng.random_range(1..SceneSpectrum::indoor().len() as u32);

    Ok(Sample {
        id: format!("{seed:08}"),
        rgb: Tensor::new(vec![3, h, w], rgb)?,
        depth: Tensor::new(vec![1, h, w], depth)?,
        semantic,
        instance,
        orientations,
        scene,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let s = ClassSpectrum::nyuv2_40();
        let o = SynthOptions::new(64, 96, 5);
        assert_eq!(synth_scene(3, &o, &s).unwrap(), synth_scene(3, &o, &s).unwrap());
        assert_ne!(synth_scene(3, &o, &s).unwrap(), synth_scene(4, &o, &s).unwrap());
    }

    #[test]
    fn empty_scene_is_pure_stuff() {
        let s = ClassSpectrum::nyuv2_40();
        let scene = synth_scene(1, &SynthOptions::new(48, 64, 0), &s).unwrap();
        assert!(scene.instance.data().iter().all(|&v| v == 0));
        assert!(scene.semantic.data().iter().all(|&v| s.is_stuff(v)));
        assert!(scene.orientations.is_empty());
    }

    #[test]
    fn generator_contract() {
        let s = ClassSpectrum::nyuv2_40();
        for seed in 0..30 {
            let scene = synth_scene(seed, &SynthOptions::new(96, 128, 6), &s).unwrap();
            let min_area = MIN_INSTANCE_FRACTION * (96.0 * 128.0);
            let hist = scene.instance.histogram();
            assert_eq!(hist.len(), 7);
            for (&id, &area) in &hist {
                if id > 0 {
                    assert!(area as f64 >= min_area);
                }
            }
            let centers = instance_centers(&scene.instance);
            for (i, a) in centers.iter().enumerate() {
                for b in &centers[i + 1..] {
                    assert!(a.row.abs_diff(b.row).max(a.col.abs_diff(b.col)) > 8);
                }
            }
            for (i, (&sem, &inst)) in scene.semantic.data().iter().zip(scene.instance.data()).enumerate() {
                assert_eq!(s.is_thing(sem), inst > 0, "pixel {i}");
            }
            for id in scene.orientations.keys() {
                assert!(hist.contains_key(id));
            }
        }
    }

    #[test]
    fn impossible_request_fails() {
        let s = ClassSpectrum::nyuv2_40();
        let mut o = SynthOptions::new(32, 32, 40);
        o.max_attempts_per_instance = 50;
        assert!(matches!(synth_scene(0, &o, &s), Err(Error::Synth(_))));
    }
}
