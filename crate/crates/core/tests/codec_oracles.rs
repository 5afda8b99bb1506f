use mtscene_core::codec::{
    decode_centers, encode_targets, group_pixels, instances_to_label_map, CenterPeak, CodecConfig,
};
use mtscene_core::dataset::{synth_scene, SynthOptions};
use mtscene_core::spectrum::ClassSpectrum;
use mtscene_core::{LabelMap, Mask};
use mtscene_tensor::Tensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Per-pixel scan over every center, written without sharing code with the
/// library: minimum squared distance, ties to higher score, then smaller
/// (row, col). Labels are 1-based ranks in (score desc, row, col) order.
fn brute_force_grouping(centers: &[CenterPeak], offsets: &Tensor, fg: &Mask, delta: f64) -> Vec<u32> {
    let (h, w) = fg.extents();
    let mut ranked: Vec<CenterPeak> = centers.to_vec();
    ranked.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then((a.row, a.col).cmp(&(b.row, b.col)))
    });
    let limit = delta * ((h * h + w * w) as f64).sqrt();
    let mut out = vec![0u32; h * w];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if !fg.get(i) {
                continue;
            }
            let y = r as f64 + offsets.data()[i] as f64 * h as f64;
            let x = c as f64 + offsets.data()[h * w + i] as f64 * w as f64;
            let mut best: Option<(f64, usize)> = None;
            for (k, p) in ranked.iter().enumerate() {
                let d = (y - p.row as f64).powi(2) + (x - p.col as f64).powi(2);
                let better = match best {
                    None => true,
                    Some((bd, bk)) => d < bd || (d == bd && k < bk),
                };
                if better {
                    best = Some((d, k));
                }
            }
            if let Some((d, k)) = best {
                if d <= limit * limit {
                    out[i] = k as u32 + 1;
                }
            }
        }
    }
    out
}

#[test]
fn grouping_matches_brute_force_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let (h, w) = (64usize, 64usize);
        let n_centers = rng.random_range(0..8);
        let centers: Vec<CenterPeak> = (0..n_centers)
            .map(|_| CenterPeak {
                row: rng.random_range(0..h as u32),
                col: rng.random_range(0..w as u32),
                // coarse scores so equal-score ties occur
                score: rng.random_range(1..5) as f32 * 0.2,
            })
            .collect();
        let integer_offsets = case % 3 == 0;
        let offsets = Tensor::from_fn(&[2, h, w], |i| {
            let extent = if i < h * w { h } else { w } as f32;
            if integer_offsets {
                rng.random_range(-6i32..=6) as f32 / extent
            } else {
                rng.random_range(-0.3f32..0.3)
            }
        })
        .unwrap();
        let fg = Mask::new(h, w, (0..h * w).map(|_| rng.random_bool(0.6)).collect()).unwrap();
        let cfg = CodecConfig {
            unknown_distance: rng.random_range(0.02..0.4),
            ..CodecConfig::default()
        };
        let instances = group_pixels(&centers, &offsets, &fg, &cfg).unwrap();
        let got = instances_to_label_map(&instances, h, w).unwrap();
        let want = brute_force_grouping(&centers, &offsets, &fg, cfg.unknown_distance);
        assert_eq!(got.data(), &want[..], "case {case}");

        // partition of the foreground: disjoint, inside the mask
        let mut seen = vec![false; h * w];
        for inst in &instances {
            assert!(!inst.pixels.is_empty());
            for &p in &inst.pixels {
                assert!(fg.get(p as usize));
                assert!(!std::mem::replace(&mut seen[p as usize], true));
            }
        }
    }
}

fn naive_nms(heat: &[f32], h: usize, w: usize, cfg: &CodecConfig) -> Vec<(u32, u32, f32)> {
    let r = (cfg.pool_size / 2) as isize;
    let mut peaks = Vec::new();
    for y in 0..h as isize {
        for x in 0..w as isize {
            let v = heat[(y as usize) * w + x as usize];
            if v < cfg.threshold {
                continue;
            }
            let mut is_max = true;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (yy, xx) = (y + dy, x + dx);
                    if yy >= 0 && xx >= 0 && yy < h as isize && xx < w as isize && heat[yy as usize * w + xx as usize] > v {
                        is_max = false;
                    }
                }
            }
            if is_max {
                peaks.push((y as u32, x as u32, v));
            }
        }
    }
    peaks.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then((a.0, a.1).cmp(&(b.0, b.1))));
    let mut kept: Vec<(u32, u32, f32)> = Vec::new();
    for p in peaks {
        let twin = kept
            .iter()
            .any(|k| k.2 == p.2 && k.0.abs_diff(p.0) as isize <= r && k.1.abs_diff(p.1) as isize <= r);
        if !twin && kept.len() < cfg.top_k {
            kept.push(p);
        }
    }
    kept
}

#[test]
fn decoding_matches_naive_window_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..60 {
        let (h, w) = (rng.random_range(8..48), rng.random_range(8..48));
        let quantized = case % 2 == 0;
        let heat: Vec<f32> = (0..h * w)
            .map(|_| {
                if quantized {
                    rng.random_range(0..6) as f32 / 5.0
                } else {
                    rng.random_range(0.0f32..1.0)
                }
            })
            .collect();
        let cfg = CodecConfig {
            pool_size: [3, 5, 9, 17][case % 4],
            top_k: rng.random_range(1..20),
            threshold: rng.random_range(0.05..0.9),
            ..CodecConfig::default()
        };
        let t = Tensor::new(vec![1, h, w], heat.clone()).unwrap();
        let got: Vec<(u32, u32, f32)> = decode_centers(&t, &cfg).unwrap().iter().map(|p| (p.row, p.col, p.score)).collect();
        assert_eq!(got, naive_nms(&heat, h, w, &cfg), "case {case}");
        assert!(got.len() <= cfg.top_k);
        assert!(got.iter().all(|p| p.2 >= cfg.threshold));
    }
}

fn gaussian_peaks(h: usize, w: usize, peaks: &[(f64, f64, f32)]) -> Tensor {
    Tensor::from_fn(&[1, h, w], |i| {
        let (r, c) = ((i / w) as f64, (i % w) as f64);
        peaks
            .iter()
            .map(|&(pr, pc, s)| s * (-((r - pr).powi(2) + (c - pc).powi(2)) / 8.0).exp() as f32)
            .fold(0.0, f32::max)
    })
    .unwrap()
}

#[test]
fn peak_spacing_against_pool_window() {
    let cfg = CodecConfig::default();
    let near = gaussian_peaks(40, 40, &[(20.0, 10.0, 0.9), (20.0, 15.0, 0.8)]);
    let found = decode_centers(&near, &cfg).unwrap();
    assert_eq!(found.len(), 1);
    assert_eq!((found[0].row, found[0].col), (20, 10));
    let far = gaussian_peaks(40, 40, &[(20.0, 10.0, 0.9), (20.0, 22.0, 0.8)]);
    assert_eq!(decode_centers(&far, &cfg).unwrap().len(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn raising_threshold_never_adds_centers(seed in any::<u64>(), lo in 0.05f32..0.5, step in 0.0f32..0.45) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let heat = Tensor::from_fn(&[1, 24, 24], |_| rng.random_range(0.0f32..1.0)).unwrap();
        let a = CodecConfig { threshold: lo, ..CodecConfig::default() };
        let b = CodecConfig { threshold: lo + step, ..CodecConfig::default() };
        prop_assert!(decode_centers(&heat, &b).unwrap().len() <= decode_centers(&heat, &a).unwrap().len());
    }
}

#[test]
fn ground_truth_round_trip_on_synthetic_scenes() {
    let spectrum = ClassSpectrum::nyuv2_40();
    let cfg = CodecConfig::default();
    for seed in 0..25 {
        let s = synth_scene(seed, &SynthOptions::new(96, 128, 1 + (seed as usize % 8)), &spectrum).unwrap();
        let targets = encode_targets(&s.instance, &cfg).unwrap();
        let centers = decode_centers(&targets.center, &cfg).unwrap();
        assert_eq!(centers.len(), targets.centers.len());
        let fg = Mask::from_fn(&s.semantic, |id| spectrum.is_thing(id));
        let inst = group_pixels(&centers, &targets.offset, &fg, &cfg).unwrap();
        let map = instances_to_label_map(&inst, 96, 128).unwrap();
        assert_same_partition(&map, &s.instance);
    }
}

fn assert_same_partition(a: &LabelMap, b: &LabelMap) {
    let mut fwd = std::collections::HashMap::new();
    let mut bwd = std::collections::HashMap::new();
    for (&x, &y) in a.data().iter().zip(b.data()) {
        assert_eq!(x == 0, y == 0);
        assert_eq!(*fwd.entry(x).or_insert(y), y);
        assert_eq!(*bwd.entry(y).or_insert(x), x);
    }
}

#[test]
fn encoded_targets_follow_definitions() {
    let mut map = LabelMap::filled(100, 100, 0);
    for r in 18..23 {
        for c in 28..33 {
            map.set(r, c, 3);
        }
    }
    let cfg = CodecConfig {
        min_area_fraction: 0.0,
        ..CodecConfig::default()
    };
    let t = encode_targets(&map, &cfg).unwrap();
    assert_eq!(t.center.data()[20 * 100 + 30], 1.0);
    assert!((t.center.data()[28 * 100 + 30] - (-0.5f32).exp()).abs() < 1e-6);
    assert!((t.offset.data()[18 * 100 + 28] - 0.02).abs() < 1e-7);
    assert!((t.offset.data()[10_000 + 18 * 100 + 28] - 0.02).abs() < 1e-7);
    assert_eq!(t.instance_mask.count(), 25);
    assert!(t.center.data().iter().all(|v| (0.0..=1.0).contains(v)));
}
