use rayon::prelude::*;

use crate::tensor::check;
use crate::{Result, Tensor, TensorError};

/// Per-channel (depthwise) ×2 transposed-convolution weights: a `C×1×4×4`
/// kernel with stride 2 applied to an edge-replicated input.
#[derive(Debug, Clone, PartialEq)]
pub struct UpsampleWeights {
    pub kernel: Tensor,
    pub bias: Vec<f32>,
}

/// Taps of the 1-D ×2 bilinear (half-pixel) interpolation kernel.
pub fn bilinear_kernel_1d() -> [f32; 4] {
    [0.25, 0.75, 0.75, 0.25]
}

impl UpsampleWeights {
    /// Initialization that reproduces ×2 bilinear interpolation exactly.
    pub fn bilinear(channels: usize) -> Self {
        let k = bilinear_kernel_1d();
        let plane: Vec<f32> = (0..16).map(|i| k[i / 4] * k[i % 4]).collect();
        let data = plane.iter().copied().cycle().take(16 * channels).collect();
        Self {
            kernel: Tensor::new(vec![channels, 1, 4, 4], data).expect("static shape"),
            bias: vec![0.0; channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.bias.len()
    }
}

/// Learned ×2 upsampling. Output pixel `o` along an axis gathers input
/// positions `(o + 1 − k) / 2` for kernel taps `k` of matching parity, with
/// out-of-range positions clamped to the border.
pub fn learned_upsample(x: &Tensor, p: &UpsampleWeights) -> Result<Tensor> {
    let (n, c, h, w) = x.nchw("learned_upsample")?;
    if p.kernel.shape() != [p.channels(), 1, 4, 4] {
        return Err(TensorError::Invalid {
            op: "learned_upsample",
            reason: format!("kernel must be {}x1x4x4, got {:?}", p.channels(), p.kernel.shape()),
        });
    }
    check("learned_upsample", "channels", p.channels(), c)?;
    let (ho, wo) = (2 * h, 2 * w);
    let src = x.data();
    let kernel = p.kernel.data();
    // for each output coordinate, the two (tap, source index) pairs that reach it
    let taps = |o: usize, len: usize| -> [(usize, usize); 2] {
        let base = o + 1;
        let first = base % 2;
        [first, first + 2].map(|k| {
            let i = (base as isize - k as isize) / 2;
            (k, i.clamp(0, len as isize - 1) as usize)
        })
    };
    let row_taps: Vec<_> = (0..ho).map(|o| taps(o, h)).collect();
    let col_taps: Vec<_> = (0..wo).map(|o| taps(o, w)).collect();
    let mut out = vec![0.0f32; n * c * ho * wo];
    out.par_chunks_mut(ho * wo).enumerate().for_each(|(idx, plane)| {
        let ch = idx % c;
        let input = &src[idx * h * w..(idx + 1) * h * w];
        let k = &kernel[ch * 16..(ch + 1) * 16];
        for (oy, rt) in row_taps.iter().enumerate() {
            for (ox, ct) in col_taps.iter().enumerate() {
                let mut acc = p.bias[ch];
                for &(ky, iy) in rt {
                    for &(kx, ix) in ct {
                        acc += k[ky * 4 + kx] * input[iy * w + ix];
                    }
                }
                plane[oy * wo + ox] = acc;
            }
        }
    });
    Tensor::image_like(x, n, c, ho, wo, out)
}

/// Bilinear resize with half-pixel centers and border clamping.
pub fn bilinear_resize(x: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (n, c, h, w) = x.nchw("bilinear_resize")?;
    if out_h == 0 || out_w == 0 {
        return Err(TensorError::Invalid {
            op: "bilinear_resize",
            reason: "output extents must be >= 1".into(),
        });
    }
    let axis = |out: usize, len: usize| -> Vec<(usize, usize, f32)> {
        let scale = len as f64 / out as f64;
        (0..out)
            .map(|o| {
                let s = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
                let i0 = (s.floor() as usize).min(len - 1);
                let i1 = (i0 + 1).min(len - 1);
                (i0, i1, (s - i0 as f64) as f32)
            })
            .collect()
    };
    let ys = axis(out_h, h);
    let xs = axis(out_w, w);
    let src = x.data();
    let mut out = vec![0.0f32; n * c * out_h * out_w];
    out.par_chunks_mut(out_h * out_w).enumerate().for_each(|(idx, plane)| {
        let input = &src[idx * h * w..(idx + 1) * h * w];
        for (oy, &(y0, y1, fy)) in ys.iter().enumerate() {
            for (ox, &(x0, x1, fx)) in xs.iter().enumerate() {
                let top = input[y0 * w + x0] * (1.0 - fx) + input[y0 * w + x1] * fx;
                let bottom = input[y1 * w + x0] * (1.0 - fx) + input[y1 * w + x1] * fx;
                plane[oy * out_w + ox] = top * (1.0 - fy) + bottom * fy;
            }
        }
    });
    Tensor::image_like(x, n, c, out_h, out_w, out)
}
