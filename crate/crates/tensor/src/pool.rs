use rayon::prelude::*;

use crate::{Result, Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolKind {
    Max,
    Avg,
}

/// Windowed pooling. Padded cells are ignored: they never win a max and are
/// not counted in an average.
pub fn pool2d(
    x: &Tensor,
    kind: PoolKind,
    window: (usize, usize),
    stride: (usize, usize),
    padding: (usize, usize),
) -> Result<Tensor> {
    let (n, c, h, w) = x.nchw("pool2d")?;
    let (kh, kw) = window;
    let (sh, sw) = stride;
    let (ph, pw) = padding;
    if kh == 0 || kw == 0 || sh == 0 || sw == 0 {
        return Err(TensorError::Invalid {
            op: "pool2d",
            reason: "window and stride must be >= 1".into(),
        });
    }
    if kh > h + 2 * ph || kw > w + 2 * pw {
        return Err(TensorError::Invalid {
            op: "pool2d",
            reason: format!("window {kh}x{kw} exceeds input {h}x{w} (padding {ph},{pw})"),
        });
    }
    if ph >= kh || pw >= kw {
        return Err(TensorError::Invalid {
            op: "pool2d",
            reason: "padding must be smaller than the window".into(),
        });
    }
    let ho = (h + 2 * ph - kh) / sh + 1;
    let wo = (w + 2 * pw - kw) / sw + 1;
    let src = x.data();
    let mut out = vec![0.0f32; n * c * ho * wo];
    out.par_chunks_mut(ho * wo).enumerate().for_each(|(p, plane)| {
        let input = &src[p * h * w..(p + 1) * h * w];
        for oy in 0..ho {
            let y0 = (oy * sh) as isize - ph as isize;
            let (ya, yb) = (y0.max(0) as usize, ((y0 + kh as isize) as usize).min(h));
            for ox in 0..wo {
                let x0 = (ox * sw) as isize - pw as isize;
                let (xa, xb) = (x0.max(0) as usize, ((x0 + kw as isize) as usize).min(w));
                let cells = (ya..yb).flat_map(|y| input[y * w + xa..y * w + xb].iter().copied());
                plane[oy * wo + ox] = match kind {
                    PoolKind::Max => cells.fold(f32::NEG_INFINITY, f32::max),
                    PoolKind::Avg => {
                        let count = ((yb - ya) * (xb - xa)) as f32;
                        cells.sum::<f32>() / count
                    }
                };
            }
        }
    });
    Tensor::image_like(x, n, c, ho, wo, out)
}

/// Reduces every channel plane to its mean; output is `…×C×1×1`.
pub fn global_avg_pool(x: &Tensor) -> Result<Tensor> {
    adaptive_avg_pool(x, (1, 1))
}

/// Adaptive average pooling: output cell `i` covers input rows
/// `floor(i·H/out) .. ceil((i+1)·H/out)`.
pub fn adaptive_avg_pool(x: &Tensor, out: (usize, usize)) -> Result<Tensor> {
    let (n, c, h, w) = x.nchw("adaptive_avg_pool")?;
    let (oh, ow) = out;
    if oh == 0 || ow == 0 || oh > h || ow > w {
        return Err(TensorError::Invalid {
            op: "adaptive_avg_pool",
            reason: format!("output {oh}x{ow} invalid for input {h}x{w}"),
        });
    }
    let src = x.data();
    let mut data = vec![0.0f32; n * c * oh * ow];
    data.par_chunks_mut(oh * ow).enumerate().for_each(|(p, plane)| {
        let input = &src[p * h * w..(p + 1) * h * w];
        for i in 0..oh {
            let (ya, yb) = (i * h / oh, ((i + 1) * h).div_ceil(oh));
            for j in 0..ow {
                let (xa, xb) = (j * w / ow, ((j + 1) * w).div_ceil(ow));
                let mut sum = 0.0f64;
                for y in ya..yb {
                    sum += input[y * w + xa..y * w + xb].iter().map(|&v| v as f64).sum::<f64>();
                }
                plane[i * ow + j] = (sum / ((yb - ya) * (xb - xa)) as f64) as f32;
            }
        }
    });
    Tensor::image_like(x, n, c, oh, ow, data)
}
