use rayon::prelude::*;

use crate::tensor::check;
use crate::{Result, Tensor, TensorError};

/// Weights and geometry of a 2-D convolution.
///
/// `weight` is `C_out×C_in×K_h×K_w`. Output extents follow
/// `H_out = (H + 2·pad_h − K_h) / stride_h + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub weight: Tensor,
    pub bias: Option<Vec<f32>>,
    pub stride: (usize, usize),
    pub padding: (usize, usize),
}

impl ConvParams {
    pub fn new(weight: Tensor, bias: Option<Vec<f32>>, stride: (usize, usize), padding: (usize, usize)) -> Result<Self> {
        if weight.rank() != 4 {
            return Err(TensorError::Rank {
                op: "conv_params",
                expected: 4,
                actual: weight.shape().to_vec(),
            });
        }
        if stride.0 == 0 || stride.1 == 0 {
            return Err(TensorError::Invalid {
                op: "conv_params",
                reason: "stride must be >= 1".into(),
            });
        }
        if let Some(b) = &bias {
            check("conv_params", "bias length", weight.shape()[0], b.len())?;
        }
        Ok(Self {
            weight,
            bias,
            stride,
            padding,
        })
    }

    /// Stride-1 convolution padded so spatial extents are preserved (odd kernels).
    pub fn same(weight: Tensor, bias: Option<Vec<f32>>) -> Result<Self> {
        let (kh, kw) = (weight.shape()[2], weight.shape()[3]);
        Self::new(weight, bias, (1, 1), (kh / 2, kw / 2))
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn kernel(&self) -> (usize, usize) {
        (self.weight.shape()[2], self.weight.shape()[3])
    }

    pub fn output_extent(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (kh, kw) = self.kernel();
        let (ph, pw) = self.padding;
        if h + 2 * ph < kh || w + 2 * pw < kw {
            return Err(TensorError::Invalid {
                op: "conv2d",
                reason: format!("kernel {kh}x{kw} larger than padded input {}x{}", h + 2 * ph, w + 2 * pw),
            });
        }
        Ok(((h + 2 * ph - kh) / self.stride.0 + 1, (w + 2 * pw - kw) / self.stride.1 + 1))
    }
}

/// Cross-correlation (no kernel flip), parallel over output planes.
pub fn conv2d(x: &Tensor, p: &ConvParams) -> Result<Tensor> {
    let (n, c, h, w) = x.nchw("conv2d")?;
    check("conv2d", "channels", p.in_channels(), c)?;
    let (ho, wo) = p.output_extent(h, w)?;
    let c_out = p.out_channels();
    let (kh, kw) = p.kernel();
    let (sh, sw) = p.stride;
    let (ph, pw) = p.padding;
    let weights = p.weight.data();
    let input = x.data();

    let mut out = vec![0.0f32; n * c_out * ho * wo];
    out.par_chunks_mut(ho * wo).enumerate().for_each(|(idx, plane)| {
        let (b, oc) = (idx / c_out, idx % c_out);
        if let Some(bias) = &p.bias {
            plane.fill(bias[oc]);
        }
        for ic in 0..c {
            let src = &input[(b * c + ic) * h * w..(b * c + ic + 1) * h * w];
            let kernel = &weights[(oc * c + ic) * kh * kw..(oc * c + ic + 1) * kh * kw];
            for ky in 0..kh {
                for kx in 0..kw {
                    let wv = kernel[ky * kw + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    // output columns whose input column ox*sw + kx - pw lies inside [0, w)
                    let lo = pw.saturating_sub(kx).div_ceil(sw);
                    let hi = if w + pw > kx { ((w + pw - kx - 1) / sw + 1).min(wo) } else { 0 };
                    if lo >= hi {
                        continue;
                    }
                    for oy in 0..ho {
                        let iy = (oy * sh + ky) as isize - ph as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let row = &src[iy as usize * w..(iy as usize + 1) * w];
                        let dst = &mut plane[oy * wo + lo..oy * wo + hi];
                        let ix0 = lo * sw + kx - pw;
                        if sw == 1 {
                            for (d, s) in dst.iter_mut().zip(&row[ix0..ix0 + (hi - lo)]) {
                                *d += wv * s;
                            }
                        } else {
                            for (d, s) in dst.iter_mut().zip(row[ix0..].iter().step_by(sw)) {
                                *d += wv * s;
                            }
                        }
                    }
                }
            }
        }
    });
    Tensor::image_like(x, n, c_out, ho, wo, out)
}

/// A 3×1 convolution followed by a 1×3 convolution.
pub fn factorized_conv3(x: &Tensor, p31: &ConvParams, p13: &ConvParams) -> Result<Tensor> {
    if p31.kernel() != (3, 1) {
        return Err(TensorError::Invalid {
            op: "factorized_conv3",
            reason: format!("first kernel must be 3x1, got {:?}", p31.kernel()),
        });
    }
    if p13.kernel() != (1, 3) {
        return Err(TensorError::Invalid {
            op: "factorized_conv3",
            reason: format!("second kernel must be 1x3, got {:?}", p13.kernel()),
        });
    }
    conv2d(&conv2d(x, p31)?, p13)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones_kernel(cout: usize, cin: usize, kh: usize, kw: usize) -> Tensor {
        Tensor::full(&[cout, cin, kh, kw], 1.0).unwrap()
    }

    #[test]
    fn counts_overlap_of_ones() {
        let x = Tensor::full(&[1, 1, 3, 3], 1.0).unwrap();
        let p = ConvParams::new(ones_kernel(1, 1, 3, 3), None, (1, 1), (1, 1)).unwrap();
        let y = conv2d(&x, &p).unwrap();
        assert_eq!(y.shape(), &[1, 1, 3, 3]);
        assert_eq!(y.data()[4], 9.0);
        assert_eq!(y.data()[0], 4.0);
        assert_eq!(y.data()[1], 6.0);
    }

    #[test]
    fn identity_kernel_preserves_input() {
        let x = Tensor::from_fn(&[2, 3, 5, 4], |i| (i as f32 * 0.37).sin()).unwrap();
        let mut w = vec![0.0; 9];
        for c in 0..3 {
            w[c * 3 + c] = 1.0;
        }
        let p = ConvParams::new(Tensor::new(vec![3, 3, 1, 1], w).unwrap(), None, (1, 1), (0, 0)).unwrap();
        assert_eq!(conv2d(&x, &p).unwrap(), x);
    }

    #[test]
    fn channel_mismatch_is_reported() {
        let x = Tensor::zeros(&[1, 2, 4, 4]).unwrap();
        let p = ConvParams::same(ones_kernel(1, 3, 3, 3), None).unwrap();
        assert!(matches!(
            conv2d(&x, &p),
            Err(TensorError::Mismatch { dim: "channels", expected: 3, actual: 2, .. })
        ));
    }

    #[test]
    fn factorized_rejects_wrong_kernels() {
        let x = Tensor::zeros(&[1, 1, 4, 4]).unwrap();
        let a = ConvParams::same(ones_kernel(1, 1, 3, 3), None).unwrap();
        let b = ConvParams::same(ones_kernel(1, 1, 1, 3), None).unwrap();
        assert!(factorized_conv3(&x, &a, &b).is_err());
    }

    #[test]
    fn factorized_identity_and_shape() {
        let x = Tensor::from_fn(&[1, 8, 16, 16], |i| (i % 17) as f32 - 8.0).unwrap();
        let mut k31 = vec![0.0; 8 * 8 * 3];
        let mut k13 = vec![0.0; 8 * 8 * 3];
        for c in 0..8 {
            k31[(c * 8 + c) * 3 + 1] = 1.0;
            k13[(c * 8 + c) * 3 + 1] = 1.0;
        }
        let p31 = ConvParams::same(Tensor::new(vec![8, 8, 3, 1], k31).unwrap(), None).unwrap();
        let p13 = ConvParams::same(Tensor::new(vec![8, 8, 1, 3], k13).unwrap(), None).unwrap();
        let y = factorized_conv3(&x, &p31, &p13).unwrap();
        assert_eq!(y.shape(), &[1, 8, 16, 16]);
        assert_eq!(y, x);
    }
}
