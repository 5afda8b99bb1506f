use rand::Rng;

use crate::activation::relu_inplace;
use crate::conv::{conv2d, ConvParams};
use crate::init::{he_normal, uniform_fan_in};
use crate::norm::{batch_norm, NormParams};
use crate::{Result, Tensor, TensorError};

/// Weights of a NonBottleneck1D residual block.
///
/// Branch: 3×1 → relu → 1×3 → norm → relu → 3×1 → relu → 1×3 → norm.
/// When the block downsamples, the first pair is strided (2 along its own
/// axis) and the skip path is a strided 1×1 projection followed by a norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Nbt1dWeights {
    pub conv3x1_1: ConvParams,
    pub conv1x3_1: ConvParams,
    pub norm1: NormParams,
    pub conv3x1_2: ConvParams,
    pub conv1x3_2: ConvParams,
    pub norm2: NormParams,
    pub projection: Option<(ConvParams, NormParams)>,
    /// Training-time dropout rate; identity at inference.
    pub dropout_rate: f32,
}

impl Nbt1dWeights {
    pub fn downsample(&self) -> bool {
        self.conv3x1_1.stride.0 > 1 || self.conv1x3_1.stride.1 > 1
    }

    /// He-initialized block. With `zero_init_residual` the final norm's
    /// scale and shift are zero, so the branch contributes nothing.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        in_channels: usize,
        out_channels: usize,
        downsample: bool,
        zero_init_residual: bool,
        dropout_rate: f32,
    ) -> Self {
        let s = if downsample { 2 } else { 1 };
        let mut conv = |cin: usize, kh: usize, kw: usize, stride: (usize, usize)| {
            let fan_in = cin * kh * kw;
            let weight = he_normal(rng, &[out_channels, cin, kh, kw], fan_in);
            let bias = uniform_fan_in(rng, &[out_channels], fan_in).into_data();
            ConvParams::new(weight, Some(bias), stride, (kh / 2, kw / 2)).expect("valid geometry")
        };
        let conv3x1_1 = conv(in_channels, 3, 1, (s, 1));
        let conv1x3_1 = conv(out_channels, 1, 3, (1, s));
        let conv3x1_2 = conv(out_channels, 3, 1, (1, 1));
        let conv1x3_2 = conv(out_channels, 1, 3, (1, 1));
        let mut norm2 = NormParams::identity(out_channels);
        if zero_init_residual {
            norm2.gamma.fill(0.0);
        }
        let projection = (downsample || in_channels != out_channels).then(|| {
            let weight = he_normal(rng, &[out_channels, in_channels, 1, 1], in_channels);
            (
                ConvParams::new(weight, None, (s, s), (0, 0)).expect("valid geometry"),
                NormParams::identity(out_channels),
            )
        });
        Self {
            conv3x1_1,
            conv1x3_1,
            norm1: NormParams::identity(out_channels),
            conv3x1_2,
            conv1x3_2,
            norm2,
            projection,
            dropout_rate,
        }
    }
}

/// The block's skip path: the input itself, or its strided projection.
pub fn nbt1d_shortcut(x: &Tensor, w: &Nbt1dWeights) -> Result<Tensor> {
    match &w.projection {
        Some((conv, norm)) => batch_norm(&conv2d(x, conv)?, norm),
        None => Ok(x.clone()),
    }
}

/// `relu(shortcut(x) + branch(x))`.
pub fn nbt1d_block(x: &Tensor, w: &Nbt1dWeights) -> Result<Tensor> {
    let mut y = conv2d(x, &w.conv3x1_1)?;
    relu_inplace(&mut y);
    let mut y = batch_norm(&conv2d(&y, &w.conv1x3_1)?, &w.norm1)?;
    relu_inplace(&mut y);
    let mut y = conv2d(&y, &w.conv3x1_2)?;
    relu_inplace(&mut y);
    let branch = batch_norm(&conv2d(&y, &w.conv1x3_2)?, &w.norm2)?;

    let shortcut = nbt1d_shortcut(x, w)?;
    if shortcut.shape() != branch.shape() {
        return Err(TensorError::Invalid {
            op: "nbt1d_block",
            reason: format!(
                "residual {:?} and branch {:?} disagree; a projection is required",
                shortcut.shape(),
                branch.shape()
            ),
        });
    }
    let mut out = shortcut.add(&branch)?;
    relu_inplace(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn downsampling_halves_extent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = Nbt1dWeights::random(&mut rng, 64, 96, true, false, 0.1);
        let x = Tensor::from_fn(&[1, 64, 32, 32], |i| ((i * 7919) % 13) as f32 / 13.0 - 0.5).unwrap();
        let y = nbt1d_block(&x, &w).unwrap();
        assert_eq!(y.shape(), &[1, 96, 16, 16]);
    }

    #[test]
    fn missing_projection_is_a_channel_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut w = Nbt1dWeights::random(&mut rng, 4, 8, false, false, 0.1);
        w.projection = None;
        let x = Tensor::zeros(&[1, 4, 6, 6]).unwrap();
        assert!(nbt1d_block(&x, &w).is_err());
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = Nbt1dWeights::random(&mut rng, 8, 8, false, false, 0.1);
        let x = Tensor::from_fn(&[2, 8, 10, 12], |i| (i as f32 * 0.013).cos()).unwrap();
        let a = nbt1d_block(&x, &w).unwrap();
        let b = nbt1d_block(&x, &w).unwrap();
        assert_eq!(a.data(), b.data());
    }
}
