use mtscene_tensor::{
    adaptive_avg_pool, batch_norm, bilinear_resize, conv2d, fully_connected, global_avg_pool, he_normal,
    learned_upsample, nbt1d_block, pool2d, relu_inplace, sigmoid, uniform_fan_in, ConvParams, Nbt1dWeights,
    NormParams, PoolKind, Tensor, UpsampleWeights,
};
use rand::Rng;

use super::params::{join, visit_vec, ParamVisitor, Visit};
use crate::error::Result;

/// Convolution with optional norm and relu.
#[derive(Debug, Clone)]
pub struct ConvUnit {
    pub conv: ConvParams,
    pub norm: Option<NormParams>,
    pub relu: bool,
}

impl ConvUnit {
    pub fn random<R: Rng>(rng: &mut R, cin: usize, cout: usize, kernel: usize, stride: usize, norm: bool, relu: bool) -> Self {
        let fan_in = cin * kernel * kernel;
        let weight = he_normal(rng, &[cout, cin, kernel, kernel], fan_in);
        let bias = (!norm).then(|| uniform_fan_in(rng, &[cout], fan_in).into_data());
        Self {
            conv: ConvParams::new(weight, bias, (stride, stride), (kernel / 2, kernel / 2)).expect("valid geometry"),
            norm: norm.then(|| NormParams::identity(cout)),
            relu,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut y = conv2d(x, &self.conv)?;
        if let Some(n) = &self.norm {
            y = batch_norm(&y, n)?;
        }
        if self.relu {
            relu_inplace(&mut y);
        }
        Ok(y)
    }
}

impl Visit for ConvUnit {
    fn visit(&mut self, prefix: &str, v: &mut dyn ParamVisitor) -> Result<()> {
        self.conv.visit(&join(prefix, "conv"), v)?;
        if let Some(n) = &mut self.norm {
            n.visit(&join(prefix, "norm"), v)?;
        }
        Ok(())
    }
}

/// Fully-connected layer `out×in` with bias.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Vec<f32>,
}

impl Dense {
    pub fn he<R: Rng>(rng: &mut R, cin: usize, cout: usize) -> Self {
        Self {
            weight: he_normal(rng, &[cout, cin], cin),
            bias: vec![0.0; cout],
        }
    }

    pub fn uniform<R: Rng>(rng: &mut R, cin: usize, cout: usize) -> Self {
        Self {
            weight: uniform_fan_in(rng, &[cout, cin], cin),
            bias: uniform_fan_in(rng, &[cout], cin).into_data(),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(fully_connected(x, &self.weight, &self.bias)?)
    }
}

impl Visit for Dense {
    fn visit(&mut self, prefix: &str, v: &mut dyn ParamVisitor) -> Result<()> {
        v.tensor(&join(prefix, "weight"), &mut self.weight)?;
        visit_vec(prefix, "bias", &mut self.bias, v)
    }
}

/// Squeeze-excitation channel gate: global pool, FC, relu, FC, sigmoid.
#[derive(Debug, Clone)]
pub struct SeGate {
    pub squeeze: Dense,
    pub excite: Dense,
}

impl SeGate {
    pub fn random<R: Rng>(rng: &mut R, channels: usize, reduction: usize) -> Self {
        let hidden = (channels / reduction).max(1);
        Self {
            squeeze: Dense::he(rng, channels, hidden),
            excite: Dense::he(rng, hidden, channels),
        }
    }

    /// Per-channel gate values in (0, 1).
    pub fn gate(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = self.squeeze.forward(&global_avg_pool(x)?)?;
        relu_inplace(&mut h);
        Ok(sigmoid(&self.excite.forward(&h)?))
    }

    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let g = self.gate(x)?;
        let (_, c, h, w) = x.nchw("se gate")?;
        let mut y = x.clone();
        for (ch, plane) in y.data_mut().chunks_exact_mut(h * w).enumerate() {
            let s = g.data()[ch % c];
            plane.iter_mut().for_each(|v| *v *= s);
        }
        Ok(y)
    }
}

impl Visit for SeGate {
    fn visit(&mut self, prefix: &str, v: &mut dyn ParamVisitor) -> Result<()> {
        self.squeeze.visit(&join(prefix, "squeeze"), v)?;
        self.excite.visit(&join(prefix, "excite"), v)
    }
}

/// Attention fusion of depth into RGB: `se_rgb(rgb) + se_depth(depth)`.
#[derive(Debug, Clone)]
pub struct Fusion {
    pub rgb: SeGate,
    pub depth: SeGate,
}

impl Fusion {
    pub fn random<R: Rng>(rng: &mut R, channels: usize, reduction: usize) -> Self {
        Self {
            rgb: SeGate::random(rng, channels, reduction),
            depth: SeGate::random(rng, channels, reduction),
        }
    }

    pub fn forward(&self, rgb: &Tensor, depth: &Tensor) -> Result<Tensor> {
        rgb.expect_shape(depth.shape(), "fusion")?;
        Ok(self.rgb.apply(rgb)?.add(&self.depth.apply(depth)?)?)
    }
}

impl Visit for Fusion {
    fn visit(&mut self, prefix: &str, v: &mut dyn ParamVisitor) -> Result<()> {
        self.rgb.visit(&join(prefix, "rgb"), v)?;
        self.depth.visit(&join(prefix, "depth"), v)
    }
}

/// ResNet-style encoder with NBt1D blocks: a 7×7 stride-2 stem, 3×3
/// stride-2 max pooling, then four stages at 1/4, 1/8, 1/16 and 1/32.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub stem: ConvUnit,
    pub stages: Vec<Vec<Nbt1dWeights>>,
}

impl Encoder {
    pub fn random<R: Rng>(rng: &mut R, in_channels: usize, channels: &[usize; 5], blocks: &[usize; 4], dropout: f32) -> Self {
        let stem = ConvUnit::random(rng, in_channels, channels[0], 7, 2, true, true);
        let stages = (0..4)
            .map(|s| {
                (0..blocks[s])
                    .map(|b| {
                        let cin = if b == 0 { channels[s] } else { channels[s + 1] };
                        let down = b == 0 && s > 0;
                        Nbt1dWeights::random(rng, cin, channels[s + 1], down, true, dropout)
                    })
                    .collect()
            })
            .collect();
        Self { stem, stages }
    }

    pub fn stem(&self, x: &Tensor) -> Result<Tensor> {
        self.stem.forward(x)
    }

    pub fn stage(&self, s: usize, x: &Tensor) -> Result<Tensor> {
        let mut y = if s == 0 { max_pool(x)? } else { x.clone() };
        for b in &self.stages[s] {
            y = nbt1d_block(&y, b)?;
        }
        Ok(y)
    }
}

fn max_pool(x: &Tensor) -> Result<Tensor> {
    Ok(pool2d(x, PoolKind::Max, (3, 3), (2, 2), (1, 1))?)
}

impl Visit for Encoder {
    fn visit(&mut self, prefix: &str, v: &mut dyn ParamVisitor) -> Result<()> {
        self.stem.visit(&join(prefix, "stem"), v)?;
        for (s, stage) in self.stages.iter_mut().enumerate() {
            for (b, block) in stage.iter_mut().enumerate() {
                block.visit(&join(prefix, &format!("stage{}.block{b}", s + 1)), v)?;
            }
        }
        Ok(())
    }
}

/// Pyramid pooling context module. Each branch pools to `p×p`, projects
/// with a 1×1 conv and is resized back; branches and input are concatenated
/// and fused by a 1×1 conv.
#[derive(Debug, Clone)]
pub struct ContextModule {
    pub branches: Vec<(usize, ConvUnit)>,
    pub fuse: ConvUnit,
}

impl ContextModule {
    pub fn random<R: Rng>(rng: &mut R, cin: usize, branch: usize, cout: usize, pool_sizes: &[usize]) -> Self {
        let branches = pool_sizes
            .iter()
            .map(|&p| (p, ConvUnit::random(rng, cin, branch, 1, 1, true, true)))
            .collect();
        let fuse = ConvUnit::random(rng, cin + branch * pool_sizes.len(), cout, 1, 1, true, true);
        Self { branches, fuse }
    }

    /// Returns the fused features and the global branch vector.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        let (_, _, h, w) = x.nchw("context module")?;
        let mut parts = vec![x.clone()];
        let mut global = None;
        for (p, proj) in &self.branches {
            let pooled = proj.forward(&adaptive_avg_pool(x, (*p, *p))?)?;
            if *p == 1 {
                global = Some(pooled.clone());
            }
            parts.push(bilinear_resize(&pooled, h, w)?);
        }
        let refs: Vec<&Tensor> = parts.iter().collect();
        let fused = self.fuse.forward(&Tensor::concat_channels(&refs)?)?;
        let global = global.ok_or_else(|| crate::Error::Graph("context module lacks a global branch".into()))?;
        Ok((fused, global))
    }
}

impl Visit for ContextModule {
    fn visit(&mut self, prefix: &str, v: &mut dyn ParamVisitor) -> Result<()> {
        for (p, unit) in &mut self.branches {
            unit.visit(&join(prefix, &format!("pool{p}")), v)?;
        }
        self.fuse.visit(&join(prefix, "fuse"), v)
    }
}

/// 3×3 conv, NBt1D blocks, learned ×2 upsampling, plus a projected
/// encoder skip connection.
#[derive(Debug, Clone)]
pub struct DecoderModule {
    pub conv: ConvUnit,
    pub blocks: Vec<Nbt1dWeights>,
    pub up: UpsampleWeights,
    pub skip: ConvUnit,
}

impl DecoderModule {
    pub fn forward(&self, x: &Tensor, skip: &Tensor) -> Result<Tensor> {
        let mut y = self.conv.forward(x)?;
        for b in &self.blocks {
            y = nbt1d_block(&y, b)?;
        }
        let y = learned_upsample(&y, &self.up)?;
        Ok(y.add(&self.skip.forward(skip)?)?)
    }
}

impl Visit for DecoderModule {
    fn visit(&mut self, prefix: &str, v: &mut dyn ParamVisitor) -> Result<()> {
        self.conv.visit(&join(prefix, "conv"), v)?;
        for (b, block) in self.blocks.iter_mut().enumerate() {
            block.visit(&join(prefix, &format!("block{b}")), v)?;
        }
        self.up.visit(&join(prefix, "upsample"), v)?;
        self.skip.visit(&join(prefix, "skip"), v)
    }
}

#[derive(Debug, Clone)]
pub struct Decoder {
    pub modules: Vec<DecoderModule>,
}

impl Decoder {
    /// `skip_channels` lists the encoder channels at 1/16, 1/8 and 1/4.
    pub fn random<R: Rng>(
        rng: &mut R,
        cin: usize,
        channels: &[usize; 3],
        skip_channels: [usize; 3],
        blocks: usize,
        dropout: f32,
    ) -> Self {
        let mut prev = cin;
        let modules = (0..3)
            .map(|k| {
                let c = channels[k];
                let m = DecoderModule {
                    conv: ConvUnit::random(rng, prev, c, 3, 1, true, true),
                    blocks: (0..blocks).map(|_| Nbt1dWeights::random(rng, c, c, false, true, dropout)).collect(),
                    up: UpsampleWeights::bilinear(c),
                    skip: ConvUnit::random(rng, skip_channels[k], c, 1, 1, true, true),
                };
                prev = c;
                m
            })
            .collect();
        Self { modules }
    }

    /// Returns the 1/4-resolution features and the outputs of the first
    /// two modules (1/16 and 1/8).
    pub fn forward(&self, x: &Tensor, skips: [&Tensor; 3]) -> Result<(Tensor, Vec<Tensor>)> {
        let mut y = x.clone();
        let mut mids = Vec::new();
        for (k, m) in self.modules.iter().enumerate() {
            y = m.forward(&y, skips[k])?;
            if k < 2 {
                mids.push(y.clone());
            }
        }
        Ok((y, mids))
    }
}

impl Visit for Decoder {
    fn visit(&mut self, prefix: &str, v: &mut dyn ParamVisitor) -> Result<()> {
        for (k, m) in self.modules.iter_mut().enumerate() {
            m.visit(&join(prefix, &format!("module{}", k + 1)), v)?;
        }
        Ok(())
    }
}
