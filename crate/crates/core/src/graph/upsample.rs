//! Interchangeable ×2 upsampling strategies for the task heads.

use std::fmt::Debug;

use mtscene_tensor::{bilinear_resize, learned_upsample, Tensor, UpsampleWeights};

use super::params::{ParamVisitor, Visit};
use crate::error::{Error, Result};

pub trait Upsampler: Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// Doubles both spatial extents.
    fn upsample(&self, x: &Tensor) -> Result<Tensor>;

    fn visit(&mut self, prefix: &str, v: &mut dyn ParamVisitor) -> Result<()>;
}

/// Depthwise transposed convolution, initialized to bilinear weights.
#[derive(Debug, Clone)]
pub struct Learned(pub UpsampleWeights);

impl Upsampler for Learned {
    fn name(&self) -> &'static str {
        "learned"
    }

    fn upsample(&self, x: &Tensor) -> Result<Tensor> {
        Ok(learned_upsample(x, &self.0)?)
    }

    fn visit(&mut self, prefix: &str, v: &mut dyn ParamVisitor) -> Result<()> {
        self.0.visit(prefix, v)
    }
}

/// Fixed bilinear interpolation without parameters.
#[derive(Debug, Clone)]
pub struct Bilinear;

impl Upsampler for Bilinear {
    fn name(&self) -> &'static str {
        "bilinear"
    }

    fn upsample(&self, x: &Tensor) -> Result<Tensor> {
        let (_, _, h, w) = x.nchw("bilinear upsample")?;
        Ok(bilinear_resize(x, 2 * h, 2 * w)?)
    }

    fn visit(&mut self, _: &str, _: &mut dyn ParamVisitor) -> Result<()> {
        Ok(())
    }
}

type Factory = fn(usize) -> Box<dyn Upsampler>;

const REGISTRY: &[(&str, Factory)] = &[
    ("learned", |c| Box::new(Learned(UpsampleWeights::bilinear(c)))),
    ("bilinear", |_| Box::new(Bilinear)),
];

pub fn upsampler_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|(n, _)| *n).collect()
}

/// Builds the named strategy for `channels` feature maps.
pub fn upsampler(name: &str, channels: usize) -> Result<Box<dyn Upsampler>> {
    REGISTRY
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, make)| make(channels))
        .ok_or_else(|| Error::config("head_upsampling", format!("unknown '{name}', expected one of {:?}", upsampler_names())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree_at_initialization() {
        let x = Tensor::from_fn(&[3, 5, 7], |i| ((i * 37) % 11) as f32 * 0.3 - 1.0).unwrap();
        let a = upsampler("learned", 3).unwrap().upsample(&x).unwrap();
        let b = upsampler("bilinear", 3).unwrap().upsample(&x).unwrap();
        assert_eq!(a.shape(), &[3, 10, 14]);
        assert!(a.max_abs_diff(&b) < 1e-5);
        assert!(upsampler("nearest", 3).is_err());
    }
}
