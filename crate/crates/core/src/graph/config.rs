use serde::{Deserialize, Serialize};

use super::upsample::upsampler_names;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Modality {
    /// RGB and depth encoders with depth fused into the RGB branch.
    RgbD,
    /// RGB encoder only; depth is ignored.
    Rgb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    pub height: usize,
    pub width: usize,
    pub semantic_classes: usize,
    pub scene_classes: usize,
    /// Stem followed by the four encoder stages (1/4 … 1/32).
    pub encoder_channels: [usize; 5],
    pub encoder_blocks: [usize; 4],
    /// Output channels of the three decoder modules.
    pub decoder_channels: [usize; 3],
    pub decoder_blocks: usize,
    /// Adaptive pooling output sizes of the context branches; 1 is the
    /// global branch the scene head reads.
    pub context_pool_sizes: Vec<usize>,
    pub context_channels: usize,
    pub se_reduction: usize,
    pub modality: Modality,
    /// Strategy for the two final ×2 upsamplings of every head.
    pub head_upsampling: String,
    pub dropout_rate: f32,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            height: 480,
            width: 640,
            semantic_classes: 40,
            scene_classes: 11,
            encoder_channels: [64, 64, 128, 256, 512],
            encoder_blocks: [3, 4, 6, 3],
            decoder_channels: [512, 256, 128],
            decoder_blocks: 3,
            context_pool_sizes: vec![1, 2],
            context_channels: 128,
            se_reduction: 16,
            modality: Modality::RgbD,
            head_upsampling: "learned".into(),
            dropout_rate: 0.1,
        }
    }
}

impl GraphConfig {
    pub fn with_extents(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            ..Self::default()
        }
    }

    /// A narrow variant for fast tests; same topology, fewer channels.
    pub fn tiny(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            encoder_channels: [8, 8, 12, 16, 24],
            encoder_blocks: [1, 1, 1, 1],
            decoder_channels: [24, 16, 8],
            decoder_blocks: 1,
            context_channels: 8,
            se_reduction: 4,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("height", self.height), ("width", self.width)] {
            if v == 0 || v % 32 != 0 {
                return Err(Error::config(field, format!("must be a positive multiple of 32, got {v}")));
            }
        }
        if self.semantic_classes < 2 {
            return Err(Error::config("semantic_classes", format!("must be >= 2, got {}", self.semantic_classes)));
        }
        if self.scene_classes < 2 {
            return Err(Error::config("scene_classes", format!("must be >= 2, got {}", self.scene_classes)));
        }
        let channels = self.encoder_channels.iter().chain(&self.decoder_channels);
        if channels.chain([&self.context_channels]).any(|&c| c == 0) {
            return Err(Error::config("channels", "every channel count must be >= 1"));
        }
        if self.encoder_blocks.contains(&0) {
            return Err(Error::config("encoder_blocks", "every stage needs at least one block"));
        }
        if self.se_reduction == 0 {
            return Err(Error::config("se_reduction", "must be >= 1"));
        }
        let coarsest = (self.height / 32).min(self.width / 32);
        if !self.context_pool_sizes.contains(&1) {
            return Err(Error::config("context_pool_sizes", "must contain the global branch (1)"));
        }
        if let Some(&p) = self.context_pool_sizes.iter().find(|&&p| p == 0 || p > coarsest) {
            return Err(Error::config(
                "context_pool_sizes",
                format!("size {p} must lie in 1..={coarsest} for a {}x{} input", self.height, self.width),
            ));
        }
        if !upsampler_names().contains(&self.head_upsampling.as_str()) {
            return Err(Error::config(
                "head_upsampling",
                format!("unknown '{}', expected one of {:?}", self.head_upsampling, upsampler_names()),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config("dropout_rate", format!("must lie in [0, 1), got {}", self.dropout_rate)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extents_must_be_multiples_of_32() {
        assert!(GraphConfig::with_extents(96, 128).validate().is_ok());
        assert!(GraphConfig::with_extents(100, 128).validate().is_err());
        assert!(GraphConfig::with_extents(0, 128).validate().is_err());
    }

    #[test]
    fn class_counts_and_strategies() {
        let mut c = GraphConfig::tiny(64, 64);
        c.semantic_classes = 1;
        assert!(c.validate().is_err());
        let mut c = GraphConfig::tiny(64, 64);
        c.head_upsampling = "nearest".into();
        assert!(c.validate().is_err());
        let mut c = GraphConfig::tiny(32, 64);
        c.context_pool_sizes = vec![1, 2];
        assert!(c.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = GraphConfig::tiny(64, 96);
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<GraphConfig>(&text).unwrap(), c);
    }
}
