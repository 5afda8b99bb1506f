//! The multi-task RGB-D forward graph.
//!
//! Two encoders (RGB and depth) with squeeze-excitation fusion of depth into
//! the RGB branch after the stem and after every stage, a pyramid context
//! module, a semantic decoder and an instance decoder (three modules each,
//! with skip connections at 1/16, 1/8 and 1/4) and task heads at 1/4 that
//! are upsampled twice to the input resolution. A fully-connected scene
//! head reads the global branch of the context module.

mod archive;
mod config;
mod layers;
mod params;
mod upsample;

use mtscene_tensor::{conv2d, tanh, ConvParams, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use archive::{load_weights, save_weights, WeightManifest};
pub use config::{GraphConfig, Modality};
pub use layers::{ContextModule, ConvUnit, Decoder, DecoderModule, Dense, Encoder, Fusion, SeGate};
pub use params::{ParamVisitor, Visit};
pub use upsample::{upsampler, upsampler_names, Bilinear, Learned, Upsampler};

use crate::error::{Error, Result};
use crate::labels::LabelMap;
use crate::spectrum::ClassSpectrum;
use params::join;

/// A 3×3 prediction conv at 1/4 resolution followed by two ×2 upsamplings.
#[derive(Debug)]
pub struct Head {
    pub conv: ConvParams,
    pub upsampling: [Box<dyn Upsampler>; 2],
}

impl Head {
    fn random<R: rand::Rng>(rng: &mut R, cin: usize, cout: usize, strategy: &str) -> Result<Self> {
        let unit = ConvUnit::random(rng, cin, cout, 3, 1, false, false);
        Ok(Self {
            conv: unit.conv,
            upsampling: [upsampler(strategy, cout)?, upsampler(strategy, cout)?],
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = conv2d(x, &self.conv)?;
        let y = self.upsampling[0].upsample(&y)?;
        self.upsampling[1].upsample(&y)
    }
}

impl Visit for Head {
    fn visit(&mut self, prefix: &str, v: &mut dyn ParamVisitor) -> Result<()> {
        self.conv.visit(&join(prefix, "conv"), v)?;
        for (k, u) in self.upsampling.iter_mut().enumerate() {
            u.visit(&join(prefix, &format!("upsample{}", k + 1)), v)?;
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct Graph {
    pub config: GraphConfig,
    pub rgb_encoder: Encoder,
    pub depth_encoder: Option<Encoder>,
    /// After the stem and after each of the four stages.
    pub fusions: Vec<Fusion>,
    pub context: ContextModule,
    pub scene_head: Dense,
    pub semantic_decoder: Decoder,
    pub instance_decoder: Decoder,
    /// 1×1 convs producing semantic logits at 1/16 and 1/8.
    pub side_heads: Vec<ConvUnit>,
    pub semantic_head: Head,
    pub center_head: Head,
    pub offset_head: Head,
    pub orientation_head: Head,
}

/// Outputs of one forward pass, all channels-first without a batch axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutputs {
    pub semantic: Tensor,
    pub side_outputs: Vec<Tensor>,
    pub center: Tensor,
    pub offset: Tensor,
    pub orientation: Tensor,
    pub scene: Tensor,
}

impl Graph {
    /// Builds a graph with seeded weights: He initialization for convs and
    /// fusion layers, zero-initialized final norms in every NBt1D block and
    /// bilinear weights in every learned upsampling.
    pub fn build(config: GraphConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = &config;
        let ch = c.encoder_channels;
        let rgb_encoder = Encoder::random(&mut rng, 3, &ch, &c.encoder_blocks, c.dropout_rate);
        let (depth_encoder, fusions) = match c.modality {
            Modality::RgbD => (
                Some(Encoder::random(&mut rng, 1, &ch, &c.encoder_blocks, c.dropout_rate)),
                ch.iter().map(|&k| Fusion::random(&mut rng, k, c.se_reduction)).collect(),
            ),
            Modality::Rgb => (None, Vec::new()),
        };
        let context = ContextModule::random(&mut rng, ch[4], c.context_channels, c.decoder_channels[0], &c.context_pool_sizes);
        let scene_head = Dense::uniform(&mut rng, c.context_channels, c.scene_classes);
        let skips = [ch[3], ch[2], ch[1]];
        let dec_in = c.decoder_channels[0];
        let semantic_decoder = Decoder::random(&mut rng, dec_in, &c.decoder_channels, skips, c.decoder_blocks, c.dropout_rate);
        let instance_decoder = Decoder::random(&mut rng, dec_in, &c.decoder_channels, skips, c.decoder_blocks, c.dropout_rate);
        let side_heads = (0..2)
            .map(|k| ConvUnit::random(&mut rng, c.decoder_channels[k], c.semantic_classes, 1, 1, false, false))
            .collect();
        let top = c.decoder_channels[2];
        let up = c.head_upsampling.as_str();
        Ok(Self {
            semantic_head: Head::random(&mut rng, top, c.semantic_classes, up)?,
            center_head: Head::random(&mut rng, top, 1, up)?,
            offset_head: Head::random(&mut rng, top, 2, up)?,
            orientation_head: Head::random(&mut rng, top, 2, up)?,
            config,
            rgb_encoder,
            depth_encoder,
            fusions,
            context,
            scene_head,
            semantic_decoder,
            instance_decoder,
            side_heads,
        })
    }

    pub fn visit_params(&mut self, v: &mut dyn ParamVisitor) -> Result<()> {
        self.rgb_encoder.visit("rgb_encoder", v)?;
        if let Some(d) = &mut self.depth_encoder {
            d.visit("depth_encoder", v)?;
        }
        for (k, f) in self.fusions.iter_mut().enumerate() {
            f.visit(&format!("fusion{k}"), v)?;
        }
        self.context.visit("context", v)?;
        self.scene_head.visit("scene_head", v)?;
        self.semantic_decoder.visit("semantic_decoder", v)?;
        self.instance_decoder.visit("instance_decoder", v)?;
        for (k, s) in self.side_heads.iter_mut().enumerate() {
            s.visit(&format!("side_head{}", k + 1), v)?;
        }
        self.semantic_head.visit("semantic_head", v)?;
        self.center_head.visit("center_head", v)?;
        self.offset_head.visit("offset_head", v)?;
        self.orientation_head.visit("orientation_head", v)
    }

    /// Total number of scalar parameters.
    pub fn num_params(&mut self) -> usize {
        struct Count(usize);
        impl ParamVisitor for Count {
            fn tensor(&mut self, _: &str, t: &mut Tensor) -> Result<()> {
                self.0 += t.len();
                Ok(())
            }
        }
        let mut c = Count(0);
        self.visit_params(&mut c).expect("counting cannot fail");
        c.0
    }

    fn fuse(&self, k: usize, rgb: Tensor, depth: &Option<Tensor>) -> Result<Tensor> {
        match depth {
            Some(d) => self.fusions[k].forward(&rgb, d),
            None => Ok(rgb),
        }
    }

    /// Runs the graph on a `3×H×W` image and a `1×H×W` depth map in meters
    /// (zeros mark invalid measurements). Depth is ignored in RGB-only mode.
    pub fn forward(&self, rgb: &Tensor, depth: &Tensor) -> Result<ForwardOutputs> {
        let (h, w) = (self.config.height, self.config.width);
        rgb.expect_shape(&[3, h, w], "forward rgb")?;
        depth.expect_shape(&[1, h, w], "forward depth")?;

        let mut d = match &self.depth_encoder {
            Some(enc) => Some(enc.stem(depth)?),
            None => None,
        };
        let mut r = self.fuse(0, self.rgb_encoder.stem(rgb)?, &d)?;
        let mut skips = Vec::new();
        for s in 0..4 {
            if let (Some(enc), Some(dt)) = (&self.depth_encoder, &d) {
                d = Some(enc.stage(s, dt)?);
            }
            r = self.fuse(s + 1, self.rgb_encoder.stage(s, &r)?, &d)?;
            if s < 3 {
                skips.push(r.clone());
            }
        }
        let (ctx, global) = self.context.forward(&r)?;
        let scene = self.scene_head.forward(&global)?;
        let skips = [&skips[2], &skips[1], &skips[0]];

        let (sem, mids) = self.semantic_decoder.forward(&ctx, skips)?;
        let side_outputs = self
            .side_heads
            .iter()
            .zip(&mids)
            .map(|(head, m)| head.forward(m))
            .collect::<Result<Vec<_>>>()?;
        let (ins, _) = self.instance_decoder.forward(&ctx, skips)?;

        let semantic = self.semantic_head.forward(&sem)?;
        let center = mtscene_tensor::sigmoid(&self.center_head.forward(&ins)?);
        let offset = tanh(&self.offset_head.forward(&ins)?);
        let orientation = normalize_biternions(self.orientation_head.forward(&ins)?);
        Ok(ForwardOutputs {
            semantic,
            side_outputs,
            center,
            offset,
            orientation,
            scene,
        })
    }
}

/// Scales every pixel's `(cos, sin)` pair to unit length; a zero vector
/// becomes `(1, 0)`.
pub fn normalize_biternions(mut field: Tensor) -> Tensor {
    let hw = field.len() / 2;
    let data = field.data_mut();
    for i in 0..hw {
        let (c, s) = (data[i] as f64, data[hw + i] as f64);
        let n = c.hypot(s);
        let (c, s) = if n > 0.0 && n.is_finite() { (c / n, s / n) } else { (1.0, 0.0) };
        data[i] = c as f32;
        data[hw + i] = s as f32;
    }
    field
}

fn argmax(values: impl Iterator<Item = f32>) -> usize {
    let mut best = (0, f32::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

impl ForwardOutputs {
    /// Per-pixel argmax class ids (ties to the lower channel).
    pub fn semantic_labels(&self, spectrum: &ClassSpectrum) -> Result<LabelMap> {
        let &[c, h, w] = self.semantic.shape() else {
            return Err(Error::Graph(format!("semantic logits must be CxHxW, got {:?}", self.semantic.shape())));
        };
        if c != spectrum.num_classes() {
            return Err(Error::Graph(format!(
                "{c} semantic channels but spectrum '{}' has {} classes",
                spectrum.name,
                spectrum.num_classes()
            )));
        }
        let hw = h * w;
        let data = self.semantic.data();
        let labels = (0..hw)
            .map(|i| spectrum.id_of_channel(argmax((0..c).map(|k| data[k * hw + i]))))
            .collect();
        LabelMap::new(h, w, labels)
    }

    /// Most likely scene class; channel 0 (void) is never predicted.
    pub fn scene_class(&self) -> u32 {
        argmax(self.scene.data().iter().skip(1).copied()) as u32 + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(h: usize, w: usize, seed: u32) -> (Tensor, Tensor) {
        let rgb = Tensor::from_fn(&[3, h, w], |i| (((i as u32).wrapping_mul(2654435761) ^ seed) % 1000) as f32 / 1000.0).unwrap();
        let depth = Tensor::from_fn(&[1, h, w], |i| (((i as u32).wrapping_mul(40503) ^ seed) % 5000) as f32 / 1000.0).unwrap();
        (rgb, depth)
    }

    #[test]
    fn tiny_graph_shapes_and_bounds() {
        let g = Graph::build(GraphConfig::tiny(64, 96), 1).unwrap();
        let (rgb, depth) = inputs(64, 96, 3);
        let out = g.forward(&rgb, &depth).unwrap();
        assert_eq!(out.semantic.shape(), &[40, 64, 96]);
        assert_eq!(out.side_outputs[0].shape(), &[40, 4, 6]);
        assert_eq!(out.side_outputs[1].shape(), &[40, 8, 12]);
        assert_eq!(out.center.shape(), &[1, 64, 96]);
        assert_eq!(out.offset.shape(), &[2, 64, 96]);
        assert_eq!(out.orientation.shape(), &[2, 64, 96]);
        assert_eq!(out.scene.shape(), &[11]);
        assert!(out.center.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(out.offset.data().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn seeded_build_is_deterministic() {
        let a = Graph::build(GraphConfig::tiny(64, 64), 9).unwrap();
        let b = Graph::build(GraphConfig::tiny(64, 64), 9).unwrap();
        let (rgb, depth) = inputs(64, 64, 1);
        assert_eq!(a.forward(&rgb, &depth).unwrap(), b.forward(&rgb, &depth).unwrap());
    }

    #[test]
    fn rgb_only_mode_ignores_depth() {
        let mut cfg = GraphConfig::tiny(64, 96);
        cfg.modality = Modality::Rgb;
        let mut g = Graph::build(cfg, 2).unwrap();
        assert!(g.depth_encoder.is_none() && g.fusions.is_empty());
        let (rgb, depth) = inputs(64, 96, 5);
        let a = g.forward(&rgb, &depth).unwrap();
        let b = g.forward(&rgb, &depth.map(|v| v * 3.0)).unwrap();
        assert_eq!(a, b);
        let mut full = Graph::build(GraphConfig::tiny(64, 96), 2).unwrap();
        assert!(full.num_params() > g.num_params());
    }

    #[test]
    fn wrong_input_extents() {
        let g = Graph::build(GraphConfig::tiny(64, 64), 0).unwrap();
        let (rgb, depth) = inputs(64, 96, 0);
        assert!(g.forward(&rgb, &depth).is_err());
    }

    #[test]
    fn zero_vectors_normalize_to_reference_direction() {
        let f = normalize_biternions(Tensor::new(vec![2, 1, 2], vec![0.0, 3.0, 0.0, 4.0]).unwrap());
        assert_eq!(f.data(), &[1.0, 0.6, 0.0, 0.8]);
    }
}
