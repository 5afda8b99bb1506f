use anyhow::{anyhow, Context as _};
use mtscene_core::dataset::{write_label_png, Dataset};
use mtscene_core::graph::{load_weights, save_weights, Graph, GraphConfig};
use mtscene_core::spectrum::SceneSpectrum;
use rayon::prelude::*;

use super::{Command, Context};
use crate::config::{require, GraphPreset};
use crate::error::CliError;
use crate::layout::{self, PredDir, SceneFile};

pub struct Forward;

fn build_graph(ctx: &Context, extents: (usize, usize)) -> Result<Graph, CliError> {
    let cfg = &ctx.cfg;
    let graph = match &cfg.weights {
        Some(dir) => load_weights(dir).with_context(|| format!("loading weights from {}", dir.display()))?,
        None => {
            let (h, w) = extents;
            let mut gc = match cfg.graph {
                GraphPreset::Full => GraphConfig::with_extents(h, w),
                GraphPreset::Tiny => GraphConfig::tiny(h, w),
            };
            gc.semantic_classes = ctx.spectrum.num_classes();
            gc.scene_classes = SceneSpectrum::indoor().len();
            gc.validate().map_err(|e| CliError::Validation(format!("network for {h}x{w} inputs: {e}")))?;
            Graph::build(gc, cfg.seed)?
        }
    };
    let gc = &graph.config;
    if gc.semantic_classes != ctx.spectrum.num_classes() {
        return Err(CliError::Validation(format!(
            "weights predict {} semantic classes but spectrum '{}' has {}",
            gc.semantic_classes,
            ctx.spectrum.name,
            ctx.spectrum.num_classes()
        )));
    }
    if (gc.height, gc.width) != extents {
        return Err(CliError::Validation(format!(
            "weights expect {}x{} inputs, samples are {}x{}",
            gc.height, gc.width, extents.0, extents.1
        )));
    }
    Ok(graph)
}

impl Command for Forward {
    fn name(&self) -> &'static str {
        "forward"
    }

    fn about(&self) -> &'static str {
        "Run the multi-task network on every sample of a split"
    }

    fn run(&self, ctx: &Context) -> Result<(), CliError> {
        let input = require(&ctx.cfg.input, "input", self.name())?;
        let out = PredDir::new(require(&ctx.cfg.output, "output", self.name())?);
        let ds = Dataset::open(input)?;
        let Some(first) = ds.manifest.samples.first() else {
            return Err(CliError::Validation(format!("split {} has no samples", input.display())));
        };
        let extents = ds.load(first, &ctx.spectrum)?.extents();
        let mut graph = build_graph(ctx, extents)?;
        if let Some(dir) = &ctx.cfg.export_weights {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            save_weights(&mut graph, dir)?;
        }
        ds.manifest.samples.par_iter().try_for_each(|id| -> anyhow::Result<()> {
            let sample = ds.load(id, &ctx.spectrum).with_context(|| format!("loading sample {id}"))?;
            if sample.extents() != extents {
                return Err(anyhow!("sample {id} is {:?}, expected {:?} like the first sample", sample.extents(), extents));
            }
            let o = graph.forward(&sample.rgb, &sample.depth)?;
            out.write_tensor(id, layout::SEMANTIC_LOGITS, &o.semantic)?;
            for (k, side) in o.side_outputs.iter().enumerate() {
                out.write_tensor(id, &layout::side_output(k), side)?;
            }
            write_label_png(&out.file(id, layout::SEMANTIC)?, &o.semantic_labels(&ctx.spectrum)?, false)?;
            out.write_tensor(id, layout::CENTER, &o.center)?;
            out.write_tensor(id, layout::OFFSET, &o.offset)?;
            out.write_tensor(id, layout::ORIENTATION, &o.orientation)?;
            let scene = SceneFile {
                scene: o.scene_class(),
                logits: Some(o.scene.data().to_vec()),
            };
            layout::write_json(&out.file(id, layout::SCENE)?, &scene)
        })?;
        out.write_ids(&ds.manifest.split, &ds.manifest.samples)?;
        println!("ran {} samples through the network into {}", ds.manifest.samples.len(), out.root.display());
        Ok(())
    }
}
