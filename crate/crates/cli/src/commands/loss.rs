use anyhow::Context as _;
use mtscene_core::codec::encode_targets;
use mtscene_core::dataset::Dataset;
use mtscene_core::losses::{
    center_loss, median_frequency_weights, offset_loss, orientation_loss, scene_loss, semantic_loss, total_loss,
    LossParts, TaskWeights,
};
use mtscene_core::orientation::orientation_targets;
use rayon::prelude::*;
use serde::Serialize;

use super::{Command, Context};
use crate::config::{require, ClassWeighting};
use crate::error::CliError;
use crate::layout::{self, PredDir, SceneFile};

pub struct LossEval;

#[derive(Debug, Serialize)]
struct SampleLoss {
    id: String,
    parts: LossParts,
    total: f64,
}

#[derive(Debug, Serialize)]
struct LossReport {
    task_weights: TaskWeights,
    kappa: f64,
    epsilon: f64,
    class_weighting: ClassWeighting,
    mean: LossParts,
    mean_total: f64,
    samples: Vec<SampleLoss>,
}

impl Command for LossEval {
    fn name(&self) -> &'static str {
        "loss-eval"
    }

    fn about(&self) -> &'static str {
        "Compute the training losses of network outputs against ground truth"
    }

    fn run(&self, ctx: &Context) -> Result<(), CliError> {
        let cfg = &ctx.cfg;
        let input = PredDir::new(require(&cfg.input, "input", self.name())?);
        let gt = Dataset::open(require(&cfg.gt, "gt", self.name())?)?;
        let samples = gt
            .manifest
            .samples
            .par_iter()
            .map(|id| gt.load(id, &ctx.spectrum).with_context(|| format!("loading ground truth {id}")))
            .collect::<anyhow::Result<Vec<_>>>()?;
        let class_weights = match cfg.class_weighting {
            ClassWeighting::Uniform => vec![1.0; ctx.spectrum.num_classes()],
            ClassWeighting::MedianFrequency => {
                let maps: Vec<_> = samples.iter().map(|s| s.semantic.clone()).collect();
                median_frequency_weights(&maps, &ctx.spectrum)?
            }
        };
        let per_sample = samples
            .par_iter()
            .map(|s| -> anyhow::Result<SampleLoss> {
                let id = &s.id;
                let logits = input
                    .read_tensor(id, layout::SEMANTIC_LOGITS)
                    .with_context(|| format!("no network outputs for {id}; run forward first"))?;
                let mut sides = Vec::new();
                while input.path(id, &layout::side_output(sides.len())).exists() {
                    sides.push(input.read_tensor(id, &layout::side_output(sides.len()))?);
                }
                let all: Vec<_> = std::iter::once(&logits).chain(&sides).collect();
                let targets = encode_targets(&s.instance, &cfg.codec)?;
                let (field, orient_mask) = orientation_targets(&s.semantic, &s.instance, &s.orientations, &ctx.spectrum)?;
                let scene: SceneFile = layout::read_json(&input.path(id, layout::SCENE))?;
                let scene_logits = scene.logits.with_context(|| format!("{id}: scene.json has no logits"))?;
                let parts = LossParts {
                    semantic: semantic_loss(&all, &s.semantic, &class_weights, &ctx.spectrum)?,
                    scene: scene_loss(&scene_logits, s.scene as usize, cfg.epsilon)?,
                    center: center_loss(&input.read_tensor(id, layout::CENTER)?, &targets.center, &targets.instance_mask)?
                        .value,
                    offset: offset_loss(&input.read_tensor(id, layout::OFFSET)?, &targets.offset, &targets.instance_mask)?
                        .value,
                    orientation: orientation_loss(
                        &input.read_tensor(id, layout::ORIENTATION)?,
                        &field,
                        &orient_mask,
                        cfg.kappa,
                    )?
                    .value,
                };
                Ok(SampleLoss {
                    id: id.clone(),
                    total: total_loss(&parts, &cfg.task_weights)?,
                    parts,
                })
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        let n = per_sample.len().max(1) as f64;
        let mut mean = LossParts::default();
        for s in &per_sample {
            mean.semantic += s.parts.semantic / n;
            mean.scene += s.parts.scene / n;
            mean.center += s.parts.center / n;
            mean.offset += s.parts.offset / n;
            mean.orientation += s.parts.orientation / n;
        }
        let report = LossReport {
            task_weights: cfg.task_weights,
            kappa: cfg.kappa,
            epsilon: cfg.epsilon,
            class_weighting: cfg.class_weighting,
            mean_total: total_loss(&mean, &cfg.task_weights)?,
            mean,
            samples: per_sample,
        };
        match &cfg.output {
            Some(path) => {
                layout::write_json(path, &report)?;
                println!("mean total loss {:.6} over {} samples", report.mean_total, report.samples.len());
            }
            None => println!("{}", serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?),
        }
        Ok(())
    }
}
