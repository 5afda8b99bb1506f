use std::collections::BTreeMap;

use anyhow::Context as _;
use mtscene_core::codec::InstanceRecord;
use mtscene_core::dataset::Dataset;
use mtscene_core::metrics::{EvalImage, Evaluator, MetricReport};
use mtscene_core::orientation::Angle;
use mtscene_core::panoptic::PanopticMap;
use mtscene_tensor::Tensor;
use rayon::prelude::*;

use super::{Command, Context};
use crate::config::require;
use crate::error::CliError;
use crate::layout::{self, PredDir, SceneFile};

pub struct Eval;

struct Loaded {
    pred: PanopticMap,
    gt: PanopticMap,
    gt_orientations: BTreeMap<u32, Angle>,
    pred_orientations: BTreeMap<u32, Angle>,
    field: Option<Tensor>,
    pred_scene: Option<u32>,
    gt_scene: u32,
}

pub fn print_headline(r: &MetricReport) {
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    println!(
        "images {}  mIoU {:.4}  PQ {}  RQ {}  SQ {}  MAAE(gt) {}  MAAE(matched) {}  bAcc {}",
        r.images,
        r.miou,
        fmt(r.pq),
        fmt(r.rq),
        fmt(r.sq),
        fmt(r.maae_gt),
        fmt(r.maae_matched),
        fmt(r.bacc)
    );
}

impl Command for Eval {
    fn name(&self) -> &'static str {
        "eval"
    }

    fn about(&self) -> &'static str {
        "Score panoptic predictions against a ground-truth split"
    }

    fn run(&self, ctx: &Context) -> Result<(), CliError> {
        let input = PredDir::new(require(&ctx.cfg.input, "input", self.name())?);
        let gt = Dataset::open(require(&ctx.cfg.gt, "gt", self.name())?)?;
        let loaded = gt
            .manifest
            .samples
            .par_iter()
            .map(|id| -> anyhow::Result<Loaded> {
                let sample = gt.load(id, &ctx.spectrum).with_context(|| format!("loading ground truth {id}"))?;
                let pred = PanopticMap::load_png(&input.path(id, layout::PANOPTIC_PNG))
                    .with_context(|| format!("no panoptic prediction for {id}; run decode and merge first"))?;
                let records: Vec<InstanceRecord> = layout::read_json(&input.path(id, layout::PANOPTIC_JSON))?;
                let scene_path = input.path(id, layout::SCENE);
                let pred_scene = if scene_path.exists() {
                    Some(layout::read_json::<SceneFile>(&scene_path)?.scene)
                } else {
                    None
                };
                Ok(Loaded {
                    pred,
                    gt: PanopticMap::new(sample.semantic, sample.instance)?,
                    gt_orientations: sample.orientations,
                    pred_orientations: records
                        .iter()
                        .filter_map(|r| r.orientation_deg.map(|d| (r.id, Angle::from_degrees(d))))
                        .collect(),
                    field: input.read_optional_tensor(id, layout::ORIENTATION)?,
                    pred_scene,
                    gt_scene: sample.scene,
                })
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        let images: Vec<EvalImage> = loaded
            .iter()
            .map(|l| EvalImage {
                pred: &l.pred,
                gt: &l.gt,
                gt_orientations: &l.gt_orientations,
                pred_orientations: &l.pred_orientations,
                orientation_field: l.field.as_ref(),
                pred_scene: l.pred_scene,
                gt_scene: Some(l.gt_scene),
            })
            .collect();
        let mut evaluator = Evaluator::new(ctx.spectrum.clone());
        evaluator.add_all(&images)?;
        let report = evaluator.report()?;
        match &ctx.cfg.output {
            Some(path) => {
                layout::write_json(path, &report)?;
                print_headline(&report);
            }
            None => println!("{}", serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?),
        }
        Ok(())
    }
}
