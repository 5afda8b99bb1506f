use anyhow::Context as _;
use mtscene_core::codec::encode_targets;
use mtscene_core::dataset::{write_label_png, Dataset};
use mtscene_core::orientation::orientation_targets;
use rayon::prelude::*;

use super::{Command, Context};
use crate::config::require;
use crate::error::CliError;
use crate::layout::{self, PredDir, SceneFile};

pub struct EncodeGt;

impl Command for EncodeGt {
    fn name(&self) -> &'static str {
        "encode-gt"
    }

    fn about(&self) -> &'static str {
        "Encode ground truth into center, offset and orientation targets"
    }

    fn run(&self, ctx: &Context) -> Result<(), CliError> {
        let input = require(&ctx.cfg.input, "input", self.name())?;
        let out = PredDir::new(require(&ctx.cfg.output, "output", self.name())?);
        let ds = Dataset::open(input)?;
        ds.manifest.samples.par_iter().try_for_each(|id| -> anyhow::Result<()> {
            let sample = ds.load(id, &ctx.spectrum).with_context(|| format!("loading sample {id}"))?;
            let targets = encode_targets(&sample.instance, &ctx.cfg.codec)?;
            let (field, _) = orientation_targets(&sample.semantic, &sample.instance, &sample.orientations, &ctx.spectrum)?;
            write_label_png(&out.file(id, layout::SEMANTIC)?, &sample.semantic, false)?;
            out.write_tensor(id, layout::CENTER, &targets.center)?;
            out.write_tensor(id, layout::OFFSET, &targets.offset)?;
            out.write_tensor(id, layout::ORIENTATION, &field)?;
            layout::write_json(&out.file(id, layout::CENTERS)?, &targets.centers)?;
            layout::write_json(&out.file(id, layout::SCENE)?, &SceneFile { scene: sample.scene, logits: None })
        })?;
        out.write_ids(&ds.manifest.split, &ds.manifest.samples)?;
        println!("encoded {} samples into {}", ds.manifest.samples.len(), out.root.display());
        Ok(())
    }
}
