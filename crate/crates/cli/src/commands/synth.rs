use anyhow::Context as _;
use mtscene_core::dataset::{synth_scene, Dataset, SynthOptions};
use rayon::prelude::*;

use super::{Command, Context};
use crate::config::require;
use crate::error::CliError;

pub struct Synth;

impl Command for Synth {
    fn name(&self) -> &'static str {
        "synth"
    }

    fn about(&self) -> &'static str {
        "Write seeded synthetic scenes as a dataset split"
    }

    fn run(&self, ctx: &Context) -> Result<(), CliError> {
        let out = require(&ctx.cfg.output, "output", self.name())?;
        let s = &ctx.cfg.synth;
        let opts = SynthOptions::new(s.height, s.width, s.instances);
        let seed = ctx.cfg.seed;
        let samples = (0..s.count)
            .into_par_iter()
            .map(|k| synth_scene(seed + k, &opts, &ctx.spectrum))
            .collect::<Result<Vec<_>, _>>()?;
        let mut ds = Dataset::create(out, "synth")?;
        for sample in &samples {
            ds.add(sample).with_context(|| format!("writing sample {}", sample.id))?;
        }
        ds.write_manifest()?;
        println!("wrote {} scenes to {}", samples.len(), out.display());
        Ok(())
    }
}
