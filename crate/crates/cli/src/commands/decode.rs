use mtscene_core::codec::{decode_centers, group_pixels, instances_to_label_map, InstanceRecord};
use mtscene_core::dataset::{read_label_png, write_label_png};
use mtscene_core::panoptic::foreground_mask;
use rayon::prelude::*;

use super::{Command, Context};
use crate::config::require;
use crate::error::CliError;
use crate::layout::{self, PredDir};

pub struct Decode;

impl Command for Decode {
    fn name(&self) -> &'static str {
        "decode"
    }

    fn about(&self) -> &'static str {
        "Find instance centers and group thing pixels into instances"
    }

    fn run(&self, ctx: &Context) -> Result<(), CliError> {
        let input = PredDir::new(require(&ctx.cfg.input, "input", self.name())?);
        let out = PredDir::new(ctx.cfg.output.as_deref().unwrap_or(&input.root));
        let ids = input.ids()?;
        let codec = &ctx.cfg.codec;
        let counts = ids
            .par_iter()
            .map(|id| -> anyhow::Result<usize> {
                let sem = read_label_png(&input.path(id, layout::SEMANTIC))?;
                let center = input.read_tensor(id, layout::CENTER)?;
                let offset = input.read_tensor(id, layout::OFFSET)?;
                let fg = foreground_mask(&sem, &ctx.spectrum)?;
                let peaks = decode_centers(&center, codec)?;
                let instances = group_pixels(&peaks, &offset, &fg, codec)?;
                let (h, w) = sem.extents();
                let map = instances_to_label_map(&instances, h, w)?;
                write_label_png(&out.file(id, layout::INSTANCES_PNG)?, &map, true)?;
                let records: Vec<InstanceRecord> = instances.iter().map(InstanceRecord::from).collect();
                layout::write_json(&out.file(id, layout::INSTANCES_JSON)?, &records)?;
                input.carry(&out, id, &[layout::SEMANTIC, layout::ORIENTATION, layout::SCENE])?;
                Ok(instances.len())
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        out.write_ids("decoded", &ids)?;
        println!("decoded {} instances in {} samples", counts.iter().sum::<usize>(), ids.len());
        Ok(())
    }
}
