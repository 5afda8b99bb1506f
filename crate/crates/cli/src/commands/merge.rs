use std::collections::BTreeMap;

use mtscene_core::codec::{label_map_to_instances, InstanceRecord};
use mtscene_core::dataset::read_label_png;
use mtscene_core::orientation::instance_orientation;
use mtscene_core::panoptic::merge;
use rayon::prelude::*;

use super::{Command, Context};
use crate::config::require;
use crate::error::CliError;
use crate::layout::{self, PredDir};

pub struct Merge;

impl Command for Merge {
    fn name(&self) -> &'static str {
        "merge"
    }

    fn about(&self) -> &'static str {
        "Fuse semantics and instances into panoptic maps with orientations"
    }

    fn run(&self, ctx: &Context) -> Result<(), CliError> {
        let input = PredDir::new(require(&ctx.cfg.input, "input", self.name())?);
        let out = PredDir::new(ctx.cfg.output.as_deref().unwrap_or(&input.root));
        let ids = input.ids()?;
        let spectrum = &ctx.spectrum;
        ids.par_iter().try_for_each(|id| -> anyhow::Result<()> {
            let sem = read_label_png(&input.path(id, layout::SEMANTIC))?;
            let map = read_label_png(&input.path(id, layout::INSTANCES_PNG))?;
            let records: Vec<InstanceRecord> = layout::read_json(&input.path(id, layout::INSTANCES_JSON))?;
            let by_id: BTreeMap<u32, &InstanceRecord> = records.iter().map(|r| (r.id, r)).collect();
            let mut instances = label_map_to_instances(&map);
            for inst in &mut instances {
                if let Some(r) = by_id.get(&inst.id) {
                    inst.center = (r.center[0], r.center[1]);
                    inst.score = r.score;
                }
            }
            let (pan, mut kept) = merge(&sem, &instances, spectrum)?;
            if let Some(field) = input.read_optional_tensor(id, layout::ORIENTATION)? {
                for inst in &mut kept {
                    if inst.semantic_class.is_some_and(|c| spectrum.is_orientation_relevant(c)) {
                        inst.orientation = instance_orientation(&field, &inst.pixels).ok();
                    }
                }
            }
            pan.save_png(&out.file(id, layout::PANOPTIC_PNG)?)?;
            let records: Vec<InstanceRecord> = kept.iter().map(InstanceRecord::from).collect();
            layout::write_json(&out.file(id, layout::PANOPTIC_JSON)?, &records)?;
            input.carry(&out, id, &[layout::ORIENTATION, layout::SCENE])
        })?;
        out.write_ids("merged", &ids)?;
        println!("merged {} samples", ids.len());
        Ok(())
    }
}
