use std::path::Path;

use anyhow::Context as _;
use image::{Rgb, RgbImage};
use mtscene_core::metrics::{ClassReport, MetricReport};
use serde::Serialize;

use super::{Command, Context};
use crate::config::require;
use crate::error::CliError;
use crate::layout;

pub struct Report;

const BAR: u32 = 12;
const GAP: u32 = 4;
const HEIGHT: u32 = 200;
const MARGIN: u32 = 10;

/// One bar per class, scaled to `[0, 1]`. Stuff classes are blue, thing
/// classes orange, classes without a value a grey stub.
pub fn bar_chart(classes: &[ClassReport], value: impl Fn(&ClassReport) -> Option<f64>) -> RgbImage {
    let n = classes.len().max(1) as u32;
    let width = 2 * MARGIN + n * (BAR + GAP) - GAP;
    let mut img = RgbImage::from_pixel(width, HEIGHT + 2 * MARGIN, Rgb([255, 255, 255]));
    for tick in [0.25, 0.5, 0.75, 1.0] {
        let y = MARGIN + HEIGHT - (tick * HEIGHT as f64).round() as u32;
        for x in MARGIN..width - MARGIN {
            img.put_pixel(x, y, Rgb([225, 225, 225]));
        }
    }
    for (k, class) in classes.iter().enumerate() {
        let x0 = MARGIN + k as u32 * (BAR + GAP);
        let (h, color) = match value(class) {
            Some(v) => {
                let color = if class.stuff { Rgb([70, 110, 180]) } else { Rgb([230, 140, 50]) };
                ((v.clamp(0.0, 1.0) * HEIGHT as f64).round() as u32, color)
            }
            None => (2, Rgb([170, 170, 170])),
        };
        for y in MARGIN + HEIGHT - h..MARGIN + HEIGHT {
            for x in x0..x0 + BAR {
                img.put_pixel(x, y, color);
            }
        }
    }
    for x in MARGIN..width - MARGIN {
        img.put_pixel(x, MARGIN + HEIGHT, Rgb([0, 0, 0]));
    }
    img
}

#[derive(Serialize)]
struct Summary<'a> {
    images: usize,
    miou: f64,
    pq: Option<f64>,
    rq: Option<f64>,
    sq: Option<f64>,
    pq_stuff: Option<f64>,
    pq_things: Option<f64>,
    maae_gt: Option<f64>,
    maae_matched: Option<f64>,
    bacc: Option<f64>,
    best_iou: Option<&'a str>,
    worst_iou: Option<&'a str>,
    charts: [&'static str; 2],
}

fn save(img: &RgbImage, path: &Path) -> anyhow::Result<()> {
    img.save(path).with_context(|| format!("writing {}", path.display()))
}

impl Command for Report {
    fn name(&self) -> &'static str {
        "report"
    }

    fn about(&self) -> &'static str {
        "Render per-class bar charts and a JSON summary from eval output"
    }

    fn run(&self, ctx: &Context) -> Result<(), CliError> {
        let input = require(&ctx.cfg.input, "input", self.name())?;
        let out = require(&ctx.cfg.output, "output", self.name())?;
        let r: MetricReport = layout::read_json(input)?;
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let classes: Vec<ClassReport> = r.per_class.iter().filter(|c| !c.excluded).cloned().collect();
        save(&bar_chart(&classes, |c| c.iou), &out.join("iou.png"))?;
        save(&bar_chart(&classes, |c| c.pq), &out.join("pq.png"))?;
        let ranked = |best: bool| {
            classes
                .iter()
                .filter_map(|c| c.iou.map(|v| (v, c.name.as_str())))
                .max_by(|a, b| if best { a.0.total_cmp(&b.0) } else { b.0.total_cmp(&a.0) })
                .map(|(_, name)| name)
        };
        let summary = Summary {
            images: r.images,
            miou: r.miou,
            pq: r.pq,
            rq: r.rq,
            sq: r.sq,
            pq_stuff: r.pq_stuff,
            pq_things: r.pq_things,
            maae_gt: r.maae_gt,
            maae_matched: r.maae_matched,
            bacc: r.bacc,
            best_iou: ranked(true),
            worst_iou: ranked(false),
            charts: ["iou.png", "pq.png"],
        };
        layout::write_json(&out.join("summary.json"), &summary)?;
        super::eval::print_headline(&r);
        Ok(())
    }
}
