use mtscene_core::spectrum::ClassSpectrum;

use crate::config::RunConfig;
use crate::error::CliError;

mod decode;
mod encode;
mod eval;
mod forward;
mod loss;
mod merge;
mod report;
mod synth;

/// A validated config with its resolved spectrum.
pub struct Context {
    pub cfg: RunConfig,
    pub spectrum: ClassSpectrum,
}

pub trait Command: Send + Sync {
    fn name(&self) -> &'static str;
    fn about(&self) -> &'static str;
    fn run(&self, ctx: &Context) -> Result<(), CliError>;
}

/// Subcommands in pipeline order.
pub fn registry() -> Vec<Box<dyn Command>> {
    vec![
        Box::new(synth::Synth),
        Box::new(encode::EncodeGt),
        Box::new(forward::Forward),
        Box::new(decode::Decode),
        Box::new(merge::Merge),
        Box::new(eval::Eval),
        Box::new(loss::LossEval),
        Box::new(report::Report),
    ]
}

pub fn find(name: &str) -> Option<Box<dyn Command>> {
    registry().into_iter().find(|c| c.name() == name)
}
