use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use mtscene_core::codec::CodecConfig;
use mtscene_core::losses::{TaskWeights, DEFAULT_LABEL_SMOOTHING};
use mtscene_core::orientation::DEFAULT_KAPPA;
use mtscene_core::spectrum::ClassSpectrum;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GraphPreset {
    #[default]
    Full,
    Tiny,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ClassWeighting {
    #[default]
    MedianFrequency,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub count: u64,
    pub instances: usize,
    pub height: usize,
    pub width: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            count: 1,
            instances: 5,
            height: 96,
            width: 128,
        }
    }
}

/// Everything a subcommand needs. Loaded from `--config` JSON, then
/// overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub spectrum: String,
    pub seed: u64,
    pub threads: Option<usize>,
    pub codec: CodecConfig,
    pub task_weights: TaskWeights,
    pub kappa: f64,
    pub epsilon: f64,
    pub synth: SynthConfig,
    pub graph: GraphPreset,
    pub weights: Option<PathBuf>,
    pub export_weights: Option<PathBuf>,
    pub class_weighting: ClassWeighting,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            output: None,
            gt: None,
            spectrum: "nyuv2-40".into(),
            seed: 0,
            threads: None,
            codec: CodecConfig::default(),
            task_weights: TaskWeights::default(),
            kappa: DEFAULT_KAPPA,
            epsilon: DEFAULT_LABEL_SMOOTHING,
            synth: SynthConfig::default(),
            graph: GraphPreset::default(),
            weights: None,
            export_weights: None,
            class_weighting: ClassWeighting::default(),
        }
    }
}

/// Flags shared by every subcommand. Unset flags leave the config value
/// untouched.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON run config; flags override its fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input directory (dataset split, prediction directory or metrics file)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory or file
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Ground-truth dataset split (eval, loss-eval)
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Bundled spectrum name (nyuv2-40, sunrgbd-37) or a JSON file
    #[arg(long)]
    pub spectrum: Option<String>,
    /// Seed for synthetic scenes and random weights
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; never changes results
    #[arg(long)]
    pub threads: Option<usize>,
    /// Minimum center heatmap score
    #[arg(long)]
    pub tau: Option<f32>,
    /// Side of the center NMS window (odd)
    #[arg(long)]
    pub pool_size: Option<usize>,
    /// Maximum number of centers per image
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Gaussian sigma of encoded centers, in pixels
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Concentration of the von Mises orientation loss
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Label smoothing of the scene loss
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Task weights semantic:scene:instance:orientation
    #[arg(long, value_name = "A:B:C:D")]
    pub task_weights: Option<String>,
    /// Number of synthetic scenes
    #[arg(long)]
    pub count: Option<u64>,
    /// Instances per synthetic scene
    #[arg(long)]
    pub n: Option<usize>,
    /// Synthetic scene height
    #[arg(long)]
    pub height: Option<usize>,
    /// Synthetic scene width
    #[arg(long)]
    pub width: Option<usize>,
    /// Network size used when no weight archive is given
    #[arg(long, value_enum)]
    pub graph: Option<GraphPreset>,
    /// Weight archive directory to load
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Write the weights used by `forward` to this directory
    #[arg(long)]
    pub export_weights: Option<PathBuf>,
    /// Semantic class weights for loss-eval
    #[arg(long, value_enum)]
    pub class_weighting: Option<ClassWeighting>,
}

macro_rules! apply {
    ($($flag:expr => $field:expr),* $(,)?) => {
        $(if let Some(v) = $flag.clone() { $field = v.into(); })*
    };
}

impl RunConfig {
    pub fn from_flags(flags: &Flags) -> Result<Self, CliError> {
        let mut cfg = match &flags.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        apply! {
            flags.input => cfg.input,
            flags.output => cfg.output,
            flags.gt => cfg.gt,
            flags.spectrum => cfg.spectrum,
            flags.seed => cfg.seed,
            flags.tau => cfg.codec.threshold,
            flags.pool_size => cfg.codec.pool_size,
            flags.top_k => cfg.codec.top_k,
            flags.sigma => cfg.codec.sigma,
            flags.kappa => cfg.kappa,
            flags.epsilon => cfg.epsilon,
            flags.count => cfg.synth.count,
            flags.n => cfg.synth.instances,
            flags.height => cfg.synth.height,
            flags.width => cfg.synth.width,
            flags.graph => cfg.graph,
            flags.weights => cfg.weights,
            flags.export_weights => cfg.export_weights,
            flags.class_weighting => cfg.class_weighting,
        }
        if let Some(t) = flags.threads {
            cfg.threads = Some(t);
        }
        if let Some(tw) = &flags.task_weights {
            cfg.task_weights = tw.parse().map_err(|e| CliError::Validation(format!("--task-weights: {e}")))?;
        }
        Ok(cfg)
    }

    /// Checks every numeric field and resolves the spectrum.
    pub fn validate(&self) -> Result<ClassSpectrum, CliError> {
        let invalid = |e: mtscene_core::Error| CliError::Validation(e.to_string());
        self.codec.validate().map_err(invalid)?;
        self.task_weights.validate().map_err(invalid)?;
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(CliError::Validation(format!("kappa must be a positive number, got {}", self.kappa)));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(CliError::Validation(format!("epsilon must lie in [0, 1), got {}", self.epsilon)));
        }
        if self.threads == Some(0) {
            return Err(CliError::Validation("threads must be at least 1".into()));
        }
        if self.synth.height < 16 || self.synth.width < 16 {
            return Err(CliError::Validation(format!(
                "synthetic scenes need at least 16x16 pixels, got {}x{}",
                self.synth.height, self.synth.width
            )));
        }
        ClassSpectrum::load(&self.spectrum)
            .map_err(|e| CliError::Validation(format!("spectrum '{}': {e}", self.spectrum)))
    }
}

pub fn require<'a>(path: &'a Option<PathBuf>, flag: &str, command: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::Validation(format!("{command} needs --{flag} (or \"{flag}\" in the config file)")))
}
