pub mod codec;
pub mod dataset;
pub mod graph;
mod error;
pub mod labels;
pub mod losses;
pub mod metrics;
pub mod orientation;
pub mod panoptic;
pub mod spectrum;

pub use error::{Error, Result};
pub use labels::{LabelMap, Mask};
