//! Command-line front end for the adc pipeline: project configs, the staged
//! pipeline runner, detector dispatch and artifact summaries.

pub mod config;
pub mod curation;
pub mod explain;
pub mod pipeline;

pub use config::{ConfigError, ProjectConfig};
pub use explain::explain;
pub use pipeline::{run_pipeline, PipelineError, RunReport, StageStatus};
