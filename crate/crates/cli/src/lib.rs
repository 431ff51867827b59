//! Pipeline driver around `fracmem-core`: configuration, data acquisition, per-asset
//! stages, charts and the run manifest.

pub mod chart;
pub mod config;
pub mod error;
pub mod fetch;
pub mod files;
pub mod fixture;
pub mod run;
pub mod stages;

pub use config::{Overrides, PipelineConfig};
pub use error::{CliError, Result};
pub use run::{cmd_run, run_stage, RunManifest, RunOptions, Step, StepStatus};
