//! Configuration parsing and stage orchestration for the `gifs` command.

pub mod config;
pub mod pipeline;

pub use config::{parse_config, parse_config_str, ConfigError, Input, Options, PipelineConfig};
pub use pipeline::{parse_stages, run_pipeline, Outcome, PipelineError, Stage, Summary};
