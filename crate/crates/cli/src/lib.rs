pub mod bench;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod model;
pub mod pipeline;
pub mod synth;
pub mod visualize;

pub use config::PipelineConfig;
pub use error::{CliError, Result};
