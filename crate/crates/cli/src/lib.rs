//! Pipeline driver for the attoscope toolkit: configuration, stages and the
//! output manifest.

pub mod config;
pub mod manifest;
pub mod stages;

pub use config::{ConfigIssue, RunConfig};
pub use manifest::{Manifest, ManifestEntry};
pub use stages::{run, CliError, RunOptions, Stage, StageReport};
