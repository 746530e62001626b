//! Command-line front end: configuration files, presets, CSV output and run
//! manifests for the Q-switch experiments.

// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod format;
pub mod run;

pub use config::{parse_config, preset_text, Command, ConfigError, ConfigLayers, RunSpec, TMax};
pub use run::{execute, manifest, write_outputs, RunError, RunOutput};
