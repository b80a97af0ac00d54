//! Command-line layer over the modelling core: run configurations, binary
//! model files, report rendering, the architecture sweep, and the `cura`
//! binary's subcommands.

pub mod ablate;
pub mod commands;
pub mod model_file;
pub mod report;
pub mod run_config;
