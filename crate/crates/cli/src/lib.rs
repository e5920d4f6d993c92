//! Command-line front end for [`eigenmarket`]: one subcommand per pipeline
//! stage plus `report`, which runs everything and writes CSV, JSON and SVG
//! artifacts with a manifest.

pub mod artifacts;
pub mod cli;
pub mod config;
pub mod error;
pub mod format;
pub mod pipeline;
pub mod report;
pub mod svg;

pub use cli::run;
pub use config::{Base, RankList, RunConfig};
pub use error::CliError;
pub use report::{planned_artifacts, run_full_report, Manifest};
