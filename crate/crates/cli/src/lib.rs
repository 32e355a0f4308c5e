//! Config-driven front end for surfloss: parses a run file, executes one of
//! the simulate, sweep, budget or compare workflows and writes CSV reports,
//! plot data and a hashed manifest.

pub mod config;
pub mod run;

pub use config::{parse_config, parse_config_with, Command, ParseError, RunConfig};
pub use run::{execute, Artifacts, CliError, MANIFEST};
