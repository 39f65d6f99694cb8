//! The `pdp` command line: configuration loading, runs, CSV output and
//! manifests.

pub mod args;
pub mod commands;
pub mod error;
pub mod io;
pub mod manifest;

pub use args::Cli;
pub use commands::{execute, run, RunOutput};
pub use error::{CliError, ExitKind};
pub use manifest::{Job, RunManifest};
