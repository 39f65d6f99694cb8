use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use pdp_core::config::RunConfig;
use pdp_core::optimizer::Margins;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    A,
    Mu,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::A => "a",
            SweepVar::Mu => "mu",
        }
    }
}

/// Everything beyond the configuration that determines a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Job {
    Evaluate {
        potential: Option<PathBuf>,
    },
    Optimize,
    Sweep {
        vary: SweepVar,
        values: Vec<f64>,
        jobs: Option<usize>,
    },
    Simulate {
        potential: Option<PathBuf>,
    },
    Filter {
        potential: Option<PathBuf>,
    },
    Gradcheck {
        potential: Option<PathBuf>,
        directions: usize,
        seed: u64,
        eps: f64,
        tol: f64,
    },
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::Evaluate { .. } => "evaluate",
            Job::Optimize => "optimize",
            Job::Sweep { .. } => "sweep",
            Job::Simulate { .. } => "simulate",
            Job::Filter { .. } => "filter",
            Job::Gradcheck { .. } => "gradcheck",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Headline {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_init: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_opt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_res: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margins: Option<Margins>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub job: Job,
    /// Effective configuration, after command-line overrides.
    pub config: RunConfig,
    pub code_version: String,
    /// Seconds since the Unix epoch.
    pub started_at: u64,
    pub finished_at: u64,
    /// Files of the run, relative to the output directory.
    pub outputs: Vec<String>,
    pub headline: Headline,
    /// Command-specific results.
    pub details: serde_json::Value,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))
            .map_err(CliError::config)?;
        serde_json::from_str(&text)
            .with_context(|| format!("parsing manifest {}", path.display()))
            .map_err(CliError::config)
    }
}
