//! CSV input and output.
//!
//! | file               | columns                                                   |
//! |--------------------|-----------------------------------------------------------|
//! | `V_init.csv`, `V_opt.csv` | `x,V`                                              |
//! | `psi.csv`          | `x,psi`                                                   |
//! | `transmission.csv` | `k,t_sq`                                                  |
//! | `trace.csv`        | one row per accepted iterate, see [`TraceRow`]            |
//! | `projection.csv`   | `t,projection_sq,norm`                                    |
//! | `snapshots.csv`    | `t,x,density`                                             |
//! | `summary.csv`      | one row per sweep entry, see [`SummaryRow`]               |
//! | `gradcheck.csv`    | `functional,direction,analytic,finite_difference,rel_error` |
//!
//! Floats are written in shortest round-trip form, so re-reading a written
//! potential reproduces it bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use pdp_core::optimizer::TraceRow;
use pdp_core::{Grid, PotentialField};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Serialize, Deserialize)]
struct PotentialRow {
    x: f64,
    #[serde(rename = "V")]
    v: f64,
}

#[derive(Debug, Serialize)]
pub struct PsiRow {
    pub x: f64,
    pub psi: f64,
}

#[derive(Debug, Serialize)]
pub struct TransmissionRow {
    pub k: f64,
    pub t_sq: f64,
}

#[derive(Debug, Serialize)]
pub struct ProjectionRow {
    pub t: f64,
    pub projection_sq: f64,
    pub norm: f64,
}

#[derive(Debug, Serialize)]
pub struct SnapshotRow {
    pub t: f64,
    pub x: f64,
    pub density: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub label: String,
    pub a: f64,
    pub mu: f64,
    pub gamma_init: Option<f64>,
    pub gamma_opt: Option<f64>,
    pub lambda: Option<f64>,
    pub k_res: Option<f64>,
    pub transmission_sq: Option<f64>,
    pub mechanism: String,
    pub iterations: Option<usize>,
    pub termination: String,
    pub error: String,
}

/// Reads an `x,V` file and checks it against `grid`; the values must vanish
/// outside `[-support, support]`.
pub fn read_potential(path: &Path, grid: Grid, support: f64) -> CliResult<PotentialField> {
    let mut rdr = csv::Reader::from_path(path)
        .with_context(|| format!("opening potential file {}", path.display()))
        .map_err(CliError::config)?;
    let rows: Vec<PotentialRow> = rdr
        .deserialize()
        .collect::<Result<_, _>>()
        .with_context(|| format!("parsing potential file {}", path.display()))
        .map_err(CliError::config)?;
    if rows.len() != grid.len() {
        return Err(CliError::config(anyhow::anyhow!(
            "{} has {} rows but the grid has {} nodes",
            path.display(),
            rows.len(),
            grid.len()
        )));
    }
    let tol = 1e-6 * grid.h();
    if let Some((j, r)) = rows.iter().enumerate().find(|(j, r)| (r.x - grid.x(*j)).abs() > tol) {
        return Err(CliError::config(anyhow::anyhow!(
            "{}: node {j} is at x = {} but the grid has x = {}",
            path.display(),
            r.x,
            grid.x(j)
        )));
    }
    PotentialField::new(grid, rows.into_iter().map(|r| r.v).collect(), support)
        .map_err(|e| CliError::config(e).context(format!("potential file {}", path.display())))
}

/// An output directory that remembers every file written to it.
#[derive(Debug)]
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root)
            .with_context(|| format!("creating output directory {}", root.display()))
            .map_err(CliError::config)?;
        Ok(OutDir { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Files written so far, relative to the root, in write order.
    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn target(&mut self, name: &str) -> CliResult<PathBuf> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))
                .map_err(CliError::config)?;
        }
        self.written.push(name.to_string());
        Ok(path)
    }

    pub fn write_csv<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> CliResult<()> {
        let path = self.target(name)?;
        let write = || -> anyhow::Result<()> {
            let mut w = csv::Writer::from_path(&path)?;
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
            Ok(())
        };
        write().with_context(|| format!("writing {}", path.display())).map_err(CliError::config)
    }

    pub fn write_potential(&mut self, name: &str, v: &PotentialField) -> CliResult<()> {
        let g = *v.grid();
        self.write_csv(name, (0..g.len()).map(|j| PotentialRow { x: g.x(j), v: v.values()[j] }))
    }

    pub fn write_psi(&mut self, name: &str, grid: &Grid, psi: &[f64]) -> CliResult<()> {
        self.write_csv(name, (0..grid.len()).map(|j| PsiRow { x: grid.x(j), psi: psi[j] }))
    }

    pub fn write_trace(&mut self, name: &str, rows: &[TraceRow]) -> CliResult<()> {
        self.write_csv(name, rows)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let path = self.target(name)?;
        let text = serde_json::to_string_pretty(value).map_err(CliError::solver)?;
        fs::write(&path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))
            .map_err(CliError::config)
    }
}
