//! JSON run configuration.
//!
//! ```json
//! {
//!   "grid": { "x_min": -20, "x_max": 20, "n": 2001 },
//!   "design": { "a": 12, "b": 1000, "mu": 2, "delta": 1e-4,
//!               "beta_mode": "fixed", "beta_halfwidth": 2 },
//!   "init": { "A": 2, "B": 2 },
//!   "optimizer": { "tau_schedule": [1e-2, 1e-4], "max_iter": 150 },
//!   "simulator": { "x_max": 60, "n": 6001, "epsilon": 1, "t_final": 40 }
//! }
//! ```
//!
//! Every field of `optimizer` and `simulator` has a default; the blocks may be
//! omitted.

use serde::{Deserialize, Serialize};

use crate::error::{PdpError, Result};
use crate::grid::{sech_well, BetaMode, DesignParams, Grid, PotentialField};
use crate::optimizer::OptOptions;
use crate::timedomain::{Absorber, SimConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaModeConfig {
    /// `β = 1_[-c, c]` with `c = beta_halfwidth`.
    Fixed,
    EqualsV,
}

fn default_b() -> f64 {
    1e3
}

fn default_delta() -> f64 {
    1e-4
}

fn default_beta_halfwidth() -> f64 {
    2.0
}

fn default_beta_mode() -> BetaModeConfig {
    BetaModeConfig::Fixed
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub a: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    pub mu: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_beta_mode")]
    pub beta_mode: BetaModeConfig,
    #[serde(default = "default_beta_halfwidth")]
    pub beta_halfwidth: f64,
}

/// Initial well `-A sech(B x)` on the support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    #[serde(rename = "A")]
    pub depth: f64,
    #[serde(rename = "B")]
    pub inverse_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulatorConfig {
    pub x_max: f64,
    pub n: usize,
    pub epsilon: f64,
    /// Forcing frequency; defaults to the design frequency.
    pub mu: Option<f64>,
    pub t_final: f64,
    /// Final time of the noisy-start (filtering) runs.
    pub filter_t_final: f64,
    pub dt: f64,
    pub absorber_width: f64,
    pub absorber_strength: f64,
    pub record_every: usize,
    pub noise_amplitude: f64,
    pub seed: u64,
    pub snapshot_times: Vec<f64>,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        SimulatorConfig {
            x_max: 60.0,
            n: 6001,
            epsilon: 1.0,
            mu: None,
            t_final: 40.0,
            filter_t_final: 50.0,
            dt: 0.01,
            absorber_width: 20.0,
            absorber_strength: 2.0,
            record_every: 10,
            noise_amplitude: 0.1,
            seed: 0,
            snapshot_times: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub design: DesignConfig,
    pub init: InitConfig,
    #[serde(default)]
    pub optimizer: OptOptions,
    #[serde(default)]
    pub simulator: SimulatorConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| PdpError::InvalidParameter(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.grid()?;
        if self.design.a >= g.x_max() || -self.design.a <= g.x_min() {
            return Err(PdpError::InvalidParameter(format!(
                "support half-width {} must lie inside the grid",
                self.design.a
            )));
        }
        self.params()?;
        self.optimizer.validate()?;
        let s = &self.simulator;
        if !(s.filter_t_final > 0.0 && s.filter_t_final.is_finite()) {
            return Err(PdpError::InvalidParameter("filter_t_final must be positive".into()));
        }
        if !(s.noise_amplitude >= 0.0 && s.noise_amplitude.is_finite()) {
            return Err(PdpError::InvalidParameter("noise_amplitude must be non-negative".into()));
        }
        self.sim_config()?.validate()
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.x_min, self.grid.x_max, self.grid.n)
    }

    pub fn params(&self) -> Result<DesignParams> {
        let d = &self.design;
        let beta = match d.beta_mode {
            BetaModeConfig::EqualsV => BetaMode::EqualsV,
            BetaModeConfig::Fixed => {
                if !(d.beta_halfwidth > 0.0) {
                    return Err(PdpError::InvalidParameter("beta_halfwidth must be positive".into()));
                }
                BetaMode::Fixed(PotentialField::from_fn(self.grid()?, d.beta_halfwidth, |_| 1.0)?)
            }
        };
        DesignParams::new(d.a, d.b, d.mu, d.delta, beta)
    }

    pub fn initial_potential(&self) -> Result<PotentialField> {
        sech_well(self.init.depth, self.init.inverse_length, self.design.a, self.grid()?)
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let s = &self.simulator;
        Ok(SimConfig {
            grid: Grid::symmetric(s.x_max, s.n)?,
            epsilon: s.epsilon,
            mu: s.mu.unwrap_or(self.design.mu),
            t_final: s.t_final,
            dt_max: s.dt,
            absorber: Absorber { width: s.absorber_width, strength: s.absorber_strength },
            record_every: s.record_every,
            snapshot_times: s.snapshot_times.clone(),
        })
    }

    /// `β` on an arbitrary grid (for the simulator), given the potential there.
    pub fn beta_on(&self, v: &PotentialField) -> Result<PotentialField> {
        match self.design.beta_mode {
            BetaModeConfig::EqualsV => Ok(v.clone()),
            BetaModeConfig::Fixed => PotentialField::from_fn(*v.grid(), self.design.beta_halfwidth, |_| 1.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "grid": {"x_min": -20, "x_max": 20, "n": 2001},
        "design": {"a": 12, "mu": 2},
        "init": {"A": 2.0, "B": 2.0}
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.design.b, 1e3);
        assert_eq!(c.design.delta, 1e-4);
        assert_eq!(c.design.beta_mode, BetaModeConfig::Fixed);
        assert_eq!(c.optimizer, OptOptions::default());
        assert_eq!(c.sim_config().unwrap().mu, 2.0);
        let v = c.initial_potential().unwrap();
        assert_eq!(v.values()[1000], -2.0);
    }

    #[test]
    fn round_trip() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad_support = MINIMAL.replace("\"a\": 12", "\"a\": 25");
        assert!(RunConfig::from_json(&bad_support).is_err());
        let unknown = MINIMAL.replace("\"mu\": 2", "\"mu\": 2, \"nu\": 1");
        assert!(RunConfig::from_json(&unknown).is_err());
        let neg_mu = MINIMAL.replace("\"mu\": 2", "\"mu\": -2");
        assert!(RunConfig::from_json(&neg_mu).is_err());
        assert!(RunConfig::from_json("{").is_err());
    }

    #[test]
    fn equals_v_mode() {
        let c = RunConfig::from_json(&MINIMAL.replace("\"mu\": 2", "\"mu\": 2, \"beta_mode\": \"equals_v\"")).unwrap();
        assert_eq!(c.params().unwrap().beta, BetaMode::EqualsV);
    }
}
