//! Run configuration: vehicle parameters, rule thresholds, grids, terminal
//! cost and initial state in one JSON document.

use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

use crate::cycle::{DriveCycle, RoadLoad};
use crate::dp::{DpError, DpProblem, Formulation, GridSpec, TerminalSpec, ValueInterpolation};
use crate::model::{PowertrainState, VehicleParams};
use crate::rules::RuleParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub vehicle: VehicleParams,
    pub road: RoadLoad,
    pub rules: RuleParams,
    /// Omitted: SOC 0.01, temperatures 1 °C, battery 500 W, heating 50 W
    /// over the vehicle's bounds.
    pub grid: Option<GridSpec>,
    /// `variable.field=value` edits applied on top of `grid`.
    pub grid_overrides: Vec<String>,
    /// Omitted: calibrated weights with the SOC target at the initial SOC.
    pub terminal: Option<TerminalSpec>,
    /// Cabin heating for strategies that do not optimize it, W.
    pub q_heat_fixed: f64,
    pub initial: PowertrainState,
    pub interpolation: ValueInterpolation,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            vehicle: VehicleParams::default(),
            road: RoadLoad::default(),
            rules: RuleParams::default(),
            grid: None,
            grid_overrides: Vec::new(),
            terminal: None,
            q_heat_fixed: 1500.0,
            initial: PowertrainState {
                soc: 0.6,
                t_cl: 70.0,
                t_cab: 14.0,
            },
            interpolation: ValueInterpolation::Multilinear,
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn grid_spec(&self) -> Result<GridSpec, DpError> {
        let mut g = self
            .grid
            .clone()
            .unwrap_or_else(|| GridSpec::from_params(&self.vehicle));
        for o in &self.grid_overrides {
            g.apply_override(o)?;
        }
        Ok(g)
    }

    pub fn terminal_spec(&self) -> TerminalSpec {
        self.terminal
            .unwrap_or_else(|| TerminalSpec::calibrated(&self.vehicle, self.initial.soc))
    }

    /// Every invariant violation, empty when the configuration is usable.
    pub fn issues(&self) -> Vec<String> {
        let mut out = self.vehicle.issues();
        if let Err(e) = self.rules.validate() {
            out.push(e.to_string());
        }
        match self.grid_spec() {
            Ok(g) => {
                if let Err(e) = g.validate() {
                    out.push(e.to_string());
                }
            }
            Err(e) => out.push(e.to_string()),
        }
        if let Err(e) = self.terminal_spec().validate() {
            out.push(e.to_string());
        }
        if let Err(e) = self.initial.check_initial(self.vehicle.t_amb) {
            out.push(e.to_string());
        }
        let c = &self.vehicle.cabin;
        if !(self.q_heat_fixed >= c.q_heat_min && self.q_heat_fixed <= c.q_heat_max) {
            out.push(format!(
                "q_heat_fixed {} W outside [{}, {}] W",
                self.q_heat_fixed, c.q_heat_min, c.q_heat_max
            ));
        }
        let r = &self.road;
        if !(r.mass > 0.0 && r.c_rr >= 0.0 && r.cd_a >= 0.0 && r.rho > 0.0 && r.regen_floor <= 0.0) {
            out.push("road: mass, rho > 0, c_rr, cd_a >= 0 and regen_floor <= 0 required".into());
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(issues.join("; ")))
        }
    }

    /// Rule thresholds with the heating forced to `q_heat_fixed`.
    pub fn rule_params(&self) -> RuleParams {
        RuleParams {
            q_heat: self.q_heat_fixed,
            ..self.rules
        }
    }

    pub fn problem(&self, formulation: Formulation, cycle: DriveCycle) -> Result<DpProblem, DpError> {
        let p = DpProblem {
            formulation,
            grid: self.grid_spec()?,
            cycle,
            params: self.vehicle.clone(),
            q_heat_fixed: self.q_heat_fixed,
            terminal: self.terminal_spec(),
            initial_state: self.initial,
            interpolation: self.interpolation,
        };
        p.validate()?;
        Ok(p)
    }
}
