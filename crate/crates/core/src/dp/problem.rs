use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::grid::{Axis, GridSpec};
use super::interp::StateGrid;
use super::DpError;
use crate::cycle::DriveCycle;
use crate::model::{PowertrainState, VehicleParams};

/// Which states and controls the optimization carries.
///
/// | formulation | states | controls |
/// |---|---|---|
/// | `BaselineDp` | SOC | mode, P_bat |
/// | `ThermalDp` | SOC, T_cl | mode, P_bat |
/// | `ThermalCabinDp` | SOC, T_cl, T_cab | mode, P_bat, Q_heat |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formulation {
    #[serde(rename = "baseline")]
    BaselineDp,
    #[serde(rename = "thermal")]
    ThermalDp,
    #[serde(rename = "thermal-cabin")]
    ThermalCabinDp,
}

impl Formulation {
    pub const ALL: [Formulation; 3] = [
        Formulation::BaselineDp,
        Formulation::ThermalDp,
        Formulation::ThermalCabinDp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Formulation::BaselineDp => "baseline",
            Formulation::ThermalDp => "thermal",
            Formulation::ThermalCabinDp => "thermal-cabin",
        }
    }

    pub fn state_dims(self) -> usize {
        match self {
            Formulation::BaselineDp => 1,
            Formulation::ThermalDp => 2,
            Formulation::ThermalCabinDp => 3,
        }
    }

    pub fn control_dims(self) -> usize {
        match self {
            Formulation::ThermalCabinDp => 3,
            _ => 2,
        }
    }

    pub fn tracks_coolant(self) -> bool {
        self != Formulation::BaselineDp
    }

    pub fn tracks_cabin(self) -> bool {
        self == Formulation::ThermalCabinDp
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Formulation {
    type Err = DpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Formulation::BaselineDp),
            "thermal" => Ok(Formulation::ThermalDp),
            "thermal-cabin" => Ok(Formulation::ThermalCabinDp),
            other => Err(DpError::InvalidProblem(format!(
                "unknown formulation {other:?} (expected baseline, thermal or thermal-cabin)"
            ))),
        }
    }
}

/// One-sided linear terminal penalty `w * max(0, target - x)` per state,
/// in grams of fuel per unit deficit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerminalSpec {
    pub soc_target: f64,
    pub t_cl_target: f64,
    pub t_cab_target: f64,
    /// g per unit SOC.
    pub w_soc: f64,
    /// g per °C.
    pub w_t_cl: f64,
    /// g per °C.
    pub w_t_cab: f64,
}

impl Default for TerminalSpec {
    fn default() -> Self {
        Self::calibrated(&VehicleParams::default(), 0.6)
    }
}

/// Assumed battery share of the energy delivered on the charging path.
const CHARGE_EFFICIENCY: f64 = 0.95;

/// Engine shaft power at which recharging is costed, W.
pub const RECHARGE_POWER: f64 = 8_000.0;

impl TerminalSpec {
    /// Weights at the fuel cost of restoring each state. SOC is restored by
    /// running the engine at [`RECHARGE_POWER`] into the generator, costed at
    /// the average fuel per joule there, offset included. Temperatures are
    /// restored by engine waste heat into the coolant. Temperature targets
    /// sit at the lower bounds, so only the SOC target binds unless
    /// overridden.
    pub fn calibrated(params: &VehicleParams, soc_target: f64) -> Self {
        let b = &params.battery;
        let p_ref = RECHARGE_POWER.min(params.engine.p_e_max);
        let g_per_joule = params.maps.w_f_line.eval(p_ref) / p_ref;
        let joules_per_soc = b.c_bat * b.u_oc.eval(soc_target);
        let heat_g_per_joule = 1.0 / (params.engine.lhv * (1.0 - params.engine.gamma_exh));
        Self {
            soc_target,
            t_cl_target: params.engine.t_cl_min,
            t_cab_target: params.cabin.t_cab_lb,
            w_soc: joules_per_soc * g_per_joule / (params.eta_mg * CHARGE_EFFICIENCY),
            w_t_cl: params.engine.m_eng_c_eng * heat_g_per_joule,
            w_t_cab: params.cabin.m_cab_c_cab * heat_g_per_joule,
        }
    }

    pub fn validate(&self) -> Result<(), DpError> {
        let w = [self.w_soc, self.w_t_cl, self.w_t_cab];
        if w.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(DpError::InvalidProblem(
                "terminal weights must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Terminal cost over the states the formulation tracks.
    pub fn cost(&self, formulation: Formulation, soc: f64, t_cl: f64, t_cab: f64) -> f64 {
        let deficit = |target: f64, x: f64| (target - x).max(0.0);
        let mut c = self.w_soc * deficit(self.soc_target, soc);
        if formulation.tracks_coolant() {
            c += self.w_t_cl * deficit(self.t_cl_target, t_cl);
        }
        if formulation.tracks_cabin() {
            c += self.w_t_cab * deficit(self.t_cab_target, t_cab);
        }
        c
    }
}

/// How successor states are read from the next cost-to-go layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ValueInterpolation {
    #[default]
    Multilinear,
    /// Snap successors to the nearest node (grid-snapped dynamics).
    Nearest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpProblem {
    pub formulation: Formulation,
    pub grid: GridSpec,
    pub cycle: DriveCycle,
    pub params: VehicleParams,
    /// Heating power for the formulations without a cabin state, W.
    pub q_heat_fixed: f64,
    pub terminal: TerminalSpec,
    pub initial_state: PowertrainState,
    #[serde(default)]
    pub interpolation: ValueInterpolation,
}

impl DpProblem {
    pub fn validate(&self) -> Result<(), DpError> {
        self.params
            .validate()
            .map_err(|e| DpError::InvalidProblem(e.to_string()))?;
        self.grid.validate()?;
        self.terminal.validate()?;
        if self.cycle.len() < 2 {
            return Err(DpError::InvalidProblem(
                "cycle needs at least two samples".into(),
            ));
        }
        self.initial_state
            .check_initial(self.params.t_amb)
            .map_err(|e| DpError::InvalidProblem(e.to_string()))?;
        let c = &self.params.cabin;
        if !self.formulation.tracks_cabin()
            && !(self.q_heat_fixed >= c.q_heat_min && self.q_heat_fixed <= c.q_heat_max)
        {
            return Err(DpError::InvalidProblem(format!(
                "q_heat_fixed {} W outside [{}, {}] W",
                self.q_heat_fixed, c.q_heat_min, c.q_heat_max
            )));
        }
        Ok(())
    }

    pub fn state_grid(&self) -> StateGrid {
        let f = self.formulation;
        let t_cl = if f.tracks_coolant() {
            Axis::from_range(&self.grid.t_cl)
        } else {
            Axis::fixed(self.params.engine.t_cl_nominal)
        };
        let t_cab = if f.tracks_cabin() {
            Axis::from_range(&self.grid.t_cab)
        } else {
            Axis::fixed(self.initial_state.t_cab)
        };
        StateGrid {
            axes: [Axis::from_range(&self.grid.soc), t_cl, t_cab],
            active: [true, f.tracks_coolant(), f.tracks_cabin()],
        }
    }

    /// Heating powers the optimization may choose from.
    pub fn q_heat_values(&self) -> Vec<f64> {
        if self.formulation.tracks_cabin() {
            self.grid.q_heat.values()
        } else {
            vec![self.q_heat_fixed]
        }
    }

    pub fn horizon(&self) -> usize {
        self.cycle.horizon()
    }
}
