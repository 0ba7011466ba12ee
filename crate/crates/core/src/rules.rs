//! Load-leveling charge-sustaining controller with a forced-idle rule for
//! cold coolant.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    motor_mechanical_power, power_split, unloaded_battery_power, ControlInput, EngineMode,
    PowertrainState, VehicleParams,
};
use crate::sim::Controller;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuleError {
    #[error("invalid rule parameters: {0}")]
    InvalidParams(String),
    #[error("no mode meets {p_trac:.0} W within the engine and battery limits")]
    InfeasibleDemand { p_trac: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleParams {
    pub soc_low: f64,
    pub soc_high: f64,
    /// Traction power above which the engine runs, W.
    pub p_trac_on: f64,
    /// Charging power added on top of traction when the engine runs, W.
    pub p_charge: f64,
    /// Coolant temperature that latches forced idle, °C.
    pub t_cl_idle_on: f64,
    /// Coolant temperature that releases the latch, °C.
    pub t_cl_idle_off: f64,
    /// Cabin heating, W.
    pub q_heat: f64,
}

impl Default for RuleParams {
    fn default() -> Self {
        Self {
            soc_low: 0.55,
            soc_high: 0.65,
            p_trac_on: 12_000.0,
            p_charge: 8_000.0,
            t_cl_idle_on: 40.0,
            t_cl_idle_off: 45.0,
            q_heat: 1500.0,
        }
    }
}

impl RuleParams {
    pub fn validate(&self) -> Result<(), RuleError> {
        let bad = |m: &str| Err(RuleError::InvalidParams(m.into()));
        if !(self.soc_low < self.soc_high) {
            return bad("soc_low < soc_high required");
        }
        if !(self.t_cl_idle_on < self.t_cl_idle_off) {
            return bad("t_cl_idle_on < t_cl_idle_off required");
        }
        if !(self.p_charge >= 0.0 && self.p_trac_on >= 0.0 && self.q_heat >= 0.0) {
            return bad("p_charge, p_trac_on and q_heat must be >= 0");
        }
        Ok(())
    }
}

/// Rule-based controller. The only state is the idle latch.
#[derive(Debug, Clone)]
pub struct RuleController {
    pub rules: RuleParams,
    pub idle_latched: bool,
}

impl RuleController {
    pub fn new(rules: RuleParams) -> Self {
        Self {
            rules,
            idle_latched: false,
        }
    }

    /// Charging share, full below `soc_low` and tapering to zero at `soc_high`.
    fn charge_power(&self, soc: f64) -> f64 {
        let r = &self.rules;
        let f = ((r.soc_high - soc) / (r.soc_high - r.soc_low)).clamp(0.0, 1.0);
        r.p_charge * f
    }

    /// Picks the control for one step and updates the latch.
    ///
    /// Engine-on demand (low SOC or high traction) overrides the idle latch;
    /// otherwise a latched cold engine idles and a warm one stays off.
    pub fn decide(
        &mut self,
        state: &PowertrainState,
        p_trac: f64,
        params: &VehicleParams,
    ) -> Result<ControlInput, RuleError> {
        let r = self.rules;
        if state.t_cl < r.t_cl_idle_on {
            self.idle_latched = true;
        } else if state.t_cl >= r.t_cl_idle_off {
            self.idle_latched = false;
        }
        let q_heat = r.q_heat;
        let wants_on = state.soc < r.soc_low || p_trac > r.p_trac_on;
        if wants_on {
            let target = p_trac.max(0.0) + self.charge_power(state.soc);
            if let Some(u) = engine_on(target, p_trac, q_heat, params) {
                return Ok(u);
            }
        }
        let mode = if self.idle_latched {
            EngineMode::Idle
        } else {
            EngineMode::Off
        };
        let p_bat = unloaded_battery_power(p_trac, params);
        if power_split(p_trac, mode, p_bat, params).is_ok() {
            return Ok(ControlInput { mode, p_bat, q_heat });
        }
        // battery alone cannot cover the demand: lean on the engine
        engine_on(p_trac.max(0.0), p_trac, q_heat, params).ok_or_else(|| {
            log::warn!("rule controller: demand {p_trac:.0} W unmet");
            RuleError::InfeasibleDemand { p_trac }
        })
    }
}

/// Engine on near `target` shaft power, clamped to the engine and battery
/// limits; the battery takes the remainder. `None` if no positive engine
/// power is admissible.
fn engine_on(target: f64, p_trac: f64, q_heat: f64, params: &VehicleParams) -> Option<ControlInput> {
    let b = &params.battery;
    let p_e = target.min(params.engine.p_e_max);
    let p_bat = unloaded_battery_power(p_trac - p_e, params).clamp(b.p_bat_min, b.p_bat_max);
    let u = ControlInput {
        mode: EngineMode::On,
        p_bat,
        q_heat,
    };
    if power_split(p_trac, EngineMode::On, p_bat, params).is_ok() {
        Some(u)
    } else {
        let p_e = p_trac - motor_mechanical_power(p_bat, params);
        log::debug!("engine-on request infeasible after clamping, P_e {p_e:.0} W");
        None
    }
}

impl Controller for RuleController {
    fn decide(
        &mut self,
        _k: usize,
        state: &PowertrainState,
        p_trac: f64,
        params: &VehicleParams,
    ) -> Result<ControlInput, String> {
        RuleController::decide(self, state, p_trac, params).map_err(|e| e.to_string())
    }
}
