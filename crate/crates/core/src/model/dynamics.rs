//! Continuous-time derivatives of the three plant states and the forward
//! Euler transition built from them.

use serde::{Deserialize, Serialize};

use super::params::{BatteryParams, VehicleParams};
use super::state::{ControlInput, EngineMode, PowertrainState};
use super::ModelError;

/// Tolerance on the engine power balance for the unloaded modes, W.
pub const SPLIT_TOLERANCE_W: f64 = 1.0;

/// Battery SOC rate, 1/s, for terminal power `p_bat` (positive = discharge).
pub fn soc_derivative(soc: f64, p_bat: f64, battery: &BatteryParams) -> Result<f64, ModelError> {
    if !battery.u_oc.contains(soc) || !battery.r_int.contains(soc) {
        return Err(ModelError::SocOutOfTable(soc));
    }
    let u_oc = battery.u_oc.eval(soc);
    let r_int = battery.r_int.eval(soc);
    let disc = u_oc * u_oc - 4.0 * r_int * p_bat;
    if disc < 0.0 {
        return Err(ModelError::DiscriminantNegative {
            p_bat,
            limit: u_oc * u_oc / (4.0 * r_int),
        });
    }
    Ok(-(u_oc - disc.sqrt()) / (2.0 * r_int * battery.c_bat))
}

/// Mechanical power delivered by the motor/generator for a battery draw.
pub fn motor_mechanical_power(p_bat: f64, params: &VehicleParams) -> f64 {
    let p_mg = p_bat - params.battery.p_aux;
    if p_mg >= 0.0 {
        params.eta_mg * p_mg
    } else {
        p_mg / params.eta_mg
    }
}

/// Battery power that covers `p_trac` and the auxiliary load with the engine
/// delivering no shaft power.
pub fn unloaded_battery_power(p_trac: f64, params: &VehicleParams) -> f64 {
    let p_mg = if p_trac >= 0.0 {
        p_trac / params.eta_mg
    } else {
        p_trac * params.eta_mg
    };
    params.battery.p_aux + p_mg
}

/// Engine shaft power implied by the traction demand and battery draw.
///
/// Off and Idle are feasible only if the balance leaves the engine unloaded
/// (within [`SPLIT_TOLERANCE_W`]). When `p_trac < 0` the friction brakes may
/// take part of the braking power, so the motor can recover anything between
/// nothing and all of it. On needs `0 < P_e <= p_e_max`.
pub fn power_split(
    p_trac: f64,
    mode: EngineMode,
    p_bat: f64,
    params: &VehicleParams,
) -> Result<f64, ModelError> {
    let b = &params.battery;
    let infeasible = |p_e: f64| ModelError::InfeasibleSplit {
        mode,
        p_bat,
        p_trac,
        p_e,
    };
    let slack = 1e-9 * (b.p_bat_max - b.p_bat_min);
    if p_bat < b.p_bat_min - slack || p_bat > b.p_bat_max + slack {
        return Err(infeasible(f64::NAN));
    }
    let p_e = p_trac - motor_mechanical_power(p_bat, params);
    match mode {
        EngineMode::Off | EngineMode::Idle => {
            // while braking, friction may absorb whatever the motor does not
            let friction_floor = p_trac.min(0.0) - SPLIT_TOLERANCE_W;
            if p_e <= SPLIT_TOLERANCE_W && p_e >= friction_floor {
                Ok(0.0)
            } else {
                Err(infeasible(p_e))
            }
        }
        EngineMode::On => {
            if p_e > 0.0 && p_e <= params.engine.p_e_max {
                Ok(p_e)
            } else {
                Err(infeasible(p_e))
            }
        }
    }
}

/// Fuel rate without the cold correction, g/s. Unloaded modes ignore `p_e`.
pub fn nominal_fuel_rate(mode: EngineMode, p_e: f64, params: &VehicleParams) -> Result<f64, ModelError> {
    match mode {
        EngineMode::Off => Ok(0.0),
        EngineMode::Idle => Ok(params.engine.w_idle),
        EngineMode::On => {
            if p_e <= 0.0 {
                Err(ModelError::NegativeEnginePower(p_e))
            } else {
                Ok(params.maps.w_f_line.eval(p_e))
            }
        }
    }
}

/// Fuel rate, g/s, with the cold correction applied in mode On.
pub fn fuel_rate(mode: EngineMode, p_e: f64, t_cl: f64, params: &VehicleParams) -> Result<f64, ModelError> {
    let nominal = nominal_fuel_rate(mode, p_e, params)?;
    Ok(match mode {
        EngineMode::On => nominal * params.maps.f_cl.eval(t_cl),
        _ => nominal,
    })
}

/// Heat flows acting on the coolant over one instant, W.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatFlows {
    pub q_fuel: f64,
    pub p_e: f64,
    pub q_exh: f64,
    pub q_air: f64,
    pub q_rad: f64,
    pub q_heat: f64,
}

impl HeatFlows {
    pub fn net(&self) -> f64 {
        self.q_fuel - self.p_e - self.q_exh - self.q_air - self.q_rad - self.q_heat
    }

    /// Sum of magnitudes, used to scale bookkeeping tolerances.
    pub fn gross(&self) -> f64 {
        self.q_fuel.abs()
            + self.p_e.abs()
            + self.q_exh.abs()
            + self.q_air.abs()
            + self.q_rad.abs()
            + self.q_heat.abs()
    }
}

pub fn compartment_temperature(t_cl: f64, params: &VehicleParams) -> f64 {
    params.t_amb + params.engine.beta_com * (t_cl - params.t_amb)
}

/// Coolant heat flows for a given combustion heat release.
pub fn heat_flows(q_fuel: f64, p_e: f64, t_cl: f64, q_heat: f64, params: &VehicleParams) -> HeatFlows {
    let e = &params.engine;
    let t_com = compartment_temperature(t_cl, params);
    HeatFlows {
        q_fuel,
        p_e,
        q_exh: e.gamma_exh * (q_fuel - p_e),
        q_air: (t_cl - t_com) * e.a_eng_alpha_eng,
        q_rad: params.maps.q_rad.eval(t_cl),
        q_heat,
    }
}

/// Fuel rate and coolant heat flows for one operating point.
pub fn coolant_balance(
    t_cl: f64,
    mode: EngineMode,
    p_e: f64,
    q_heat: f64,
    params: &VehicleParams,
) -> Result<(f64, HeatFlows), ModelError> {
    let w_f = fuel_rate(mode, p_e, t_cl, params)?;
    let flows = heat_flows(params.engine.lhv * w_f, p_e, t_cl, q_heat, params);
    Ok((w_f, flows))
}

/// Coolant temperature rate, °C/s.
pub fn coolant_derivative(
    t_cl: f64,
    mode: EngineMode,
    p_e: f64,
    q_heat: f64,
    params: &VehicleParams,
) -> Result<f64, ModelError> {
    let (_, flows) = coolant_balance(t_cl, mode, p_e, q_heat, params)?;
    Ok(flows.net() / params.engine.m_eng_c_eng)
}

/// Cabin temperature rate, °C/s. The shell load is `ua_cab (t_amb - t_cab)`.
pub fn cabin_derivative(t_cab: f64, q_heat: f64, params: &VehicleParams) -> f64 {
    let c = &params.cabin;
    let q_load = c.ua_cab * (params.t_amb - t_cab);
    (q_heat + q_load + c.q_sun) / c.m_cab_c_cab
}

/// Everything one transition produces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next: PowertrainState,
    /// Fuel burnt over the step, g.
    pub fuel_g: f64,
    /// Fuel rate held over the step, g/s.
    pub w_f: f64,
    pub flows: HeatFlows,
}

/// Forward-Euler advance of all three states by `params.t_s`.
pub fn step(
    state: &PowertrainState,
    u: &ControlInput,
    p_trac: f64,
    params: &VehicleParams,
) -> Result<StepOutcome, ModelError> {
    let t_s = params.t_s;
    let p_e = power_split(p_trac, u.mode, u.p_bat, params)?;
    let d_soc = soc_derivative(state.soc, u.p_bat, &params.battery)?;
    if !params.maps.f_cl.contains(state.t_cl) {
        log::debug!("coolant {} °C outside f_cl table, clamping", state.t_cl);
    }
    let (w_f, flows) = coolant_balance(state.t_cl, u.mode, p_e, u.q_heat, params)?;
    let d_cl = flows.net() / params.engine.m_eng_c_eng;
    let d_cab = cabin_derivative(state.t_cab, u.q_heat, params);
    let next = PowertrainState {
        soc: state.soc + t_s * d_soc,
        t_cl: state.t_cl + t_s * d_cl,
        t_cab: state.t_cab + t_s * d_cab,
    };
    next.check()?;
    Ok(StepOutcome {
        next,
        fuel_g: w_f * t_s,
        w_f,
        flows,
    })
}
