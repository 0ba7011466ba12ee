//! Plant model: battery SOC, engine coolant and cabin temperature dynamics,
//! the power-split balance and engine-mode operating constraints.

mod dynamics;
mod params;
mod state;
mod table;

use thiserror::Error;

pub use dynamics::{
    cabin_derivative, compartment_temperature, coolant_balance, coolant_derivative, fuel_rate,
    heat_flows, motor_mechanical_power, nominal_fuel_rate, power_split, soc_derivative, step,
    unloaded_battery_power, HeatFlows, StepOutcome, SPLIT_TOLERANCE_W,
};
pub use params::{BatteryParams, CabinParams, EngineThermalParams, FuelMaps, VehicleParams};
pub use state::{ControlInput, EngineMode, PowertrainState};
pub use table::Table1d;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("battery power {p_bat:.1} W exceeds the deliverable limit {limit:.1} W")]
    DiscriminantNegative { p_bat: f64, limit: f64 },
    #[error("soc {0} outside the battery table range")]
    SocOutOfTable(f64),
    #[error("infeasible split: mode {mode}, p_bat {p_bat:.1} W, p_trac {p_trac:.1} W gives P_e {p_e:.1} W")]
    InfeasibleSplit {
        mode: EngineMode,
        p_bat: f64,
        p_trac: f64,
        p_e: f64,
    },
    #[error("engine on with non-positive power {0} W")]
    NegativeEnginePower(f64),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}
