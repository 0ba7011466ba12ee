use serde::{Deserialize, Serialize};
use std::fmt;

use super::ModelError;

/// Continuous plant state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowertrainState {
    pub soc: f64,
    /// Engine coolant temperature, °C.
    pub t_cl: f64,
    /// Cabin air temperature, °C.
    pub t_cab: f64,
}

impl PowertrainState {
    pub fn new(soc: f64, t_cl: f64, t_cab: f64) -> Result<Self, ModelError> {
        let s = Self { soc, t_cl, t_cab };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<(), ModelError> {
        if !(0.0..=1.0).contains(&self.soc) {
            return Err(ModelError::InvalidState(format!(
                "soc {} outside [0, 1]",
                self.soc
            )));
        }
        if !self.t_cl.is_finite() || !self.t_cab.is_finite() {
            return Err(ModelError::InvalidState(
                "temperatures must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Initial-condition check: a trip may not start with the coolant colder
    /// than ambient.
    pub fn check_initial(&self, t_amb: f64) -> Result<(), ModelError> {
        self.check()?;
        if self.t_cl < t_amb {
            return Err(ModelError::InvalidState(format!(
                "initial coolant {} °C below ambient {} °C",
                self.t_cl, t_amb
            )));
        }
        Ok(())
    }
}

/// Engine operating mode; `index()` gives the 1-based e_mode code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EngineMode {
    Off,
    Idle,
    On,
}

impl EngineMode {
    pub const ALL: [EngineMode; 3] = [EngineMode::Off, EngineMode::Idle, EngineMode::On];

    pub fn index(self) -> u8 {
        match self {
            EngineMode::Off => 1,
            EngineMode::Idle => 2,
            EngineMode::On => 3,
        }
    }

    pub fn from_index(i: u8) -> Option<Self> {
        match i {
            1 => Some(EngineMode::Off),
            2 => Some(EngineMode::Idle),
            3 => Some(EngineMode::On),
            _ => None,
        }
    }

    /// Modes in which the engine delivers no shaft power.
    pub fn is_unloaded(self) -> bool {
        !matches!(self, EngineMode::On)
    }
}

impl fmt::Display for EngineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EngineMode::Off => "off",
            EngineMode::Idle => "idle",
            EngineMode::On => "on",
        };
        f.write_str(s)
    }
}

/// Control applied over one timestep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub mode: EngineMode,
    /// Battery electrical power, W (positive = discharge).
    pub p_bat: f64,
    /// Heat drawn from the coolant into the cabin, W.
    pub q_heat: f64,
}
