//! Quantization grids for states and controls.

use serde::{Deserialize, Serialize};

use super::DpError;
use crate::model::{EngineMode, VehicleParams};

/// A `min:step:max` range. The last node is the largest `min + i step`
/// not exceeding `max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub step: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, step: f64, max: f64) -> Self {
        Self { min, step, max }
    }

    pub fn single(value: f64) -> Self {
        Self::new(value, 1.0, value)
    }

    pub fn count(&self) -> usize {
        ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count())
            .map(|i| self.min + i as f64 * self.step)
            .collect()
    }

    fn check(&self, name: &str, min_nodes: usize) -> Result<(), DpError> {
        let finite = self.min.is_finite() && self.max.is_finite() && self.step.is_finite();
        if !finite || self.step <= 0.0 || self.max < self.min {
            return Err(DpError::InvalidGrid(format!(
                "{name}: need finite min <= max and step > 0, got {}:{}:{}",
                self.min, self.step, self.max
            )));
        }
        if self.count() < min_nodes {
            return Err(DpError::InvalidGrid(format!(
                "{name}: {} node(s), at least {min_nodes} required",
                self.count()
            )));
        }
        Ok(())
    }
}

/// One regularly spaced state axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub step: f64,
    pub n: usize,
}

/// Fractional position on an axis: the lower node and the weight of the
/// upper one. `w == 0` means exactly on `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loc {
    pub i: u32,
    pub w: f64,
}

impl Loc {
    pub const INVALID: Loc = Loc { i: u32::MAX, w: 0.0 };

    pub fn is_valid(&self) -> bool {
        self.i != u32::MAX
    }
}

/// Offsets closer than this (in cell units) to a node snap onto it.
const SNAP: f64 = 1e-9;

impl Axis {
    pub fn from_range(r: &Range) -> Self {
        Self {
            min: r.min,
            step: r.step,
            n: r.count(),
        }
    }

    /// A one-node axis standing for a state the formulation does not track.
    pub fn fixed(value: f64) -> Self {
        Self {
            min: value,
            step: 1.0,
            n: 1,
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        self.min + i as f64 * self.step
    }

    pub fn max(&self) -> f64 {
        self.value(self.n - 1)
    }

    /// Position of `x`, or `None` when it lies outside the axis.
    pub fn locate(&self, x: f64) -> Option<Loc> {
        if self.n == 1 {
            return Some(Loc { i: 0, w: 0.0 });
        }
        let last = (self.n - 1) as f64;
        let f = (x - self.min) / self.step;
        if !(f >= -SNAP && f <= last + SNAP) {
            return None;
        }
        let f = f.clamp(0.0, last);
        let mut i = (f.floor() as usize).min(self.n - 2);
        let mut w = f - i as f64;
        if w < SNAP {
            w = 0.0;
        } else if w > 1.0 - SNAP {
            i += 1;
            w = 0.0;
        }
        Some(Loc { i: i as u32, w })
    }

    /// `locate` with out-of-range positions clamped onto the end nodes.
    /// The flag reports whether clamping happened.
    pub fn locate_clamped(&self, x: f64) -> (Loc, bool) {
        match self.locate(x) {
            Some(l) => (l, false),
            None => {
                let i = if x < self.min { 0 } else { self.n - 1 };
                (Loc { i: i as u32, w: 0.0 }, true)
            }
        }
    }

    pub fn nearest(&self, x: f64) -> Option<usize> {
        self.locate(x).map(|l| l.i as usize + usize::from(l.w >= 0.5))
    }

    pub fn nearest_clamped(&self, x: f64) -> usize {
        if self.n == 1 {
            return 0;
        }
        let f = ((x - self.min) / self.step).round();
        f.clamp(0.0, (self.n - 1) as f64) as usize
    }

    pub fn contains(&self, x: f64) -> bool {
        self.locate(x).is_some()
    }
}

/// Per-variable quantization. Default resolutions: SOC 0.01, temperatures 1 °C, battery power 0.5 kW, heating 0.05 kW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub soc: Range,
    pub t_cl: Range,
    pub t_cab: Range,
    pub p_bat: Range,
    pub q_heat: Range,
    pub modes: Vec<EngineMode>,
}

impl GridSpec {
    pub fn from_params(params: &VehicleParams) -> Self {
        let b = &params.battery;
        let e = &params.engine;
        let c = &params.cabin;
        Self {
            soc: Range::new(b.soc_min, 0.01, b.soc_max),
            t_cl: Range::new(e.t_cl_min, 1.0, e.t_cl_max),
            t_cab: Range::new(c.t_cab_lb, 1.0, c.t_cab_ub),
            p_bat: Range::new(b.p_bat_min, 500.0, b.p_bat_max),
            q_heat: Range::new(c.q_heat_min, 50.0, c.q_heat_max),
            modes: EngineMode::ALL.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<(), DpError> {
        self.soc.check("soc", 2)?;
        self.t_cl.check("t_cl", 2)?;
        self.t_cab.check("t_cab", 2)?;
        self.p_bat.check("p_bat", 1)?;
        self.q_heat.check("q_heat", 1)?;
        if self.modes.is_empty() {
            return Err(DpError::InvalidGrid("no engine modes enabled".into()));
        }
        Ok(())
    }

    /// Applies a `variable.field=value` override, e.g. `t_cab.step=2`.
    /// `modes` takes a comma list of `off`, `idle`, `on` or codes 1 to 3.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), DpError> {
        let bad = |why: &str| DpError::InvalidGrid(format!("override {spec:?}: {why}"));
        let (key, value) = spec.split_once('=').ok_or_else(|| bad("expected KEY=VALUE"))?;
        let key = key.trim();
        let value = value.trim();
        if key == "modes" || key == "e_mode" {
            let mut modes = Vec::new();
            for tok in value.split(',') {
                let m = match tok.trim() {
                    "off" | "1" => EngineMode::Off,
                    "idle" | "2" => EngineMode::Idle,
                    "on" | "3" => EngineMode::On,
                    other => return Err(bad(&format!("unknown mode {other:?}"))),
                };
                if !modes.contains(&m) {
                    modes.push(m);
                }
            }
            modes.sort();
            self.modes = modes;
            return Ok(());
        }
        let (var, field) = key.split_once('.').ok_or_else(|| bad("expected variable.field"))?;
        let x: f64 = value.parse().map_err(|_| bad("value is not a number"))?;
        let range = match var {
            "soc" => &mut self.soc,
            "t_cl" => &mut self.t_cl,
            "t_cab" => &mut self.t_cab,
            "p_bat" => &mut self.p_bat,
            "q_heat" => &mut self.q_heat,
            _ => return Err(bad("unknown variable")),
        };
        match field {
            "min" => range.min = x,
            "step" => range.step = x,
            "max" => range.max = x,
            _ => return Err(bad("field must be min, step or max")),
        }
        Ok(())
    }
}
