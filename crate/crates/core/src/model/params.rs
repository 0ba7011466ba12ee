//! Vehicle calibration: battery, engine thermal loop, fuel and radiator maps,
//! cabin, and the shared scalars (motor efficiency, ambient, timestep).
//!
//! Every struct deserializes with per-field defaults, so a configuration
//! file only needs to list the keys it overrides. The default maps are
//! surrogates with the right signatures and monotonicity for a Prius-class
//! 1.8 L Atkinson engine and NiMH pack; they are not production calibrations.

use serde::{Deserialize, Serialize};

use super::table::Table1d;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryParams {
    /// Charge capacity, C.
    pub c_bat: f64,
    /// Open-circuit voltage vs SOC, V.
    pub u_oc: Table1d,
    /// Internal resistance vs SOC, ohm.
    pub r_int: Table1d,
    /// Constant auxiliary electrical load, W.
    pub p_aux: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    /// Battery power bounds, W (positive = discharge).
    pub p_bat_min: f64,
    pub p_bat_max: f64,
}

impl Default for BatteryParams {
    fn default() -> Self {
        let soc = vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
        Self {
            // 6.5 Ah
            c_bat: 6.5 * 3600.0,
            u_oc: Table1d {
                x: soc.clone(),
                y: vec![190.0, 199.0, 204.0, 208.0, 213.0, 222.0],
            },
            r_int: Table1d {
                x: soc,
                y: vec![0.48, 0.40, 0.36, 0.34, 0.35, 0.40],
            },
            p_aux: 300.0,
            soc_min: 0.4,
            soc_max: 0.8,
            p_bat_min: -20_000.0,
            p_bat_max: 20_000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineThermalParams {
    /// Lumped engine + coolant thermal capacitance, J/°C.
    pub m_eng_c_eng: f64,
    /// Fuel lower heating value, J/g.
    pub lhv: f64,
    /// Fraction of combustion waste heat leaving with the exhaust.
    pub gamma_exh: f64,
    /// Lumped engine-to-compartment convective conductance, W/°C.
    pub a_eng_alpha_eng: f64,
    /// Compartment temperature blend: T_com = t_amb + beta_com (t_cl - t_amb).
    pub beta_com: f64,
    /// Idle fuel rate, g/s.
    pub w_idle: f64,
    pub t_cl_min: f64,
    pub t_cl_max: f64,
    /// Radiator activation threshold, °C.
    pub t_rad_on: f64,
    /// Engine power ceiling, W.
    pub p_e_max: f64,
    /// Warm temperature at which the cold correction equals one, °C.
    pub t_cl_nominal: f64,
}

impl Default for EngineThermalParams {
    fn default() -> Self {
        Self {
            m_eng_c_eng: 60_000.0,
            lhv: 42_600.0,
            gamma_exh: 0.65,
            a_eng_alpha_eng: 20.0,
            beta_com: 0.3,
            w_idle: 0.2,
            t_cl_min: 40.0,
            t_cl_max: 100.0,
            t_rad_on: 95.0,
            p_e_max: 73_000.0,
            t_cl_nominal: 90.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuelMaps {
    /// Nominal fuel rate along the optimal operating line, g/s vs engine power W.
    pub w_f_line: Table1d,
    /// Cold correction factor vs coolant temperature °C.
    pub f_cl: Table1d,
    /// Radiator heat rejection vs coolant temperature, W.
    pub q_rad: Table1d,
}

impl Default for FuelMaps {
    fn default() -> Self {
        // Willans line: 0.22 g/s intercept, 6.0e-5 g/J slope (about 39 %
        // marginal efficiency at 42.6 kJ/g).
        let intercept = 0.22;
        let slope = 6.0e-5;
        Self {
            w_f_line: Table1d {
                x: vec![0.0, 73_000.0],
                y: vec![intercept, intercept + slope * 73_000.0],
            },
            f_cl: Table1d {
                x: vec![-20.0, 0.0, 20.0, 40.0, 60.0, 90.0],
                y: vec![1.35, 1.28, 1.20, 1.12, 1.06, 1.0],
            },
            q_rad: Table1d {
                x: vec![95.0, 100.0, 110.0],
                y: vec![0.0, 10_000.0, 30_000.0],
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CabinParams {
    /// Cabin air + interior thermal capacitance, J/°C.
    pub m_cab_c_cab: f64,
    /// Cabin shell conductance, W/°C.
    pub ua_cab: f64,
    /// Solar gain, W.
    pub q_sun: f64,
    pub t_cab_lb: f64,
    pub t_cab_ub: f64,
    pub q_heat_min: f64,
    pub q_heat_max: f64,
}

impl Default for CabinParams {
    fn default() -> Self {
        Self {
            m_cab_c_cab: 60_000.0,
            ua_cab: 50.0,
            q_sun: 0.0,
            t_cab_lb: 12.0,
            t_cab_ub: 22.0,
            q_heat_min: 1200.0,
            q_heat_max: 1800.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    pub battery: BatteryParams,
    pub engine: EngineThermalParams,
    pub maps: FuelMaps,
    pub cabin: CabinParams,
    /// Combined motor/inverter efficiency.
    pub eta_mg: f64,
    /// Ambient temperature, °C.
    pub t_amb: f64,
    /// Timestep, s.
    pub t_s: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            battery: BatteryParams::default(),
            engine: EngineThermalParams::default(),
            maps: FuelMaps::default(),
            cabin: CabinParams::default(),
            eta_mg: 0.9,
            t_amb: -10.0,
            t_s: 1.0,
        }
    }
}

impl VehicleParams {
    /// Every invariant violation found, as human-readable lines. Empty means valid.
    pub fn issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut req = |ok: bool, msg: &str| {
            if !ok {
                out.push(msg.to_string());
            }
        };

        let b = &self.battery;
        req(b.c_bat > 0.0, "battery.c_bat must be > 0");
        req(b.p_aux.is_finite() && b.p_aux >= 0.0, "battery.p_aux must be >= 0");
        req(
            0.0 <= b.soc_min && b.soc_min < b.soc_max && b.soc_max <= 1.0,
            "battery.soc_min < soc_max within [0, 1] required",
        );
        req(b.p_bat_min < b.p_bat_max, "battery.p_bat_min < p_bat_max required");
        for (name, t) in [("battery.u_oc", &b.u_oc), ("battery.r_int", &b.r_int)] {
            match t.check() {
                Err(e) => req(false, &format!("{name}: {e}")),
                Ok(()) => {
                    req(
                        t.x_min() <= b.soc_min && t.x_max() >= b.soc_max,
                        &format!("{name} must cover [soc_min, soc_max]"),
                    );
                    req(t.min_value() > 0.0, &format!("{name} must be > 0"));
                }
            }
        }

        let e = &self.engine;
        req(e.m_eng_c_eng > 0.0, "engine.m_eng_c_eng must be > 0");
        req(e.lhv > 0.0, "engine.lhv must be > 0");
        req(
            e.gamma_exh > 0.0 && e.gamma_exh < 1.0,
            "engine.gamma_exh must lie in (0, 1)",
        );
        req(e.a_eng_alpha_eng > 0.0, "engine.a_eng_alpha_eng must be > 0");
        req(
            (0.0..=1.0).contains(&e.beta_com),
            "engine.beta_com must lie in [0, 1]",
        );
        req(e.w_idle > 0.0, "engine.w_idle must be > 0");
        req(e.t_cl_min < e.t_cl_max, "engine.t_cl_min < t_cl_max required");
        req(e.t_rad_on < e.t_cl_max, "engine.t_rad_on < t_cl_max required");
        req(e.p_e_max > 0.0, "engine.p_e_max must be > 0");

        let m = &self.maps;
        match m.w_f_line.check() {
            Err(err) => req(false, &format!("maps.w_f_line: {err}")),
            Ok(()) => {
                req(
                    m.w_f_line.x.len() >= 2 && m.w_f_line.is_strictly_increasing(),
                    "maps.w_f_line must be strictly increasing in engine power",
                );
                req(
                    m.w_f_line.eval(0.0) > 0.0,
                    "maps.w_f_line must be positive as engine power tends to zero",
                );
            }
        }
        match m.f_cl.check() {
            Err(err) => req(false, &format!("maps.f_cl: {err}")),
            Ok(()) => {
                req(m.f_cl.min_value() >= 1.0, "maps.f_cl must be >= 1 everywhere");
                req(m.f_cl.is_non_increasing(), "maps.f_cl must be non-increasing");
                req(
                    (m.f_cl.eval(e.t_cl_nominal) - 1.0).abs() < 1e-12,
                    "maps.f_cl must equal 1 at engine.t_cl_nominal",
                );
            }
        }
        match m.q_rad.check() {
            Err(err) => req(false, &format!("maps.q_rad: {err}")),
            Ok(()) => {
                req(
                    m.q_rad.is_non_decreasing(),
                    "maps.q_rad must be non-decreasing",
                );
                req(
                    m.q_rad.x_min() >= e.t_rad_on && m.q_rad.y[0] == 0.0,
                    "maps.q_rad must be zero below engine.t_rad_on",
                );
            }
        }

        let c = &self.cabin;
        req(c.m_cab_c_cab > 0.0, "cabin.m_cab_c_cab must be > 0");
        req(c.ua_cab > 0.0, "cabin.ua_cab must be > 0");
        req(c.q_sun.is_finite(), "cabin.q_sun must be finite");
        req(c.t_cab_lb < c.t_cab_ub, "cabin.t_cab_lb < t_cab_ub required");
        req(
            c.q_heat_min >= 0.0 && c.q_heat_min <= c.q_heat_max,
            "cabin.q_heat_min <= q_heat_max (both >= 0) required",
        );

        req(
            self.eta_mg > 0.0 && self.eta_mg <= 1.0,
            "eta_mg must lie in (0, 1]",
        );
        req(self.t_amb.is_finite(), "t_amb must be finite");
        req(self.t_s > 0.0 && self.t_s.is_finite(), "t_s must be > 0");
        out
    }

    pub fn validate(&self) -> Result<(), super::ModelError> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(super::ModelError::InvalidParams(issues.join("; ")))
        }
    }
}
