//! Closed-loop simulation on the full thermal model, fuel accounting and
//! strategy comparison.

use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

use crate::cycle::DriveCycle;
use crate::model::{self, ControlInput, EngineMode, HeatFlows, ModelError, PowertrainState, VehicleParams};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("controller failed at step {k}: {reason}")]
    ControllerFailure { k: usize, reason: String },
    #[error("control rejected by the model at step {k}: {source}")]
    Model { k: usize, source: ModelError },
    #[error("traces do not share a cycle: {0}")]
    CycleMismatch(String),
    #[error("need at least two traces to compare")]
    TooFewTraces,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Anything that picks a control from the current state.
pub trait Controller {
    fn decide(
        &mut self,
        k: usize,
        state: &PowertrainState,
        p_trac: f64,
        params: &VehicleParams,
    ) -> Result<ControlInput, String>;
}

/// State bounds checked along a trace, with a slack of one grid step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub soc: [f64; 2],
    pub t_cl: [f64; 2],
    pub t_cab: [f64; 2],
    /// Allowed excursion per state (SOC, T_cl, T_cab).
    pub slack: [f64; 3],
}

impl Bounds {
    pub fn from_params(params: &VehicleParams) -> Self {
        let b = &params.battery;
        let e = &params.engine;
        let c = &params.cabin;
        Self {
            soc: [b.soc_min, b.soc_max],
            t_cl: [e.t_cl_min, e.t_cl_max],
            t_cab: [c.t_cab_lb, c.t_cab_ub],
            slack: [0.01, 1.0, 1.0],
        }
    }

    /// Number of states outside their bound by more than the slack.
    pub fn violations(&self, s: &PowertrainState) -> usize {
        let out = |x: f64, r: [f64; 2], tol: f64| usize::from(x < r[0] - tol || x > r[1] + tol);
        out(s.soc, self.soc, self.slack[0])
            + out(s.t_cl, self.t_cl, self.slack[1])
            + out(s.t_cab, self.t_cab, self.slack[2])
    }
}

/// A simulated trajectory. State arrays hold N+1 samples, control and flow
/// arrays hold the N applied steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub name: String,
    pub t_s: f64,
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub p_trac: Vec<f64>,
    pub soc: Vec<f64>,
    pub t_cl: Vec<f64>,
    pub t_cab: Vec<f64>,
    pub controls: Vec<ControlInput>,
    pub p_e: Vec<f64>,
    pub w_f: Vec<f64>,
    pub fuel_g: Vec<f64>,
    pub flows: Vec<HeatFlows>,
    pub cumulative_fuel_g: Vec<f64>,
    pub fuel_total_g: f64,
    pub violations: usize,
}

impl SimTrace {
    pub fn steps(&self) -> usize {
        self.controls.len()
    }

    pub fn state(&self, k: usize) -> PowertrainState {
        PowertrainState {
            soc: self.soc[k],
            t_cl: self.t_cl[k],
            t_cab: self.t_cab[k],
        }
    }

    pub fn final_state(&self) -> PowertrainState {
        self.state(self.soc.len() - 1)
    }

    pub fn mean_t_cab(&self) -> f64 {
        mean(&self.t_cab)
    }

    /// Seconds spent with the cabin below `lb`.
    pub fn time_below(&self, lb: f64) -> f64 {
        self.t_cab.iter().filter(|t| **t < lb).count() as f64 * self.t_s
    }

    /// Index range of the `part`-th of `parts` equal slices of the N+1 samples.
    pub fn slice(&self, part: usize, parts: usize) -> std::ops::Range<usize> {
        let n = self.soc.len();
        (part * n / parts)..((part + 1) * n / parts)
    }

    /// Writes one row per sample; the final row leaves the control columns empty.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), SimError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "t",
            "v",
            "p_trac",
            "mode",
            "p_bat",
            "q_heat",
            "soc",
            "t_cl",
            "t_cab",
            "w_f",
            "cumulative_fuel_g",
        ])?;
        for k in 0..self.soc.len() {
            let num = |x: f64| x.to_string();
            let (mode, p_bat, q_heat, w_f) = match self.controls.get(k) {
                Some(u) => (
                    u.mode.index().to_string(),
                    num(u.p_bat),
                    num(u.q_heat),
                    num(self.w_f[k]),
                ),
                None => Default::default(),
            };
            out.write_record([
                num(self.t[k]),
                num(self.v[k]),
                num(self.p_trac[k]),
                mode,
                p_bat,
                q_heat,
                num(self.soc[k]),
                num(self.t_cl[k]),
                num(self.t_cab[k]),
                w_f,
                num(self.cumulative_fuel_g[k]),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Rolls `controller` forward over `cycle` from `initial` on the full model.
pub fn simulate<C: Controller + ?Sized>(
    name: &str,
    controller: &mut C,
    cycle: &DriveCycle,
    params: &VehicleParams,
    initial: PowertrainState,
    bounds: &Bounds,
) -> Result<SimTrace, SimError> {
    let n = cycle.horizon();
    let mut tr = SimTrace {
        name: name.to_string(),
        t_s: params.t_s,
        t: cycle.t.clone(),
        v: cycle.v.clone(),
        p_trac: cycle.p_trac.clone(),
        soc: Vec::with_capacity(n + 1),
        t_cl: Vec::with_capacity(n + 1),
        t_cab: Vec::with_capacity(n + 1),
        controls: Vec::with_capacity(n),
        p_e: Vec::with_capacity(n),
        w_f: Vec::with_capacity(n),
        fuel_g: Vec::with_capacity(n),
        flows: Vec::with_capacity(n),
        cumulative_fuel_g: Vec::with_capacity(n + 1),
        fuel_total_g: 0.0,
        violations: bounds.violations(&initial),
    };
    let mut x = initial;
    let mut total = 0.0;
    let push_state = |tr: &mut SimTrace, x: &PowertrainState, total: f64| {
        tr.soc.push(x.soc);
        tr.t_cl.push(x.t_cl);
        tr.t_cab.push(x.t_cab);
        tr.cumulative_fuel_g.push(total);
    };
    push_state(&mut tr, &x, total);
    for k in 0..n {
        let p_trac = cycle.p_trac[k];
        let u = controller
            .decide(k, &x, p_trac, params)
            .map_err(|reason| SimError::ControllerFailure { k, reason })?;
        let out = model::step(&x, &u, p_trac, params).map_err(|source| SimError::Model { k, source })?;
        total += out.fuel_g;
        tr.controls.push(u);
        tr.p_e.push(out.flows.p_e);
        tr.w_f.push(out.w_f);
        tr.fuel_g.push(out.fuel_g);
        tr.flows.push(out.flows);
        x = out.next;
        tr.violations += bounds.violations(&x);
        push_state(&mut tr, &x, total);
    }
    tr.fuel_total_g = total;
    Ok(tr)
}

/// Replays a recorded control sequence.
#[derive(Debug, Clone)]
pub struct Replay {
    pub controls: Vec<ControlInput>,
}

impl Controller for Replay {
    fn decide(&mut self, k: usize, _: &PowertrainState, _: f64, _: &VehicleParams) -> Result<ControlInput, String> {
        self.controls
            .get(k)
            .copied()
            .ok_or_else(|| format!("no recorded control for step {k}"))
    }
}

/// Holds one engine mode with the battery covering the rest (test fixture
/// and reference strategy).
#[derive(Debug, Clone, Copy)]
pub struct ConstantMode {
    pub mode: EngineMode,
    pub q_heat: f64,
}

impl Controller for ConstantMode {
    fn decide(&mut self, _: usize, _: &PowertrainState, p_trac: f64, params: &VehicleParams) -> Result<ControlInput, String> {
        Ok(ControlInput {
            mode: self.mode,
            p_bat: model::unloaded_battery_power(p_trac, params),
            q_heat: self.q_heat,
        })
    }
}

/// Final SOC difference above which fuel totals are not compared.
pub const SOC_COMPARABLE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyTotals {
    pub name: String,
    pub fuel_g: f64,
    pub final_soc: f64,
    pub final_t_cl: f64,
    pub mean_t_cab: f64,
    pub time_below_cab_lb_s: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub strategies: Vec<StrategyTotals>,
    /// `savings_pct[a][b]`: fuel saved by `a` relative to `b`, percent;
    /// `None` when the final SOCs differ by more than [`SOC_COMPARABLE`].
    pub savings_pct: Vec<Vec<Option<f64>>>,
    /// Pairs flagged as not SOC-comparable.
    pub non_comparable: Vec<[String; 2]>,
}

impl Comparison {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.strategies.iter().position(|s| s.name == name)
    }

    pub fn savings(&self, a: &str, b: &str) -> Option<f64> {
        self.savings_pct[self.index(a)?][self.index(b)?]
    }
}

pub fn totals(trace: &SimTrace, t_cab_lb: f64) -> StrategyTotals {
    let last = trace.final_state();
    StrategyTotals {
        name: trace.name.clone(),
        fuel_g: trace.fuel_total_g,
        final_soc: last.soc,
        final_t_cl: last.t_cl,
        mean_t_cab: trace.mean_t_cab(),
        time_below_cab_lb_s: trace.time_below(t_cab_lb),
        violations: trace.violations,
    }
}

pub fn compare(traces: &[&SimTrace], t_cab_lb: f64) -> Result<Comparison, SimError> {
    if traces.len() < 2 {
        return Err(SimError::TooFewTraces);
    }
    let first = traces[0];
    for tr in &traces[1..] {
        if tr.t != first.t || tr.p_trac != first.p_trac {
            return Err(SimError::CycleMismatch(format!(
                "{} and {} differ in time base or traction demand",
                first.name, tr.name
            )));
        }
    }
    let strategies: Vec<StrategyTotals> = traces.iter().map(|t| totals(t, t_cab_lb)).collect();
    let mut non_comparable = Vec::new();
    let savings_pct = strategies
        .iter()
        .map(|a| {
            strategies
                .iter()
                .map(|b| {
                    if (a.final_soc - b.final_soc).abs() > SOC_COMPARABLE {
                        None
                    } else {
                        Some((b.fuel_g - a.fuel_g) / b.fuel_g * 100.0)
                    }
                })
                .collect()
        })
        .collect();
    for (i, a) in strategies.iter().enumerate() {
        for b in &strategies[i + 1..] {
            if (a.final_soc - b.final_soc).abs() > SOC_COMPARABLE {
                non_comparable.push([a.name.clone(), b.name.clone()]);
            }
        }
    }
    Ok(Comparison {
        strategies,
        savings_pct,
        non_comparable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycle;
    use crate::rules::{RuleController, RuleParams};

    fn flat(n: usize, p: f64) -> DriveCycle {
        DriveCycle::new(
            (0..=n).map(|k| k as f64).collect(),
            vec![0.0; n + 1],
            vec![p; n + 1],
        )
        .unwrap()
    }

    fn start() -> PowertrainState {
        PowertrainState::new(0.6, 70.0, 14.0).unwrap()
    }

    fn run<C: Controller>(c: &mut C, cyc: &DriveCycle) -> SimTrace {
        let p = VehicleParams::default();
        simulate("x", c, cyc, &p, start(), &Bounds::from_params(&p)).unwrap()
    }

    #[test]
    fn all_off_on_zero_power_burns_nothing() {
        let mut c = ConstantMode {
            mode: EngineMode::Off,
            q_heat: 0.0,
        };
        let tr = run(&mut c, &flat(50, 0.0));
        assert_eq!(tr.fuel_total_g, 0.0);
        assert_eq!(tr.soc.len(), 51);
        assert_eq!(tr.controls.len(), 50);
    }

    #[test]
    fn idle_for_100_seconds() {
        let mut c = ConstantMode {
            mode: EngineMode::Idle,
            q_heat: 1500.0,
        };
        let tr = run(&mut c, &flat(100, 0.0));
        let w = VehicleParams::default().engine.w_idle;
        assert!((tr.fuel_total_g - 100.0 * w).abs() <= 1e-12 * 100.0 * w);
    }

    #[test]
    fn cumulative_fuel_is_running_sum() {
        let mut c = RuleController::new(RuleParams::default());
        let tr = run(&mut c, &cycle::bundled());
        let sum: f64 = tr.fuel_g.iter().sum();
        assert!((tr.fuel_total_g - sum).abs() <= 1e-9 * sum);
        assert_eq!(*tr.cumulative_fuel_g.last().unwrap(), tr.fuel_total_g);
    }

    #[test]
    fn replay_is_bit_identical() {
        let mut c = RuleController::new(RuleParams::default());
        let cyc = cycle::bundled();
        let a = run(&mut c, &cyc);
        let mut r = Replay {
            controls: a.controls.clone(),
        };
        let b = run(&mut r, &cyc);
        assert_eq!(a, b);
    }

    #[test]
    fn infeasible_control_is_a_controller_failure() {
        let mut c = Replay { controls: vec![] };
        let p = VehicleParams::default();
        let e = simulate("x", &mut c, &flat(3, 0.0), &p, start(), &Bounds::from_params(&p));
        assert!(matches!(e, Err(SimError::ControllerFailure { k: 0, .. })));
        let mut c = Replay {
            controls: vec![ControlInput {
                mode: EngineMode::Off,
                p_bat: 0.0,
                q_heat: 0.0,
            }; 3],
        };
        let e = simulate("x", &mut c, &flat(3, 5000.0), &p, start(), &Bounds::from_params(&p));
        assert!(matches!(e, Err(SimError::Model { k: 0, .. })));
    }

    #[test]
    fn comparison_rules() {
        let mut c = ConstantMode {
            mode: EngineMode::Idle,
            q_heat: 1500.0,
        };
        let cyc = flat(20, 0.0);
        let a = run(&mut c, &cyc);
        let cmp = compare(&[&a, &a], 12.0).unwrap();
        assert_eq!(cmp.savings_pct[0][1], Some(0.0));
        assert!(cmp.non_comparable.is_empty());

        let mut b = a.clone();
        b.name = "b".into();
        *b.soc.last_mut().unwrap() += 0.05;
        let cmp = compare(&[&a, &b], 12.0).unwrap();
        assert_eq!(cmp.savings_pct[0][1], None);
        assert_eq!(cmp.non_comparable.len(), 1);

        let other = run(&mut c, &flat(21, 0.0));
        assert!(matches!(compare(&[&a, &other], 12.0), Err(SimError::CycleMismatch(_))));
        assert!(matches!(compare(&[&a], 12.0), Err(SimError::TooFewTraces)));
    }

    #[test]
    fn savings_sign() {
        let mut c = ConstantMode {
            mode: EngineMode::Idle,
            q_heat: 1500.0,
        };
        let cyc = flat(20, 0.0);
        let a = run(&mut c, &cyc);
        let mut b = a.clone();
        b.name = "b".into();
        b.fuel_total_g = 2.0 * a.fuel_total_g;
        let cmp = compare(&[&a, &b], 12.0).unwrap();
        assert!((cmp.savings("x", "b").unwrap() - 50.0).abs() < 1e-12);
        assert!((cmp.savings("b", "x").unwrap() + 100.0).abs() < 1e-12);
    }

    #[test]
    fn csv_has_n_plus_one_rows() {
        let mut c = ConstantMode {
            mode: EngineMode::Off,
            q_heat: 1500.0,
        };
        let tr = run(&mut c, &flat(5, 0.0));
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 7);
        assert!(lines[0].starts_with("t,v,p_trac,mode,p_bat,q_heat,soc,t_cl,t_cab,w_f,cumulative_fuel_g"));
        assert!(lines[6].contains(",,,"));
    }
}
