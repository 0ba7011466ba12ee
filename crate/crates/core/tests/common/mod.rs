//! Shared fixtures: an exhaustive enumerator over control sequences on
//! grid-snapped dynamics and a random toy-instance generator.

#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::Rng;

use iptm::cycle::DriveCycle;
use iptm::dp::{
    DpProblem, Formulation, GridSpec, Range, TerminalSpec, ValueInterpolation,
};
use iptm::model::{self, ControlInput, EngineMode, PowertrainState, VehicleParams};

/// Index of the node nearest `x` on `min:step:(n-1)` or `None` if `x` lies
/// outside the axis by more than a rounding error.
fn snap(x: f64, min: f64, step: f64, n: usize) -> Option<usize> {
    if n == 1 {
        return Some(0);
    }
    let f = (x - min) / step;
    let last = (n - 1) as f64;
    if f < -1e-9 || f > last + 1e-9 {
        return None;
    }
    Some((f.round() as usize).min(n - 1))
}

/// Grid-snapped state: node indices plus coordinates.
#[derive(Clone, Copy, Debug)]
struct Node {
    x: [f64; 3],
}

struct Axes {
    min: [f64; 3],
    step: [f64; 3],
    n: [usize; 3],
}

impl Axes {
    fn new(pr: &DpProblem) -> Self {
        let g = &pr.grid;
        let f = pr.formulation;
        let count = |r: &Range| ((r.max - r.min) / r.step + 1e-9).floor() as usize + 1;
        let (tcl_min, tcl_n) = if f.tracks_coolant() {
            (g.t_cl.min, count(&g.t_cl))
        } else {
            (pr.params.engine.t_cl_nominal, 1)
        };
        let (cab_min, cab_n) = if f.tracks_cabin() {
            (g.t_cab.min, count(&g.t_cab))
        } else {
            (pr.initial_state.t_cab, 1)
        };
        Axes {
            min: [g.soc.min, tcl_min, cab_min],
            step: [g.soc.step, g.t_cl.step, g.t_cab.step],
            n: [count(&g.soc), tcl_n, cab_n],
        }
    }

    fn snap(&self, x: [f64; 3]) -> Option<Node> {
        let mut out = [0.0; 3];
        for d in 0..3 {
            let i = snap(x[d], self.min[d], self.step[d], self.n[d])?;
            out[d] = if self.n[d] == 1 {
                self.min[d]
            } else {
                self.min[d] + i as f64 * self.step[d]
            };
        }
        Some(Node { x: out })
    }
}

/// Every control the problem admits at step `k`, listed without reference
/// to the solver's candidate tables.
pub fn all_controls(pr: &DpProblem, k: usize) -> Vec<ControlInput> {
    let p = &pr.params;
    let p_trac = pr.cycle.p_trac[k];
    let q_values = if pr.formulation.tracks_cabin() {
        let r = pr.grid.q_heat;
        let n = ((r.max - r.min) / r.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| r.min + i as f64 * r.step).collect()
    } else {
        vec![pr.q_heat_fixed]
    };
    let r = pr.grid.p_bat;
    let n = ((r.max - r.min) / r.step + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..n).map(|i| r.min + i as f64 * r.step).collect();
    let mech = |p_bat: f64| {
        let p_mg = p_bat - p.battery.p_aux;
        if p_mg >= 0.0 {
            p.eta_mg * p_mg
        } else {
            p_mg / p.eta_mg
        }
    };
    let balanced = p.battery.p_aux
        + if p_trac >= 0.0 {
            p_trac / p.eta_mg
        } else {
            p_trac * p.eta_mg
        };
    let mut out = Vec::new();
    for &q_heat in &q_values {
        for mode in [EngineMode::Off, EngineMode::Idle, EngineMode::On] {
            if !pr.grid.modes.contains(&mode) {
                continue;
            }
            let mut p_bats = Vec::new();
            if mode == EngineMode::On {
                p_bats.extend(grid.iter().copied().filter(|b| {
                    let p_e = p_trac - mech(*b);
                    p_e > 0.0 && p_e <= p.engine.p_e_max
                }));
            } else {
                if balanced >= p.battery.p_bat_min && balanced <= p.battery.p_bat_max {
                    p_bats.push(balanced);
                }
                if p_trac < 0.0 {
                    // partial regeneration, friction takes the rest
                    p_bats.extend(grid.iter().copied().filter(|b| {
                        *b > balanced && mech(*b) <= 1.0 && mech(*b) >= p_trac - 1.0
                    }));
                }
            }
            for p_bat in p_bats {
                out.push(ControlInput { mode, p_bat, q_heat });
            }
        }
    }
    out
}

fn stage(pr: &DpProblem, x: &Node, u: &ControlInput, k: usize) -> Option<(PowertrainState, f64)> {
    let f = pr.formulation;
    let p = &pr.params;
    let state = PowertrainState {
        soc: x.x[0],
        t_cl: x.x[1],
        t_cab: x.x[2],
    };
    let out = model::step(&state, u, pr.cycle.p_trac[k], p).ok()?;
    let mut next = out.next;
    let mut cost = out.fuel_g;
    if !f.tracks_coolant() {
        next.t_cl = x.x[1];
        cost = match u.mode {
            EngineMode::Off => 0.0,
            EngineMode::Idle => p.engine.w_idle * p.t_s,
            EngineMode::On => p.maps.w_f_line.eval(out.flows.p_e) * p.t_s,
        };
    }
    if !f.tracks_cabin() {
        next.t_cab = x.x[2];
    }
    Some((next, cost))
}

fn terminal(pr: &DpProblem, x: &Node) -> f64 {
    let t = &pr.terminal;
    let f = pr.formulation;
    let mut c = t.w_soc * (t.soc_target - x.x[0]).max(0.0);
    if f.tracks_coolant() {
        c += t.w_t_cl * (t.t_cl_target - x.x[1]).max(0.0);
    }
    if f.tracks_cabin() {
        c += t.w_t_cab * (t.t_cab_target - x.x[2]).max(0.0);
    }
    c
}

/// Minimum total cost over all control sequences from the grid node
/// nearest the initial state, successors snapped to their nearest node.
/// Returns the value and the number of complete feasible sequences.
pub fn brute_force(pr: &DpProblem) -> (f64, u64) {
    let axes = Axes::new(pr);
    let x0 = &pr.initial_state;
    let Some(start) = axes.snap([x0.soc, x0.t_cl, x0.t_cab]) else {
        return (f64::INFINITY, 0);
    };
    let controls: Vec<Vec<ControlInput>> = (0..pr.horizon()).map(|k| all_controls(pr, k)).collect();
    let mut best = f64::INFINITY;
    let mut count = 0u64;
    fn rec(
        pr: &DpProblem,
        axes: &Axes,
        controls: &[Vec<ControlInput>],
        k: usize,
        x: Node,
        acc: f64,
        best: &mut f64,
        count: &mut u64,
    ) {
        if k == controls.len() {
            *count += 1;
            let total = acc + terminal(pr, &x);
            if total < *best {
                *best = total;
            }
            return;
        }
        for u in &controls[k] {
            if let Some((next, cost)) = stage(pr, &x, u, k) {
                if let Some(n) = axes.snap([next.soc, next.t_cl, next.t_cab]) {
                    rec(pr, axes, controls, k + 1, n, acc + cost, best, count);
                }
            }
        }
    }
    rec(pr, &axes, &controls, 0, start, 0.0, &mut best, &mut count);
    (best, count)
}

/// Random toy problem on grid-snapped dynamics: horizon at most 6, at most
/// 5 nodes per state axis and at most `max_controls` controls per step.
pub fn random_toy(rng: &mut StdRng, max_controls: usize) -> DpProblem {
    loop {
        let formulation = Formulation::ALL[rng.random_range(0..3)];
        let mut params = VehicleParams::default();
        params.t_s = rng.random_range(20.0..120.0);
        let horizon = rng.random_range(2..=6);
        let p_trac: Vec<f64> = (0..=horizon)
            .map(|_| {
                if rng.random_bool(0.2) {
                    rng.random_range(-8_000.0..0.0)
                } else {
                    rng.random_range(0.0..25_000.0)
                }
            })
            .collect();
        let cycle = DriveCycle::new(
            (0..=horizon).map(|k| k as f64).collect(),
            vec![5.0; horizon + 1],
            p_trac,
        )
        .unwrap();
        let n_soc = rng.random_range(2..=5);
        let soc_step = rng.random_range(0.01..0.06);
        let soc_min = rng.random_range(0.4..0.5);
        let n_tcl = rng.random_range(2..=5);
        let tcl_step = rng.random_range(2.0..8.0);
        let tcl_min = rng.random_range(40.0..70.0);
        let n_cab = rng.random_range(2..=5);
        let cab_step = rng.random_range(0.5..3.0);
        let cab_min = rng.random_range(12.0..16.0);
        let n_pbat = rng.random_range(1..=4);
        let pbat_step = rng.random_range(2_000.0..8_000.0);
        let pbat_min = rng.random_range(-20_000.0..0.0);
        let pbat_max = (pbat_min + (n_pbat - 1) as f64 * pbat_step).min(20_000.0);
        let mut modes: Vec<EngineMode> = EngineMode::ALL
            .iter()
            .copied()
            .filter(|_| rng.random_bool(0.7))
            .collect();
        if modes.is_empty() {
            modes.push(EngineMode::On);
        }
        let nq = if formulation.tracks_cabin() {
            rng.random_range(1..=2)
        } else {
            1
        };
        let mut grid = GridSpec::from_params(&params);
        grid.soc = Range::new(soc_min, soc_step, soc_min + (n_soc - 1) as f64 * soc_step);
        grid.t_cl = Range::new(tcl_min, tcl_step, tcl_min + (n_tcl - 1) as f64 * tcl_step);
        grid.t_cab = Range::new(cab_min, cab_step, cab_min + (n_cab - 1) as f64 * cab_step);
        grid.p_bat = Range::new(pbat_min, pbat_step, pbat_max.max(pbat_min));
        grid.q_heat = Range::new(1200.0, 600.0, 1200.0 + (nq - 1) as f64 * 600.0);
        grid.modes = modes;
        let snap_node = |min: f64, step: f64, n: usize, rng: &mut StdRng| {
            min + rng.random_range(0..n) as f64 * step
        };
        let initial = PowertrainState::new(
            snap_node(soc_min, soc_step, n_soc, rng),
            snap_node(tcl_min, tcl_step, n_tcl, rng),
            snap_node(cab_min, cab_step, n_cab, rng),
        )
        .unwrap();
        let terminal = TerminalSpec {
            soc_target: soc_min + rng.random_range(0.0..1.0) * (n_soc - 1) as f64 * soc_step,
            t_cl_target: tcl_min + rng.random_range(0.0..1.0) * (n_tcl - 1) as f64 * tcl_step,
            t_cab_target: cab_min + rng.random_range(0.0..1.0) * (n_cab - 1) as f64 * cab_step,
            w_soc: rng.random_range(0.0..600.0),
            w_t_cl: rng.random_range(0.0..3.0),
            w_t_cab: rng.random_range(0.0..3.0),
        };
        let pr = DpProblem {
            formulation,
            grid,
            cycle,
            params,
            q_heat_fixed: 1500.0,
            terminal,
            initial_state: initial,
            interpolation: ValueInterpolation::Nearest,
        };
        if pr.validate().is_err() {
            continue;
        }
        let widest = (0..horizon).map(|k| all_controls(&pr, k).len()).max().unwrap_or(0);
        if widest == 0 || widest > max_controls {
            continue;
        }
        return pr;
    }
}
