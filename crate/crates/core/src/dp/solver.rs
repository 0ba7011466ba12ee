//! Backward induction over the quantized state grid.
//!
//! The transition is separable: the SOC successor depends only on the
//! battery power, the coolant successor and stage fuel on the coolant node,
//! mode, engine power and heating, and the cabin successor on the cabin node
//! and heating. Each timestep tabulates those pieces once, reduces the next
//! layer along the cabin axis per heating level, and then sweeps the
//! remaining bilinear lookups row by row. The arithmetic matches
//! [`stage_transition`] followed by [`interpolate_value`] exactly.
//!
//! [`interpolate_value`]: super::interp::interpolate_value

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use super::grid::{Axis, Loc};
use super::interp::{lerp, StateGrid};
use super::problem::{DpProblem, Formulation, ValueInterpolation};
use super::DpError;
use crate::model::{
    self, cabin_derivative, coolant_balance, nominal_fuel_rate, power_split, soc_derivative,
    unloaded_battery_power, ControlInput, EngineMode, ModelError, PowertrainState,
};

/// Policy entry for a node with no feasible control.
pub const NO_CONTROL: u16 = u16::MAX;

/// A feasible (mode, battery power) pair at one timestep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub mode: EngineMode,
    pub p_bat: f64,
    pub p_e: f64,
}

/// Feasible power splits at step `k`, in tie-break order: Off, Idle, then
/// On by increasing battery power. Off and Idle take the battery power that
/// leaves the engine unloaded; while braking they also take every grid
/// battery power that recovers less, the friction brakes absorbing the rest.
/// On takes every grid battery power whose engine power lies in
/// `(0, p_e_max]`.
pub fn candidates(problem: &DpProblem, k: usize) -> Vec<Candidate> {
    let params = &problem.params;
    let p_trac = problem.cycle.p_trac[k];
    let mut out = Vec::new();
    let unloaded = unloaded_battery_power(p_trac, params);
    let grid_p_bat = problem.grid.p_bat.values();
    for mode in [EngineMode::Off, EngineMode::Idle] {
        if !problem.grid.modes.contains(&mode) {
            continue;
        }
        if let Ok(p_e) = power_split(p_trac, mode, unloaded, params) {
            out.push(Candidate {
                mode,
                p_bat: unloaded,
                p_e,
            });
        }
        if p_trac < 0.0 {
            for &p_bat in grid_p_bat.iter().filter(|p| **p > unloaded) {
                if let Ok(p_e) = power_split(p_trac, mode, p_bat, params) {
                    out.push(Candidate { mode, p_bat, p_e });
                }
            }
        }
    }
    if problem.grid.modes.contains(&EngineMode::On) {
        for &p_bat in &grid_p_bat {
            if let Ok(p_e) = power_split(p_trac, EngineMode::On, p_bat, params) {
                out.push(Candidate {
                    mode: EngineMode::On,
                    p_bat,
                    p_e,
                });
            }
        }
    }
    out
}

/// Successor and stage fuel of one node under one control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub next: PowertrainState,
    pub stage_cost: f64,
}

/// Reference transition through [`model::step`] with the formulation's
/// treatment of untracked states: the baseline holds the coolant at its
/// nominal warm temperature and burns nominal fuel, and neither reduced
/// formulation advances the cabin.
pub fn stage_transition(
    problem: &DpProblem,
    node: [f64; 3],
    u: &ControlInput,
    k: usize,
) -> Result<Transition, ModelError> {
    let f = problem.formulation;
    let params = &problem.params;
    let t_cl = if f.tracks_coolant() {
        node[1]
    } else {
        params.engine.t_cl_nominal
    };
    let q_heat = if f.tracks_cabin() {
        u.q_heat
    } else {
        problem.q_heat_fixed
    };
    let state = PowertrainState {
        soc: node[0],
        t_cl,
        t_cab: node[2],
    };
    let u = ControlInput { q_heat, ..*u };
    let out = model::step(&state, &u, problem.cycle.p_trac[k], params)?;
    let mut next = out.next;
    let mut stage_cost = out.fuel_g;
    if !f.tracks_coolant() {
        next.t_cl = t_cl;
        let p_e = power_split(problem.cycle.p_trac[k], u.mode, u.p_bat, params)?;
        stage_cost = nominal_fuel_rate(u.mode, p_e, params)? * params.t_s;
    }
    if !f.tracks_cabin() {
        next.t_cab = node[2];
    }
    Ok(Transition { next, stage_cost })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Worker threads for the per-layer sweep; results do not depend on it.
    pub workers: usize,
    /// Keep every full-precision value layer (small problems and checks).
    pub keep_values: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            workers: std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
            keep_values: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    /// Largest per-layer share of nodes with infinite cost-to-go.
    pub max_infeasible_fraction: f64,
    /// Layers where more than half the nodes were infeasible.
    pub coarse_layers: usize,
    pub node_count: usize,
    pub layers: usize,
    pub elapsed_s: f64,
}

/// Backward-sweep output: per-step argmin tables plus the cost-to-go layers
/// archived in single precision for rollout fallbacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpPolicy {
    pub formulation: Formulation,
    pub interpolation: ValueInterpolation,
    pub grid: StateGrid,
    pub q_values: Vec<f64>,
    /// `candidates[k]` for k in 0..N.
    pub candidates: Vec<Vec<Candidate>>,
    /// `policy[k][node]`: `q_index * candidates[k].len() + candidate_index`.
    pub policy: Vec<Vec<u16>>,
    /// `values[k][node]` for k in 0..=N.
    pub values: Vec<Vec<f32>>,
    #[serde(skip)]
    pub exact_values: Option<Vec<Vec<f64>>>,
    pub stats: SolveStats,
}

impl DpPolicy {
    pub fn horizon(&self) -> usize {
        self.policy.len()
    }

    pub fn n_controls(&self, k: usize) -> usize {
        self.candidates[k].len() * self.q_values.len()
    }

    pub fn control(&self, k: usize, index: usize) -> ControlInput {
        let nc = self.candidates[k].len();
        let c = self.candidates[k][index % nc];
        ControlInput {
            mode: c.mode,
            p_bat: c.p_bat,
            q_heat: self.q_values[index / nc],
        }
    }

    /// Stored argmin at a node, if any.
    pub fn control_at_node(&self, k: usize, node: usize) -> Option<ControlInput> {
        match self.policy[k][node] {
            NO_CONTROL => None,
            i => Some(self.control(k, i as usize)),
        }
    }

    /// Archived cost-to-go at a continuous state (+inf outside the grid).
    pub fn value_at(&self, k: usize, x: [f64; 3]) -> f64 {
        let layer = &self.values[k];
        match self.interpolation {
            ValueInterpolation::Multilinear => {
                self.grid
                    .interpolate_with_penalty(|i| layer[i] as f64, x, f64::INFINITY)
            }
            ValueInterpolation::Nearest => match self.grid.nearest(x) {
                Some(n) => layer[n] as f64,
                None => f64::INFINITY,
            },
        }
    }
}

fn snap(loc: Loc) -> Loc {
    if !loc.is_valid() {
        return loc;
    }
    Loc {
        i: loc.i + u32::from(loc.w >= 0.5),
        w: 0.0,
    }
}

fn place(axis: &Axis, x: f64, mode: ValueInterpolation) -> Loc {
    match axis.locate(x) {
        None => Loc::INVALID,
        Some(l) => match mode {
            ValueInterpolation::Multilinear => l,
            ValueInterpolation::Nearest => snap(l),
        },
    }
}

/// Reads a located successor from the next layer the same way
/// [`StateGrid::interpolate_at`] does, for a layer already reduced along
/// the cabin axis.
#[inline(always)]
fn bilinear(w: &[f64], n_soc: usize, ls: Loc, lt: Loc) -> f64 {
    let (i0, j0) = (ls.i as usize, lt.i as usize);
    let row0 = j0 * n_soc;
    let col = |i: usize| {
        let a = w[row0 + i];
        if lt.w == 0.0 {
            a
        } else {
            lerp(a, w[row0 + n_soc + i], lt.w)
        }
    };
    let a = col(i0);
    if ls.w == 0.0 {
        a
    } else {
        lerp(a, col(i0 + 1), ls.w)
    }
}

/// Terminal layer over every node.
fn terminal_layer(problem: &DpProblem, grid: &StateGrid) -> Vec<f64> {
    (0..grid.len())
        .map(|idx| {
            let x = grid.node(idx);
            problem.terminal.cost(problem.formulation, x[0], x[1], x[2])
        })
        .collect()
}

struct CoolantEntry {
    loc: Loc,
    cost: f64,
}

/// One backward step: fills `out_v`/`out_p` for layer k from `next`.
fn sweep_layer(
    problem: &DpProblem,
    grid: &StateGrid,
    q_values: &[f64],
    cands: &[Candidate],
    next: &[f64],
    out_v: &mut [f64],
    out_p: &mut [u16],
) {
    let params = &problem.params;
    let t_s = params.t_s;
    let mode = problem.interpolation;
    let f = problem.formulation;
    let [n_soc, n_tcl, n_cab] = grid.shape();
    let [soc_ax, tcl_ax, cab_ax] = grid.axes;
    let nc = cands.len();
    let nq = q_values.len();

    // SOC successors per (candidate, soc node)
    let soc_tab: Vec<Loc> = cands
        .iter()
        .flat_map(|cand| {
            (0..n_soc).map(move |i| {
                let s = soc_ax.value(i);
                match soc_derivative(s, cand.p_bat, &params.battery) {
                    Ok(d) => place(&soc_ax, s + t_s * d, mode),
                    Err(_) => Loc::INVALID,
                }
            })
        })
        .collect();

    // coolant successors and stage fuel per (q, candidate, coolant node)
    let cool_tab: Vec<CoolantEntry> = (0..nq * nc)
        .into_par_iter()
        .flat_map_iter(|qu| {
            let q = q_values[qu / nc];
            let cand = cands[qu % nc];
            (0..n_tcl).map(move |j| {
                if !f.tracks_coolant() {
                    return match nominal_fuel_rate(cand.mode, cand.p_e, params) {
                        Ok(w_f) => CoolantEntry {
                            loc: Loc { i: 0, w: 0.0 },
                            cost: w_f * t_s,
                        },
                        Err(_) => CoolantEntry {
                            loc: Loc::INVALID,
                            cost: f64::INFINITY,
                        },
                    };
                }
                let t = tcl_ax.value(j);
                match coolant_balance(t, cand.mode, cand.p_e, q, params) {
                    Ok((w_f, flows)) => {
                        let d = flows.net() / params.engine.m_eng_c_eng;
                        CoolantEntry {
                            loc: place(&tcl_ax, t + t_s * d, mode),
                            cost: w_f * t_s,
                        }
                    }
                    Err(_) => CoolantEntry {
                        loc: Loc::INVALID,
                        cost: f64::INFINITY,
                    },
                }
            })
        })
        .collect();

    // next layer reduced along the cabin axis, per (cabin node, q)
    let plane = n_soc * n_tcl;
    let reduced: Vec<Option<Vec<f64>>> = if f.tracks_cabin() {
        (0..n_cab * nq)
            .into_par_iter()
            .map(|cq| {
                let (c, q) = (cq / nq, q_values[cq % nq]);
                let t = cab_ax.value(c);
                let loc = place(&cab_ax, t + t_s * cabin_derivative(t, q, params), mode);
                if !loc.is_valid() {
                    return None;
                }
                let lo = &next[loc.i as usize * plane..][..plane];
                Some(if loc.w == 0.0 {
                    lo.to_vec()
                } else {
                    let hi = &next[(loc.i as usize + 1) * plane..][..plane];
                    lo.iter().zip(hi).map(|(a, b)| lerp(*a, *b, loc.w)).collect()
                })
            })
            .collect()
    } else {
        Vec::new()
    };

    out_v
        .par_chunks_mut(n_soc)
        .zip(out_p.par_chunks_mut(n_soc))
        .enumerate()
        .for_each(|(row, (best, arg))| {
            let (c, j) = (row / n_tcl, row % n_tcl);
            best.fill(f64::INFINITY);
            arg.fill(NO_CONTROL);
            for qi in 0..nq {
                let w: &[f64] = if f.tracks_cabin() {
                    match &reduced[c * nq + qi] {
                        Some(w) => w,
                        None => continue,
                    }
                } else {
                    &next[..plane]
                };
                for u in 0..nc {
                    let entry = &cool_tab[(qi * nc + u) * n_tcl + j];
                    if !entry.loc.is_valid() {
                        continue;
                    }
                    let socs = &soc_tab[u * n_soc..][..n_soc];
                    let index = (qi * nc + u) as u16;
                    for i in 0..n_soc {
                        let ls = socs[i];
                        if !ls.is_valid() {
                            continue;
                        }
                        let v = entry.cost + bilinear(w, n_soc, ls, entry.loc);
                        if v < best[i] {
                            best[i] = v;
                            arg[i] = index;
                        }
                    }
                }
            }
        });
}

/// Runs the backward sweep and returns the policy together with the optimal
/// cost-to-go at the initial state, g.
pub fn solve_policy(problem: &DpProblem, opts: &SolveOptions) -> Result<(DpPolicy, f64), DpError> {
    problem.validate()?;
    let start = Instant::now();
    let grid = problem.state_grid();
    let q_values = problem.q_heat_values();
    let horizon = problem.horizon();
    let cands: Vec<Vec<Candidate>> = (0..horizon).map(|k| candidates(problem, k)).collect();
    let max_controls = cands.iter().map(|c| c.len()).max().unwrap_or(0) * q_values.len();
    if max_controls >= NO_CONTROL as usize {
        return Err(DpError::InvalidGrid(format!(
            "{max_controls} controls per step exceed the policy index range"
        )));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| DpError::InvalidProblem(format!("worker pool: {e}")))?;

    let n = grid.len();
    let mut stats = SolveStats {
        node_count: n,
        layers: horizon + 1,
        ..Default::default()
    };
    let mut next = terminal_layer(problem, &grid);
    let mut values: Vec<Vec<f32>> = vec![Vec::new(); horizon + 1];
    let mut exact: Option<Vec<Vec<f64>>> = opts.keep_values.then(|| vec![Vec::new(); horizon + 1]);
    let mut policy: Vec<Vec<u16>> = vec![Vec::new(); horizon];
    let mut record = |k: usize, layer: &[f64], stats: &mut SolveStats| {
        values[k] = layer.iter().map(|v| *v as f32).collect();
        if let Some(e) = exact.as_mut() {
            e[k] = layer.to_vec();
        }
        let infeasible = layer.iter().filter(|v| v.is_infinite()).count() as f64 / n as f64;
        stats.max_infeasible_fraction = stats.max_infeasible_fraction.max(infeasible);
        if infeasible > 0.5 {
            stats.coarse_layers += 1;
            log::warn!(
                "grid too coarse at step {k}: {:.0} % of nodes infeasible",
                100.0 * infeasible
            );
        }
    };
    record(horizon, &next, &mut stats);

    let mut cur = vec![0.0; n];
    pool.install(|| {
        for k in (0..horizon).rev() {
            let mut arg = vec![NO_CONTROL; n];
            sweep_layer(problem, &grid, &q_values, &cands[k], &next, &mut cur, &mut arg);
            policy[k] = arg;
            record(k, &cur, &mut stats);
            std::mem::swap(&mut cur, &mut next);
        }
    });
    // `next` now holds layer 0
    let x0 = [
        problem.initial_state.soc,
        problem.initial_state.t_cl,
        problem.initial_state.t_cab,
    ];
    let value = match problem.interpolation {
        ValueInterpolation::Multilinear => super::interp::interpolate_value(&grid, &next, x0),
        ValueInterpolation::Nearest => grid.nearest(x0).map_or(f64::INFINITY, |i| next[i]),
    };
    stats.elapsed_s = start.elapsed().as_secs_f64();
    log::info!(
        "{} dp: {} nodes x {} steps in {:.2} s, value {:.3} g",
        problem.formulation,
        n,
        horizon,
        stats.elapsed_s,
        value
    );
    let out = DpPolicy {
        formulation: problem.formulation,
        interpolation: problem.interpolation,
        grid,
        q_values,
        candidates: cands,
        policy,
        values,
        exact_values: exact,
        stats,
    };
    if !value.is_finite() {
        return Err(DpError::NoFeasibleControl { k: 0 });
    }
    Ok((out, value))
}
