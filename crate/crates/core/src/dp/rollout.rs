//! Forward rollout of a DP policy on the continuous full model.

use serde::{Deserialize, Serialize};

use super::problem::{DpProblem, Formulation};
use super::solver::{solve_policy, DpPolicy, SolveOptions};
use super::DpError;
use crate::model::{self, ControlInput, PowertrainState, VehicleParams};
use crate::sim::{simulate, Bounds, Controller, SimTrace};

/// Looks up the stored control at the nearest node and keeps it if it is
/// still admissible from the continuous state. Otherwise picks the feasible
/// control minimizing true stage fuel plus the interpolated cost-to-go.
pub struct PolicyController<'a> {
    pub policy: &'a DpPolicy,
    /// Heating used when the policy does not choose it.
    pub q_heat_fixed: f64,
    /// Steps that needed the fallback search.
    pub fallbacks: usize,
    /// Steps where no candidate kept the state on the grid.
    pub off_grid: usize,
}

impl<'a> PolicyController<'a> {
    pub fn new(policy: &'a DpPolicy, q_heat_fixed: f64) -> Self {
        Self {
            policy,
            q_heat_fixed,
            fallbacks: 0,
            off_grid: 0,
        }
    }

    fn resolve(&self, u: ControlInput) -> ControlInput {
        if self.policy.formulation.tracks_cabin() {
            u
        } else {
            ControlInput {
                q_heat: self.q_heat_fixed,
                ..u
            }
        }
    }

    /// Stage fuel plus next value, or `None` if the control is inadmissible.
    fn score(
        &self,
        k: usize,
        x: &PowertrainState,
        u: &ControlInput,
        p_trac: f64,
        params: &VehicleParams,
        t_cl_bounds: [f64; 2],
    ) -> Option<f64> {
        let out = model::step(x, u, p_trac, params).ok()?;
        let n = out.next;
        if n.t_cl < t_cl_bounds[0] || n.t_cl > t_cl_bounds[1] {
            return None;
        }
        // untracked states sit on single-node axes, which accept any value
        let v = self.policy.value_at(k + 1, [n.soc, n.t_cl, n.t_cab]);
        v.is_finite().then_some(out.fuel_g + v)
    }
}

impl Controller for PolicyController<'_> {
    fn decide(
        &mut self,
        k: usize,
        x: &PowertrainState,
        p_trac: f64,
        params: &VehicleParams,
    ) -> Result<ControlInput, String> {
        let pol = self.policy;
        let t_cl_bounds = if pol.formulation.tracks_coolant() {
            [pol.grid.axes[1].min, pol.grid.axes[1].max()]
        } else {
            [params.engine.t_cl_min, params.engine.t_cl_max]
        };
        let node = pol.grid.nearest_clamped([x.soc, x.t_cl, x.t_cab]);
        if let Some(u) = pol.control_at_node(k, node) {
            let u = self.resolve(u);
            if self.score(k, x, &u, p_trac, params, t_cl_bounds).is_some() {
                return Ok(u);
            }
        }
        self.fallbacks += 1;
        let mut best: Option<(f64, ControlInput)> = None;
        for i in 0..pol.n_controls(k) {
            let u = self.resolve(pol.control(k, i));
            if let Some(s) = self.score(k, x, &u, p_trac, params, t_cl_bounds) {
                if best.is_none_or(|(b, _)| s < b) {
                    best = Some((s, u));
                }
            }
        }
        if let Some((_, u)) = best {
            return Ok(u);
        }
        // nothing stays on the grid: take the cheapest model-feasible control
        self.off_grid += 1;
        let mut cheapest: Option<(f64, ControlInput)> = None;
        for i in 0..pol.n_controls(k) {
            let u = self.resolve(pol.control(k, i));
            if let Ok(out) = model::step(x, &u, p_trac, params) {
                if cheapest.is_none_or(|(b, _)| out.fuel_g < b) {
                    cheapest = Some((out.fuel_g, u));
                }
            }
        }
        match cheapest {
            Some((_, u)) => {
                log::warn!("step {k}: no admissible control keeps the state on the grid");
                Ok(u)
            }
            None => Err(format!("no model-feasible control among {} candidates", pol.n_controls(k))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpSolution {
    pub policy: DpPolicy,
    /// Optimal grid cost-to-go at the initial state, g (fuel plus terminal).
    pub value: f64,
    pub rollout: SimTrace,
    /// Terminal cost of the rollout's final state.
    pub rollout_terminal_g: f64,
    pub fallbacks: usize,
    pub off_grid: usize,
}

impl DpSolution {
    /// Rollout fuel plus terminal cost, comparable to `value`.
    pub fn rollout_cost(&self) -> f64 {
        self.rollout.fuel_total_g + self.rollout_terminal_g
    }

    /// Relative gap between the grid value and the continuous rollout.
    pub fn rollout_gap(&self) -> f64 {
        (self.rollout_cost() - self.value) / self.value.abs().max(1e-12)
    }
}

/// Rolls a solved policy out on the full thermal model.
pub fn rollout(problem: &DpProblem, policy: &DpPolicy) -> Result<(SimTrace, usize, usize), DpError> {
    let mut ctl = PolicyController::new(policy, problem.q_heat_fixed);
    let bounds = Bounds::from_params(&problem.params);
    let trace = simulate(
        problem.formulation.name(),
        &mut ctl,
        &problem.cycle,
        &problem.params,
        problem.initial_state,
        &bounds,
    )
    .map_err(|e| DpError::Rollout(e.to_string()))?;
    if ctl.fallbacks > 0 {
        log::info!("{} rollout: {} fallback steps", problem.formulation, ctl.fallbacks);
    }
    Ok((trace, ctl.fallbacks, ctl.off_grid))
}

/// Backward sweep followed by the continuous rollout.
pub fn solve(problem: &DpProblem, opts: &SolveOptions) -> Result<DpSolution, DpError> {
    let (policy, value) = solve_policy(problem, opts)?;
    let (rollout, fallbacks, off_grid) = self::rollout(problem, &policy)?;
    let last = rollout.final_state();
    let rollout_terminal_g = problem
        .terminal
        .cost(problem.formulation, last.soc, last.t_cl, last.t_cab);
    let sol = DpSolution {
        policy,
        value,
        rollout,
        rollout_terminal_g,
        fallbacks,
        off_grid,
    };
    if sol.rollout_gap().abs() > 0.01 && problem.formulation != Formulation::BaselineDp {
        log::warn!(
            "{} rollout cost {:.2} g differs from grid value {:.2} g by {:.1} %",
            problem.formulation,
            sol.rollout_cost(),
            value,
            100.0 * sol.rollout_gap()
        );
    }
    Ok(sol)
}
