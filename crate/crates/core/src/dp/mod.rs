//! Finite-horizon dynamic programming over quantized states and controls.

mod grid;
mod interp;
mod policy_io;
mod problem;
mod rollout;
mod solver;

use thiserror::Error;

use crate::model::ModelError;

pub use grid::{Axis, GridSpec, Loc, Range};
pub use interp::{interpolate_value, lerp, StateGrid};
pub use policy_io::{read_policy, write_policy, PolicyMeta};
pub use problem::{DpProblem, Formulation, TerminalSpec, ValueInterpolation};
pub use rollout::{solve, DpSolution, PolicyController};
pub use solver::{
    candidates, solve_policy, stage_transition, Candidate, DpPolicy, SolveOptions, SolveStats,
    Transition, NO_CONTROL,
};

#[derive(Debug, Error)]
pub enum DpError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("no feasible control from the initial state (step {k})")]
    NoFeasibleControl { k: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("rollout failed: {0}")]
    Rollout(String),
    #[error("policy file: {0}")]
    Io(String),
}
