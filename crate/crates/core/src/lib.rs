//! Integrated power and thermal management for a power-split hybrid in
//! cold weather.
//!
//! * [`model`]: battery, coolant and cabin dynamics and the power split.
//! * [`cycle`]: drive-cycle ingestion and the bundled congested city cycle.
//! * [`dp`]: grid dynamic programming in one, two and three states.
//! * [`rules`]: a load-leveling baseline with a cold-coolant idle rule.
//! * [`sim`]: closed-loop simulation, fuel accounting and comparisons.
//! * [`config`]: the JSON run configuration shared by the CLI.

pub mod config;
pub mod cycle;
pub mod dp;
pub mod model;
pub mod rules;
pub mod sim;
