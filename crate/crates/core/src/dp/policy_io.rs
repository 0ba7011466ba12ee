//! Binary policy files: an 8-byte magic, a little-endian u64 header length,
//! a JSON header, then every policy layer as u16 and every value layer as
//! f32, all little-endian.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use super::grid::GridSpec;
use super::interp::StateGrid;
use super::problem::{Formulation, TerminalSpec, ValueInterpolation};
use super::solver::{Candidate, DpPolicy, SolveStats};
use super::DpError;

const MAGIC: &[u8; 8] = b"IPTMPOL1";

#[derive(Serialize, Deserialize)]
struct Header {
    formulation: Formulation,
    interpolation: ValueInterpolation,
    grid: StateGrid,
    q_values: Vec<f64>,
    candidates: Vec<Vec<Candidate>>,
    stats: SolveStats,
    /// Context of the run that produced the policy; not needed to replay it.
    grid_spec: Option<GridSpec>,
    terminal: Option<TerminalSpec>,
    q_heat_fixed: f64,
}

fn io(e: impl std::fmt::Display) -> DpError {
    DpError::Io(e.to_string())
}

/// Extra context stored next to a policy.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolicyMeta {
    pub grid_spec: Option<GridSpec>,
    pub terminal: Option<TerminalSpec>,
    pub q_heat_fixed: f64,
}

pub fn write_policy<W: Write>(mut w: W, policy: &DpPolicy, meta: &PolicyMeta) -> Result<(), DpError> {
    let header = Header {
        formulation: policy.formulation,
        interpolation: policy.interpolation,
        grid: policy.grid.clone(),
        q_values: policy.q_values.clone(),
        candidates: policy.candidates.clone(),
        stats: policy.stats.clone(),
        grid_spec: meta.grid_spec.clone(),
        terminal: meta.terminal,
        q_heat_fixed: meta.q_heat_fixed,
    };
    let json = serde_json::to_vec(&header).map_err(io)?;
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&(json.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&json).map_err(io)?;
    let mut buf = Vec::new();
    for layer in &policy.policy {
        buf.clear();
        buf.extend(layer.iter().flat_map(|x| x.to_le_bytes()));
        w.write_all(&buf).map_err(io)?;
    }
    for layer in &policy.values {
        buf.clear();
        buf.extend(layer.iter().flat_map(|x| x.to_le_bytes()));
        w.write_all(&buf).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_policy<R: Read>(mut r: R) -> Result<(DpPolicy, PolicyMeta), DpError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(DpError::Io("not a policy file".into()));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len).map_err(io)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json).map_err(io)?;
    let h: Header = serde_json::from_slice(&json).map_err(io)?;
    let n = h.grid.len();
    let horizon = h.candidates.len();
    let mut raw = vec![0u8; n * 2];
    let mut policy = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        r.read_exact(&mut raw).map_err(io)?;
        policy.push(
            raw.chunks_exact(2)
                .map(|b| u16::from_le_bytes([b[0], b[1]]))
                .collect(),
        );
    }
    let mut raw = vec![0u8; n * 4];
    let mut values = Vec::with_capacity(horizon + 1);
    for _ in 0..=horizon {
        r.read_exact(&mut raw).map_err(io)?;
        values.push(
            raw.chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect(),
        );
    }
    let meta = PolicyMeta {
        grid_spec: h.grid_spec,
        terminal: h.terminal,
        q_heat_fixed: h.q_heat_fixed,
    };
    Ok((
        DpPolicy {
            formulation: h.formulation,
            interpolation: h.interpolation,
            grid: h.grid,
            q_values: h.q_values,
            candidates: h.candidates,
            policy,
            values,
            exact_values: None,
            stats: h.stats,
        },
        meta,
    ))
}
