//! Multilinear interpolation of cost-to-go layers over the state grid.
//!
//! Layers are stored with SOC varying fastest, then coolant, then cabin.
//! Axes a formulation does not track are single-node and ignored. A corner
//! with positive weight and infinite cost makes the result infinite, so
//! the optimizer never reaches into infeasible regions through interpolation.

use serde::{Deserialize, Serialize};

use super::grid::{Axis, Loc};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateGrid {
    /// SOC, coolant temperature, cabin temperature.
    pub axes: [Axis; 3],
    pub active: [bool; 3],
}

/// `(1 - w) a + w b`, with a zero weight never touching `b` so that an
/// infinite neighbour off the query point cannot leak in.
#[inline(always)]
pub fn lerp(a: f64, b: f64, w: f64) -> f64 {
    if w == 0.0 {
        a
    } else {
        (1.0 - w) * a + w * b
    }
}

impl StateGrid {
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.axes[0].n, self.axes[1].n, self.axes[2].n]
    }

    #[inline(always)]
    pub fn index(&self, i: usize, j: usize, c: usize) -> usize {
        (c * self.axes[1].n + j) * self.axes[0].n + i
    }

    pub fn unindex(&self, idx: usize) -> [usize; 3] {
        let n0 = self.axes[0].n;
        let n1 = self.axes[1].n;
        [idx % n0, (idx / n0) % n1, idx / (n0 * n1)]
    }

    /// Coordinates of a node; inactive axes report their fixed value.
    pub fn node(&self, idx: usize) -> [f64; 3] {
        let [i, j, c] = self.unindex(idx);
        [
            self.axes[0].value(i),
            self.axes[1].value(j),
            self.axes[2].value(c),
        ]
    }

    pub fn locate(&self, x: [f64; 3]) -> Option<[Loc; 3]> {
        Some([
            self.axes[0].locate(x[0])?,
            self.axes[1].locate(x[1])?,
            self.axes[2].locate(x[2])?,
        ])
    }

    pub fn contains(&self, x: [f64; 3]) -> bool {
        self.locate(x).is_some()
    }

    pub fn nearest_clamped(&self, x: [f64; 3]) -> usize {
        self.index(
            self.axes[0].nearest_clamped(x[0]),
            self.axes[1].nearest_clamped(x[1]),
            self.axes[2].nearest_clamped(x[2]),
        )
    }

    pub fn nearest(&self, x: [f64; 3]) -> Option<usize> {
        Some(self.index(
            self.axes[0].nearest(x[0])?,
            self.axes[1].nearest(x[1])?,
            self.axes[2].nearest(x[2])?,
        ))
    }

    /// Interpolates at located coordinates. Reduction order is cabin, then
    /// coolant, then SOC.
    #[inline]
    pub fn interpolate_at<F: Fn(usize) -> f64>(&self, get: F, loc: [Loc; 3]) -> f64 {
        let [ls, lt, lc] = loc;
        let (i0, j0, c0) = (ls.i as usize, lt.i as usize, lc.i as usize);
        let cab = |i: usize, j: usize| {
            let a = get(self.index(i, j, c0));
            if lc.w == 0.0 {
                a
            } else {
                lerp(a, get(self.index(i, j, c0 + 1)), lc.w)
            }
        };
        let col = |i: usize| {
            let a = cab(i, j0);
            if lt.w == 0.0 {
                a
            } else {
                lerp(a, cab(i, j0 + 1), lt.w)
            }
        };
        let a = col(i0);
        if ls.w == 0.0 {
            a
        } else {
            lerp(a, col(i0 + 1), ls.w)
        }
    }

    /// Clamps `x` into the grid, interpolates, and adds `boundary_penalty`
    /// if any active coordinate had to be clamped.
    pub fn interpolate_with_penalty<F: Fn(usize) -> f64>(
        &self,
        get: F,
        x: [f64; 3],
        boundary_penalty: f64,
    ) -> f64 {
        let mut clamped = false;
        let mut loc = [Loc::INVALID; 3];
        for d in 0..3 {
            let (l, c) = self.axes[d].locate_clamped(x[d]);
            loc[d] = l;
            clamped |= c;
        }
        let v = self.interpolate_at(get, loc);
        if clamped {
            v + boundary_penalty
        } else {
            v
        }
    }
}

/// Cost-to-go at a continuous state; infinite outside the grid, where the
/// state constraints are violated.
pub fn interpolate_value(grid: &StateGrid, layer: &[f64], state: [f64; 3]) -> f64 {
    grid.interpolate_with_penalty(|k| layer[k], state, f64::INFINITY)
}
