//! One-dimensional lookup tables with linear interpolation and endpoint clamping.

use serde::{Deserialize, Serialize};

/// A breakpoint/value table. Queries outside the breakpoint range clamp to
/// the endpoint values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1d {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Table1d {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self, String> {
        let t = Self { x, y };
        t.check()?;
        Ok(t)
    }

    /// Structural checks: equal lengths, at least one point, finite values,
    /// strictly increasing breakpoints.
    pub fn check(&self) -> Result<(), String> {
        if self.x.is_empty() {
            return Err("table has no breakpoints".into());
        }
        if self.x.len() != self.y.len() {
            return Err(format!(
                "breakpoint/value length mismatch ({} vs {})",
                self.x.len(),
                self.y.len()
            ));
        }
        if self.x.iter().chain(&self.y).any(|v| !v.is_finite()) {
            return Err("table contains non-finite entries".into());
        }
        if self.x.windows(2).any(|w| w[1] <= w[0]) {
            return Err("breakpoints must be strictly increasing".into());
        }
        Ok(())
    }

    pub fn x_min(&self) -> f64 {
        self.x[0]
    }

    pub fn x_max(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min() && x <= self.x_max()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.x.len();
        if x <= self.x[0] {
            return self.y[0];
        }
        if x >= self.x[n - 1] {
            return self.y[n - 1];
        }
        // first breakpoint strictly greater than x
        let hi = self.x.partition_point(|&b| b <= x);
        let lo = hi - 1;
        let w = (x - self.x[lo]) / (self.x[hi] - self.x[lo]);
        self.y[lo] + w * (self.y[hi] - self.y[lo])
    }

    pub fn is_non_decreasing(&self) -> bool {
        self.y.windows(2).all(|w| w[1] >= w[0])
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.y.windows(2).all(|w| w[1] > w[0])
    }

    pub fn is_non_increasing(&self) -> bool {
        self.y.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn min_value(&self) -> f64 {
        self.y.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_and_clamps() {
        let t = Table1d::new(vec![0.0, 1.0, 3.0], vec![10.0, 20.0, 0.0]).unwrap();
        assert_eq!(t.eval(-5.0), 10.0);
        assert_eq!(t.eval(0.0), 10.0);
        assert_eq!(t.eval(0.5), 15.0);
        assert_eq!(t.eval(1.0), 20.0);
        assert_eq!(t.eval(2.0), 10.0);
        assert_eq!(t.eval(3.0), 0.0);
        assert_eq!(t.eval(99.0), 0.0);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(Table1d::new(vec![], vec![]).is_err());
        assert!(Table1d::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(Table1d::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(Table1d::new(vec![1.0, 0.5], vec![1.0, 2.0]).is_err());
        assert!(Table1d::new(vec![0.0, f64::NAN], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn single_point_table_is_constant() {
        let t = Table1d::new(vec![2.0], vec![7.0]).unwrap();
        assert_eq!(t.eval(-1.0), 7.0);
        assert_eq!(t.eval(2.0), 7.0);
        assert_eq!(t.eval(10.0), 7.0);
    }
}
