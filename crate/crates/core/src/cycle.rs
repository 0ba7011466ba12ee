//! Drive cycles: CSV ingestion, resampling onto a 1 s grid, traction power
//! from longitudinal road load, and the bundled congested city cycle.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

const BUNDLED_CSV: &str = include_str!("../data/congested_city.csv");

#[derive(Debug, Error)]
pub enum CycleError {
    #[error("malformed cycle csv: {0}")]
    MalformedCsv(String),
    #[error("time not strictly increasing at row {row}")]
    NonMonotoneTime { row: usize },
    #[error("negative speed {v} m/s at row {row}")]
    NegativeSpeed { row: usize, v: f64 },
    #[error("cycle io: {0}")]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for CycleError {
    fn from(e: csv::Error) -> Self {
        CycleError::MalformedCsv(e.to_string())
    }
}

/// Longitudinal road-load coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoadLoad {
    /// Vehicle mass, kg.
    pub mass: f64,
    /// Rolling resistance coefficient.
    pub c_rr: f64,
    /// Drag area C_d A, m².
    pub cd_a: f64,
    /// Air density, kg/m³.
    pub rho: f64,
    pub g: f64,
    /// Most negative traction power recoverable, W; friction brakes take the rest.
    pub regen_floor: f64,
}

impl Default for RoadLoad {
    fn default() -> Self {
        Self {
            mass: 1530.0,
            c_rr: 0.009,
            cd_a: 0.58,
            // dry air at -10 °C
            rho: 1.34,
            g: 9.81,
            regen_floor: -20_000.0,
        }
    }
}

/// Wheel power demand, W, at speed `v` and acceleration `a`.
pub fn traction_power(v: f64, a: f64, road: &RoadLoad) -> f64 {
    let force = road.mass * a + road.mass * road.g * road.c_rr + 0.5 * road.rho * road.cd_a * v * v;
    (force * v).max(road.regen_floor)
}

/// A drive cycle sampled once per second from t = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveCycle {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub p_trac: Vec<f64>,
}

impl DriveCycle {
    /// Builds a cycle from 1 s samples, checking the structural invariants.
    pub fn new(t: Vec<f64>, v: Vec<f64>, p_trac: Vec<f64>) -> Result<Self, CycleError> {
        if t.is_empty() || t.len() != v.len() || t.len() != p_trac.len() {
            return Err(CycleError::MalformedCsv(
                "time, speed and power arrays must be non-empty and equal in length".into(),
            ));
        }
        for (i, w) in t.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(CycleError::NonMonotoneTime { row: i + 1 });
            }
        }
        if let Some((row, &v)) = v.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(CycleError::NegativeSpeed { row, v });
        }
        if p_trac.iter().chain(&v).chain(&t).any(|x| !x.is_finite()) {
            return Err(CycleError::MalformedCsv("non-finite sample".into()));
        }
        Ok(Self { t, v, p_trac })
    }

    /// Speed-only construction: traction power from road load with the
    /// forward-difference acceleration (zero on the last sample).
    pub fn from_speed(t: Vec<f64>, v: Vec<f64>, road: &RoadLoad) -> Result<Self, CycleError> {
        let n = v.len();
        let p = (0..n)
            .map(|k| {
                let a = if k + 1 < n {
                    (v[k + 1] - v[k]) / (t[k + 1] - t[k])
                } else {
                    0.0
                };
                traction_power(v[k], a, road)
            })
            .collect();
        Self::new(t, v, p)
    }

    /// Number of samples, N + 1 for a horizon of N steps.
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Number of transitions.
    pub fn horizon(&self) -> usize {
        self.t.len().saturating_sub(1)
    }

    pub fn duration(&self) -> f64 {
        self.t[self.t.len() - 1] - self.t[0]
    }

    pub fn mean_speed(&self) -> f64 {
        self.v.iter().sum::<f64>() / self.v.len() as f64
    }

    pub fn stopped_fraction(&self) -> f64 {
        self.v.iter().filter(|v| **v == 0.0).count() as f64 / self.v.len() as f64
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), CycleError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["time_s", "speed_mps", "p_trac_w"])?;
        for k in 0..self.len() {
            wtr.write_record(&[
                format!("{}", self.t[k]),
                format!("{}", self.v[k]),
                format!("{}", self.p_trac[k]),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Linear resampling of `(xs, ys)` onto `grid`; `grid` must lie within `xs`.
fn resample(xs: &[f64], ys: &[f64], grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|&g| {
            let hi = xs.partition_point(|&x| x < g);
            if hi == 0 {
                return ys[0];
            }
            if hi >= xs.len() {
                return ys[xs.len() - 1];
            }
            if xs[hi] == g {
                return ys[hi];
            }
            let lo = hi - 1;
            let w = (g - xs[lo]) / (xs[hi] - xs[lo]);
            ys[lo] + w * (ys[hi] - ys[lo])
        })
        .collect()
}

/// Parses a cycle CSV with header `time_s, speed_mps[, p_trac_w]` and
/// resamples it onto a 1 s grid starting at the first timestamp.
pub fn parse_cycle<R: Read>(reader: R, road: &RoadLoad) -> Result<DriveCycle, CycleError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let t_col = col("time_s").ok_or_else(|| CycleError::MalformedCsv("missing time_s column".into()))?;
    let v_col =
        col("speed_mps").ok_or_else(|| CycleError::MalformedCsv("missing speed_mps column".into()))?;
    let p_col = col("p_trac_w");

    let (mut ts, mut vs, mut ps) = (Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |c: usize| -> Result<f64, CycleError> {
            let s = rec
                .get(c)
                .ok_or_else(|| CycleError::MalformedCsv(format!("row {row}: missing field")))?;
            s.parse::<f64>()
                .map_err(|_| CycleError::MalformedCsv(format!("row {row}: bad number {s:?}")))
        };
        let t = field(t_col)?;
        let v = field(v_col)?;
        if !t.is_finite() || !v.is_finite() {
            return Err(CycleError::MalformedCsv(format!("row {row}: non-finite value")));
        }
        if let Some(&prev) = ts.last() {
            if t <= prev {
                return Err(CycleError::NonMonotoneTime { row });
            }
        }
        if v < 0.0 {
            return Err(CycleError::NegativeSpeed { row, v });
        }
        ts.push(t);
        vs.push(v);
        if let Some(c) = p_col {
            ps.push(field(c)?);
        }
    }
    if ts.is_empty() {
        return Err(CycleError::MalformedCsv("no samples".into()));
    }

    let t0 = ts[0];
    let steps = ((ts[ts.len() - 1] - t0) + 1e-9).floor() as usize;
    let grid_abs: Vec<f64> = (0..=steps).map(|k| t0 + k as f64).collect();
    let t_out: Vec<f64> = (0..=steps).map(|k| k as f64).collect();
    let v_out = resample(&ts, &vs, &grid_abs);
    if p_col.is_some() {
        let p_out = resample(&ts, &ps, &grid_abs);
        DriveCycle::new(t_out, v_out, p_out)
    } else {
        DriveCycle::from_speed(t_out, v_out, road)
    }
}

pub fn load_cycle(path: &Path) -> Result<DriveCycle, CycleError> {
    load_cycle_with(path, &RoadLoad::default())
}

pub fn load_cycle_with(path: &Path, road: &RoadLoad) -> Result<DriveCycle, CycleError> {
    let f = std::fs::File::open(path)?;
    parse_cycle(std::io::BufReader::new(f), road)
}

/// The bundled 960 s congested city cycle.
pub fn bundled() -> DriveCycle {
    parse_cycle(BUNDLED_CSV.as_bytes(), &RoadLoad::default()).expect("bundled cycle parses")
}

/// One stop-and-go leg: standstill, ramp up, cruise, ramp down to rest.
struct Leg {
    stop_s: usize,
    v_peak: f64,
    cruise_s: usize,
}

const fn leg(stop_s: usize, v_peak: f64, cruise_s: usize) -> Leg {
    Leg {
        stop_s,
        v_peak,
        cruise_s,
    }
}

const ACCEL: f64 = 1.0;
const DECEL: f64 = 1.25;

fn push_leg(v: &mut Vec<f64>, l: &Leg) {
    v.extend(std::iter::repeat_n(0.0, l.stop_s));
    let n_acc = (l.v_peak / ACCEL).ceil() as usize;
    let n_dec = (l.v_peak / DECEL).ceil() as usize;
    v.extend((1..=n_acc).map(|i| l.v_peak * i as f64 / n_acc as f64));
    v.extend(std::iter::repeat_n(l.v_peak, l.cruise_s));
    v.extend((1..=n_dec).map(|i| l.v_peak * (n_dec - i) as f64 / n_dec as f64));
}

/// Generates the synthetic congested cycle that ships as the bundled CSV:
/// stop-and-go legs, a long standstill from 820 s to 900 s, one last leg.
pub fn synthesize_congested(road: &RoadLoad) -> DriveCycle {
    const EARLY: [Leg; 14] = [
        leg(10, 8.0, 20),
        leg(15, 12.0, 35),
        leg(20, 6.0, 10),
        leg(12, 10.0, 40),
        leg(25, 14.0, 30),
        leg(18, 5.0, 8),
        leg(14, 9.0, 25),
        leg(22, 11.0, 45),
        leg(16, 7.0, 15),
        leg(20, 13.0, 28),
        leg(12, 6.0, 12),
        leg(15, 10.0, 22),
        leg(20, 8.0, 18),
        leg(15, 12.0, 30),
    ];
    let mut v = vec![0.0];
    for l in &EARLY {
        push_leg(&mut v, l);
    }
    debug_assert!(v.len() <= 821);
    v.resize(901, 0.0);
    push_leg(&mut v, &leg(0, 9.0, 25));
    debug_assert!(v.len() <= 961);
    v.resize(961, 0.0);
    let t = (0..v.len()).map(|k| k as f64).collect();
    DriveCycle::from_speed(t, v, road).expect("synthetic cycle is valid")
}
