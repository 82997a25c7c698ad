//! Hydraulic structures: weirs, sluice gates, variable-speed pumps and the
//! pipe section each pump discharges through.
//!
//! All functions here are pure and take SI units (m, m³/s, s) except pump
//! speeds, which are either normalized (`speed / nominal_speed`) or rpm as
//! noted, and power, which is kW.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const DEFAULT_GRAVITY: f64 = 9.81;

/// Permitted flow direction of a gate or pump relative to its branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowDirection {
    /// Water moves from the external river into the branch.
    Inflow,
    /// Water moves from the branch out to the external river.
    Outflow,
}

impl FlowDirection {
    /// +1 for flow into the branch, -1 for flow out of it.
    pub fn sign(self) -> f64 {
        match self {
            FlowDirection::Inflow => 1.0,
            FlowDirection::Outflow => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    /// Backwater (storage) area in m².
    pub backwater_area: f64,
    /// Center of the output constraint band and desired zone, m.
    pub level_center: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weir {
    pub upstream: usize,
    pub downstream: usize,
    #[serde(default = "default_weir_coeff")]
    pub discharge_coeff: f64,
    pub crest_width: f64,
    /// Physical (min, max) crest height, m.
    pub height_bounds: (f64, f64),
}

fn default_weir_coeff() -> f64 {
    0.61
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SluiceGate {
    #[serde(default)]
    pub branch: usize,
    #[serde(default)]
    pub river: usize,
    #[serde(default = "default_gate_coeff")]
    pub discharge_coeff: f64,
    pub width: f64,
    #[serde(default = "default_gate_opening")]
    pub max_opening: f64,
    pub direction: FlowDirection,
}

fn default_gate_coeff() -> f64 {
    0.61
}

fn default_gate_opening() -> f64 {
    0.6
}

/// Bounds of the admissible operating region of a running pump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpFeasibleRegion {
    /// Minimum discharge while running, m³/s.
    pub min_discharge: f64,
    /// Largest discharge on the nominal-speed curve (runout), m³/s. Scaled by
    /// the affinity laws at other speeds.
    pub runout_discharge: f64,
    /// Power limit, kW.
    pub max_power: f64,
    /// Admissible total head interval, m.
    pub head_range: (f64, f64),
}

impl Default for PumpFeasibleRegion {
    fn default() -> Self {
        Self {
            min_discharge: 0.5,
            runout_discharge: 9.0,
            max_power: 600.0,
            head_range: (0.0, 12.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pump {
    #[serde(default)]
    pub branch: usize,
    #[serde(default)]
    pub river: usize,
    pub direction: FlowDirection,
    /// rpm used to normalize the shaft speed.
    #[serde(default = "default_nominal_speed")]
    pub nominal_speed: f64,
    /// (min, max) shaft speed while running, rpm.
    #[serde(default = "default_speed_bounds")]
    pub speed_bounds: (f64, f64),
    /// Nominal-speed H-Q curve, coefficients in ascending powers of Q.
    #[serde(default = "default_hq_curve")]
    pub hq_curve: Vec<f64>,
    /// a1..a4 of `P^n(Q) = a1 Q³ + a2 Q² + a3 Q + a4` (kW).
    #[serde(default = "default_power_coeffs")]
    pub power_coeffs: [f64; 4],
    #[serde(default)]
    pub feasible: PumpFeasibleRegion,
}

fn default_nominal_speed() -> f64 {
    250.0
}

fn default_speed_bounds() -> (f64, f64) {
    (120.0, 250.0)
}

fn default_hq_curve() -> Vec<f64> {
    vec![12.0, 0.0, -0.12]
}

fn default_power_coeffs() -> [f64; 4] {
    [-1.81, 19.72, -83.06, 506.15]
}

impl Pump {
    /// A pump with all model parameters at their defaults.
    pub fn with_direction(direction: FlowDirection) -> Self {
        Self {
            branch: 0,
            river: 0,
            direction,
            nominal_speed: default_nominal_speed(),
            speed_bounds: default_speed_bounds(),
            hq_curve: default_hq_curve(),
            power_coeffs: default_power_coeffs(),
            feasible: PumpFeasibleRegion::default(),
        }
    }

    pub fn normalized(&self, rpm: f64) -> f64 {
        rpm / self.nominal_speed
    }

    fn nominal_head(&self, q: f64) -> f64 {
        self.hq_curve.iter().rev().fold(0.0, |acc, c| acc * q + c)
    }

    fn nominal_head_slope(&self, q: f64) -> f64 {
        self.hq_curve
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * q + k as f64 * c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipeSection {
    #[serde(default = "default_friction")]
    pub darcy_friction: f64,
    #[serde(default = "default_pipe_length")]
    pub length: f64,
    #[serde(default = "default_diameter")]
    pub inner_diameter: f64,
    #[serde(default = "default_minor_loss")]
    pub minor_loss_sum: f64,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
}

fn default_friction() -> f64 {
    0.013
}
fn default_pipe_length() -> f64 {
    50.0
}
fn default_diameter() -> f64 {
    1.8288
}
fn default_minor_loss() -> f64 {
    1.0
}
fn default_gravity() -> f64 {
    DEFAULT_GRAVITY
}

impl Default for PipeSection {
    fn default() -> Self {
        Self {
            darcy_friction: default_friction(),
            length: default_pipe_length(),
            inner_diameter: default_diameter(),
            minor_loss_sum: default_minor_loss(),
            gravity: default_gravity(),
        }
    }
}

impl PipeSection {
    /// Coefficient k of the friction term `k·Q²`.
    pub fn friction_coefficient(&self) -> f64 {
        let d = self.inner_diameter;
        (self.darcy_friction * self.length / d + self.minor_loss_sum) * 8.0
            / (self.gravity * PI * PI * d.powi(4))
    }
}

/// Free-flow weir discharge for crest height `crest` and upstream level `h_high`.
pub fn weir_discharge(h_high: f64, crest: f64, weir: &Weir, gravity: f64) -> f64 {
    let head = (h_high - crest).max(0.0);
    2.0 / 3.0 * weir.discharge_coeff * weir.crest_width * (2.0 * gravity).sqrt() * head.powf(1.5)
}

/// Whether the check-valve condition allows the gate to open.
pub fn gate_may_open(h_branch: f64, h_river: f64, direction: FlowDirection) -> bool {
    match direction {
        FlowDirection::Inflow => h_river - h_branch >= 0.0,
        FlowDirection::Outflow => h_branch - h_river >= 0.0,
    }
}

/// Submerged sluice gate discharge magnitude. Zero when the check-valve
/// condition for the gate's direction is violated.
pub fn gate_discharge(h_branch: f64, h_river: f64, ratio: f64, gate: &SluiceGate, gravity: f64) -> f64 {
    if !gate_may_open(h_branch, h_river, gate.direction) {
        return 0.0;
    }
    let ratio = ratio.clamp(0.0, 1.0);
    gate.discharge_coeff
        * gate.width
        * ratio
        * gate.max_opening
        * (2.0 * gravity * (h_branch - h_river).abs()).sqrt()
}

/// Pump head at discharge `q` and normalized speed `speed` (affinity laws).
pub fn pump_head_capacity(q: f64, speed: f64, pump: &Pump) -> f64 {
    speed * speed * pump.nominal_head(q / speed)
}

fn pump_head_slope(q: f64, speed: f64, pump: &Pump) -> f64 {
    speed * pump.nominal_head_slope(q / speed)
}

/// Head required by the pipe system at discharge `q`.
pub fn demand_head(q: f64, static_head: f64, pipe: &PipeSection) -> f64 {
    static_head + pipe.friction_coefficient() * q * q
}

/// Vertical level difference the pump has to overcome.
pub fn static_head(h_branch: f64, h_river: f64, direction: FlowDirection) -> f64 {
    match direction {
        FlowDirection::Inflow => h_branch - h_river,
        FlowDirection::Outflow => h_river - h_branch,
    }
}

const ROOT_HEAD_TOL: f64 = 1e-9;
const MAX_BRACKET: f64 = 1.0e4;
const MONOTONE_SAMPLES: usize = 256;

/// Discharge at the intersection of the pump curve and the demand curve.
///
/// A stopped pump (`speed == 0`) returns zero. Otherwise the unique `Q ≥ 0`
/// with capacity equal to demand is bracketed and bisected until the head
/// residual is below 1e-9 m.
pub fn solve_pump_operating_point(speed: f64, static_head: f64, pump: &Pump, pipe: &PipeSection) -> Result<f64> {
    if speed <= 0.0 {
        return Ok(0.0);
    }
    let residual = |q: f64| pump_head_capacity(q, speed, pump) - demand_head(q, static_head, pipe);
    let no_root = || Error::NoIntersection { speed, static_head };

    let f0 = residual(0.0);
    if f0.abs() <= ROOT_HEAD_TOL {
        return Ok(0.0);
    }
    if f0 < 0.0 {
        return Err(no_root());
    }
    let mut hi = 1.0;
    while residual(hi) > 0.0 {
        hi *= 2.0;
        if hi > MAX_BRACKET {
            return Err(no_root());
        }
    }

    // [0, 4·hi] must contain exactly one sign change; the extension catches
    // curves that bend back up past the first crossing.
    let mut changes = 0;
    let mut prev = f0;
    for i in 1..=MONOTONE_SAMPLES {
        let q = 4.0 * hi * i as f64 / MONOTONE_SAMPLES as f64;
        let f = residual(q);
        if (f > 0.0) != (prev > 0.0) {
            changes += 1;
        }
        prev = f;
    }
    if changes != 1 {
        return Err(Error::NonUniqueRoot { speed, static_head });
    }

    let (mut lo, mut hi) = (0.0_f64, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f = residual(mid);
        if f.abs() <= ROOT_HEAD_TOL * 1e-2 || hi - lo < 1e-15 {
            return Ok(mid);
        }
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    if residual(mid).abs() > ROOT_HEAD_TOL {
        // Newton polish; the bisection interval is already at machine precision.
        let slope = pump_head_slope(mid, speed, pump) - 2.0 * pipe.friction_coefficient() * mid;
        return Ok(mid - residual(mid) / slope);
    }
    Ok(mid)
}

/// Shaft power (kW) at discharge `q` and normalized speed `speed`.
pub fn pump_power(q: f64, speed: f64, pump: &Pump) -> f64 {
    if speed <= 0.0 {
        return 0.0;
    }
    let [a1, a2, a3, a4] = pump.power_coeffs;
    a1 * q.powi(3) + a2 * speed * q * q + a3 * speed * speed * q + a4 * speed.powi(3)
}

/// Closed interval of running speeds, rpm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedInterval {
    pub lower: f64,
    pub upper: f64,
}

impl SpeedInterval {
    pub fn contains(&self, rpm: f64) -> bool {
        rpm >= self.lower && rpm <= self.upper
    }

    pub fn clamp(&self, rpm: f64) -> f64 {
        rpm.clamp(self.lower, self.upper)
    }
}

/// Whether running at `rpm` against `static_head` is inside the pump's
/// admissible operating region.
pub fn is_feasible_speed(rpm: f64, static_head: f64, pump: &Pump, pipe: &PipeSection) -> bool {
    let (n_min, n_max) = pump.speed_bounds;
    if rpm < n_min - 1e-12 || rpm > n_max + 1e-12 {
        return false;
    }
    let speed = pump.normalized(rpm);
    let Ok(q) = solve_pump_operating_point(speed, static_head, pump, pipe) else {
        return false;
    };
    let region = &pump.feasible;
    let head = demand_head(q, static_head, pipe);
    q >= region.min_discharge
        && q / speed <= region.runout_discharge
        && pump_power(q, speed, pump) <= region.max_power
        && head >= region.head_range.0
        && head <= region.head_range.1
}

const SPEED_SCAN_STEP: f64 = 0.5;

/// Running speeds whose operating point lies in the feasible region, or
/// `None` when the pump has to stay off at this static head.
pub fn feasible_speed_interval(static_head: f64, pump: &Pump, pipe: &PipeSection) -> Option<SpeedInterval> {
    let (n_min, n_max) = pump.speed_bounds;
    let steps = ((n_max - n_min) / SPEED_SCAN_STEP).ceil().max(1.0) as usize;
    let grid = |i: usize| (n_min + i as f64 * SPEED_SCAN_STEP).min(n_max);
    let ok = |rpm: f64| is_feasible_speed(rpm, static_head, pump, pipe);

    let first = (0..=steps).find(|&i| ok(grid(i)))?;
    let last = (first..=steps).rev().find(|&i| ok(grid(i)))?;

    let refine = |mut inside: f64, mut outside: f64| {
        for _ in 0..60 {
            let mid = 0.5 * (inside + outside);
            if ok(mid) {
                inside = mid;
            } else {
                outside = mid;
            }
            if (inside - outside).abs() < 1e-9 {
                break;
            }
        }
        inside
    };
    let lower = if first == 0 { n_min } else { refine(grid(first), grid(first - 1)) };
    let upper = if last == steps { n_max } else { refine(grid(last), grid(last + 1)) };
    Some(SpeedInterval { lower, upper })
}
