use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::hydro::{pump_power, solve_pump_operating_point, PipeSection, Pump, SpeedInterval};

/// Cubic least-squares fit of pump power (kW) against speed (rpm) on the
/// running interval at a fixed static head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSurrogate {
    pub interval: SpeedInterval,
    /// Coefficients in the scaled coordinate `s = (rpm - mid) / half`.
    pub coeffs: [f64; 4],
    /// Largest absolute fit error over the samples, kW.
    pub max_fit_error: f64,
    mid: f64,
    half: f64,
}

/// Exact shaft power at `rpm`, resolving the operating point.
pub fn exact_power(rpm: f64, static_head: f64, pump: &Pump, pipe: &PipeSection) -> f64 {
    let speed = pump.normalized(rpm);
    let q = solve_pump_operating_point(speed, static_head, pump, pipe).unwrap_or(0.0);
    pump_power(q, speed, pump)
}

impl PowerSurrogate {
    pub fn fit(interval: SpeedInterval, static_head: f64, pump: &Pump, pipe: &PipeSection, samples: usize) -> Self {
        let mid = 0.5 * (interval.lower + interval.upper);
        let half = (0.5 * (interval.upper - interval.lower)).max(1e-6);
        let n = samples.max(4);
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let rpm = interval.lower + (interval.upper - interval.lower) * i as f64 / (n - 1) as f64;
                ((rpm - mid) / half, exact_power(rpm, static_head, pump, pipe))
            })
            .collect();
        let a = DMatrix::from_fn(n, 4, |r, c| pts[r].0.powi(c as i32));
        let b = DVector::from_iterator(n, pts.iter().map(|p| p.1));
        let sol = a
            .clone()
            .svd(true, true)
            .solve(&b, 1e-12)
            .unwrap_or_else(|_| DVector::from_element(4, b.mean()));
        let coeffs = [sol[0], sol[1], sol[2], sol[3]];
        let mut me = Self { interval, coeffs, max_fit_error: 0.0, mid, half };
        me.max_fit_error = pts.iter().map(|&(s, p)| (me.eval_scaled(s) - p).abs()).fold(0.0, f64::max);
        me
    }

    fn eval_scaled(&self, s: f64) -> f64 {
        let c = &self.coeffs;
        c[0] + s * (c[1] + s * (c[2] + s * c[3]))
    }

    /// Power at `rpm`, kW.
    pub fn value(&self, rpm: f64) -> f64 {
        self.eval_scaled((rpm - self.mid) / self.half)
    }

    /// d power / d rpm.
    pub fn slope(&self, rpm: f64) -> f64 {
        let s = (rpm - self.mid) / self.half;
        let c = &self.coeffs;
        (c[1] + s * (2.0 * c[2] + 3.0 * s * c[3])) / self.half
    }

    /// d² power / d rpm².
    pub fn curvature(&self, rpm: f64) -> f64 {
        let s = (rpm - self.mid) / self.half;
        (2.0 * self.coeffs[2] + 6.0 * s * self.coeffs[3]) / (self.half * self.half)
    }

    /// Smallest surrogate power over the interval.
    pub fn min_value(&self) -> f64 {
        let c = &self.coeffs;
        let mut candidates = vec![-1.0, 1.0];
        // stationary points of the cubic in the scaled coordinate
        let (a, b, cc) = (3.0 * c[3], 2.0 * c[2], c[1]);
        if a.abs() > 1e-300 {
            let disc = b * b - 4.0 * a * cc;
            if disc >= 0.0 {
                candidates.push((-b + disc.sqrt()) / (2.0 * a));
                candidates.push((-b - disc.sqrt()) / (2.0 * a));
            }
        } else if b.abs() > 1e-300 {
            candidates.push(-cc / b);
        }
        candidates
            .into_iter()
            .filter(|s| (-1.0..=1.0).contains(s))
            .map(|s| self.eval_scaled(s))
            .fold(f64::INFINITY, f64::min)
    }
}
