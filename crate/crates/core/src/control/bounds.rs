use serde::{Deserialize, Serialize};

use crate::hydro::{
    feasible_speed_interval, gate_may_open, static_head, Disturbance, SpeedInterval, WaterSystemConfig,
};

/// Input constraint set for one control instant, held over the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputBounds {
    /// Bounds of the continuous inputs (weir heights, then gate ratios).
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Running interval of each pump, `None` when it must stay off.
    pub pumps: Vec<Option<SpeedInterval>>,
    /// Static head each pump works against at the measured levels.
    pub static_heads: Vec<f64>,
}

impl InputBounds {
    /// Whether the full input vector (continuous then pumps) respects the set.
    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        let nc = self.lower.len();
        let cont = (0..nc).all(|i| u[i] >= self.lower[i] - tol && u[i] <= self.upper[i] + tol);
        let pumps = self.pumps.iter().enumerate().all(|(k, iv)| {
            let v = u[nc + k];
            v == 0.0 || iv.is_some_and(|iv| v >= iv.lower - tol && v <= iv.upper + tol)
        });
        cont && pumps
    }
}

/// Build the time-varying input set from the measured levels and disturbance.
///
/// Weir heights are confined to the physical range intersected with the
/// interval spanned by the two adjacent levels; gates whose check valve is
/// closed get an upper bound of zero; pumps get their feasible speed interval
/// at the current static head.
pub fn build_input_bounds(config: &WaterSystemConfig, levels: &[f64], disturbance: &Disturbance) -> InputBounds {
    let layout = config.layout();
    let mut lower = Vec::with_capacity(layout.continuous());
    let mut upper = Vec::with_capacity(layout.continuous());
    for w in &config.weirs {
        let (a, b) = (levels[w.upstream], levels[w.downstream]);
        let (lo, hi) = w.height_bounds;
        let l = a.min(b).max(lo);
        let u = a.max(b).min(hi);
        if l <= u {
            lower.push(l);
            upper.push(u);
        } else {
            // Both levels outside the physical range: pin to the nearest bound.
            let v = if a.max(b) < lo { lo } else { hi };
            lower.push(v);
            upper.push(v);
        }
    }
    for (s, st) in config.stations.iter().enumerate() {
        let river = disturbance.river_levels[config.river_of(s)];
        lower.push(0.0);
        upper.push(if gate_may_open(levels[st.branch], river, st.gate.direction) { 1.0 } else { 0.0 });
    }
    let mut pumps = Vec::with_capacity(layout.pumps);
    let mut static_heads = Vec::with_capacity(layout.pumps);
    for pr in config.pumps() {
        let st = &config.stations[pr.station];
        let hs = static_head(levels[st.branch], disturbance.river_levels[config.river_of(pr.station)], pr.pump.direction);
        static_heads.push(hs);
        pumps.push(feasible_speed_interval(hs, pr.pump, pr.pipe));
    }
    InputBounds { lower, upper, pumps, static_heads }
}
