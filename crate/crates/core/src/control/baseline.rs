//! Rule-based controllers: passive hysteresis control and the PI bootstrap
//! used to warm up the data-driven controller.

use serde::{Deserialize, Serialize};

use super::bounds::{build_input_bounds, InputBounds};
use super::zone::ZoneSpec;
use crate::hydro::{gate_may_open, Disturbance, FlowDirection, WaterSystemConfig};

/// Fixed speed of pumps run by the rule-based controllers, rpm.
pub const PASSIVE_PUMP_SPEED: f64 = 120.0;
/// Fixed gate opening ratio of the rule-based controllers.
pub const PASSIVE_GATE_RATIO: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StationMode {
    Idle,
    Filling,
    Draining,
}

/// Hysteresis rules per station: start filling below the desired zone and
/// stop once the level is back at the center; likewise for draining above it.
/// The gate is used when its check valve allows flow in the needed
/// direction, otherwise the pumps of that direction run at fixed speed.
#[derive(Debug, Clone)]
pub struct PassiveController {
    plant: WaterSystemConfig,
    zone: ZoneSpec,
    modes: Vec<StationMode>,
}

impl PassiveController {
    pub fn new(plant: WaterSystemConfig, zone: ZoneSpec) -> Self {
        let modes = vec![StationMode::Idle; plant.stations.len()];
        Self { plant, zone, modes }
    }

    pub fn modes(&self) -> &[StationMode] {
        &self.modes
    }

    fn can_move(&self, station: usize, dir: FlowDirection) -> bool {
        let st = &self.plant.stations[station];
        st.gate.direction == dir || st.pumps.iter().any(|p| p.direction == dir)
    }

    fn update_modes(&mut self, levels: &[f64]) {
        for s in 0..self.plant.stations.len() {
            let b = self.plant.stations[s].branch;
            let (y, c, hw) = (levels[b], self.zone.center[b], self.zone.half_width);
            self.modes[s] = match self.modes[s] {
                StationMode::Idle if y < c - hw && self.can_move(s, FlowDirection::Inflow) => StationMode::Filling,
                StationMode::Idle if y > c + hw && self.can_move(s, FlowDirection::Outflow) => StationMode::Draining,
                StationMode::Filling if y >= c => StationMode::Idle,
                StationMode::Draining if y <= c => StationMode::Idle,
                mode => mode,
            };
        }
    }

    /// Gate and pump settings for the current station modes.
    pub(crate) fn station_inputs(&self, levels: &[f64], d: &Disturbance, bounds: &InputBounds, u: &mut [f64]) {
        let layout = self.plant.layout();
        let mut pump_offset = 0;
        for (s, st) in self.plant.stations.iter().enumerate() {
            let dir = match self.modes[s] {
                StationMode::Idle => None,
                StationMode::Filling => Some(FlowDirection::Inflow),
                StationMode::Draining => Some(FlowDirection::Outflow),
            };
            let river = d.river_levels[self.plant.river_of(s)];
            let gate_idx = layout.gate(s);
            u[gate_idx] = 0.0;
            for k in 0..st.pumps.len() {
                u[layout.pump(pump_offset + k)] = 0.0;
            }
            if let Some(dir) = dir {
                if st.gate.direction == dir && gate_may_open(levels[st.branch], river, dir) {
                    u[gate_idx] = PASSIVE_GATE_RATIO.min(bounds.upper[gate_idx]);
                } else {
                    for (k, pump) in st.pumps.iter().enumerate() {
                        if pump.direction != dir {
                            continue;
                        }
                        if let Some(iv) = bounds.pumps[pump_offset + k] {
                            u[layout.pump(pump_offset + k)] = iv.clamp(PASSIVE_PUMP_SPEED);
                        }
                    }
                }
            }
            pump_offset += st.pumps.len();
        }
    }

    pub fn step(&mut self, levels: &[f64], d: &Disturbance) -> Vec<f64> {
        self.update_modes(levels);
        let bounds = build_input_bounds(&self.plant, levels, d);
        let mut u = vec![0.0; self.plant.layout().dim()];
        for (i, w) in self.plant.weirs.iter().enumerate() {
            let target = self.zone.center[w.upstream] - self.zone.half_width;
            u[i] = target.clamp(bounds.lower[i], bounds.upper[i]);
        }
        self.station_inputs(levels, d, &bounds, &mut u);
        u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PidGains {
    pub proportional: f64,
    pub integral: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self { proportional: 1.0, integral: 0.1 }
    }
}

/// PI control of each weir on its upstream level; stations follow the
/// passive rules.
#[derive(Debug, Clone)]
pub struct PidBootstrap {
    passive: PassiveController,
    gains: PidGains,
    integral: Vec<f64>,
}

impl PidBootstrap {
    pub fn new(plant: WaterSystemConfig, zone: ZoneSpec, gains: PidGains) -> Self {
        let n = plant.weirs.len();
        Self { passive: PassiveController::new(plant, zone), gains, integral: vec![0.0; n] }
    }

    /// Correction added to each weir's base height at the given levels,
    /// without updating the integrator.
    pub fn correction(&self, levels: &[f64]) -> Vec<f64> {
        let p = &self.passive;
        p.plant
            .weirs
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let e = p.zone.center[w.upstream] - levels[w.upstream];
                self.gains.proportional * e + self.gains.integral * self.integral[i]
            })
            .collect()
    }

    pub fn step(&mut self, levels: &[f64], d: &Disturbance) -> Vec<f64> {
        self.passive.update_modes(levels);
        let plant = &self.passive.plant;
        let zone = &self.passive.zone;
        let bounds = build_input_bounds(plant, levels, d);
        for (i, w) in plant.weirs.iter().enumerate() {
            self.integral[i] += zone.center[w.upstream] - levels[w.upstream];
        }
        let corr = self.correction(levels);
        let mut u = vec![0.0; plant.layout().dim()];
        for (i, w) in plant.weirs.iter().enumerate() {
            let base = zone.center[w.upstream] - zone.half_width;
            u[i] = (base + corr[i]).clamp(bounds.lower[i], bounds.upper[i]);
        }
        self.passive.station_inputs(levels, d, &bounds, &mut u);
        u
    }
}
