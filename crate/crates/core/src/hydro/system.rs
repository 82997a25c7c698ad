use serde::{Deserialize, Serialize};

use super::structures::{Branch, FlowDirection, PipeSection, Pump, SluiceGate, Weir, DEFAULT_GRAVITY};
use crate::error::{Error, Result};

/// A pumping station: one sluice gate and a set of pumps connecting a branch
/// to an external river.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub branch: usize,
    /// Index into `Disturbance::river_levels`. Defaults to the station index.
    #[serde(default)]
    pub river: Option<usize>,
    pub gate: SluiceGate,
    #[serde(default)]
    pub pumps: Vec<Pump>,
    #[serde(default)]
    pub pipe: PipeSection,
}

/// Full plant description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaterSystemConfig {
    pub branches: Vec<Branch>,
    pub weirs: Vec<Weir>,
    pub stations: Vec<Station>,
    /// Controller sampling period, s.
    pub sampling_period: f64,
    /// Integrator sub-step, s.
    #[serde(default = "default_substep")]
    pub substep: f64,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
}

fn default_substep() -> f64 {
    60.0
}

fn default_gravity() -> f64 {
    DEFAULT_GRAVITY
}

/// Known external disturbances at one sampling instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    /// One external river level per station, m.
    pub river_levels: Vec<f64>,
    /// Disturbance inflow per branch, m³/s.
    pub inflows: Vec<f64>,
}

impl Disturbance {
    pub fn zeros(config: &WaterSystemConfig) -> Self {
        Self {
            river_levels: vec![0.0; config.stations.len()],
            inflows: vec![0.0; config.branches.len()],
        }
    }

    /// Flattened `[river_levels, inflows]`, the CSV/log layout.
    pub fn to_vec(&self) -> Vec<f64> {
        self.river_levels.iter().chain(&self.inflows).copied().collect()
    }

    pub fn from_slice(values: &[f64], rivers: usize) -> Self {
        Self {
            river_levels: values[..rivers].to_vec(),
            inflows: values[rivers..].to_vec(),
        }
    }

    pub fn validate(&self, config: &WaterSystemConfig) -> Result<()> {
        if self.river_levels.len() != config.stations.len() || self.inflows.len() != config.branches.len() {
            return Err(Error::dims(format!(
                "disturbance has {} river levels and {} inflows, config expects {} and {}",
                self.river_levels.len(),
                self.inflows.len(),
                config.stations.len(),
                config.branches.len()
            )));
        }
        if self.inflows.iter().chain(&self.river_levels).any(|v| !v.is_finite()) {
            return Err(Error::config("disturbance contains non-finite values"));
        }
        Ok(())
    }
}

/// Which control input sits where in the flat input vector.
///
/// Inputs are ordered `[weir heights, gate ratios, pump speeds (rpm)]`; the
/// first two groups are the continuous inputs, the pumps the disjoint ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputLayout {
    pub weirs: usize,
    pub gates: usize,
    pub pumps: usize,
}

impl InputLayout {
    pub fn dim(&self) -> usize {
        self.weirs + self.gates + self.pumps
    }

    pub fn continuous(&self) -> usize {
        self.weirs + self.gates
    }

    pub fn weir(&self, i: usize) -> usize {
        i
    }

    pub fn gate(&self, i: usize) -> usize {
        self.weirs + i
    }

    pub fn pump(&self, i: usize) -> usize {
        self.weirs + self.gates + i
    }
}

/// A pump together with where it lives in the plant.
#[derive(Debug, Clone, Copy)]
pub struct PumpRef<'a> {
    pub station: usize,
    pub pump: &'a Pump,
    pub pipe: &'a PipeSection,
}

impl WaterSystemConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut config: Self = toml::from_str(text)?;
        config.normalize();
        config.validate()?;
        Ok(config)
    }

    /// Fill derived references (gate/pump branch and river ids).
    pub fn normalize(&mut self) {
        for (s, station) in self.stations.iter_mut().enumerate() {
            let river = *station.river.get_or_insert(s);
            station.gate.branch = station.branch;
            station.gate.river = river;
            for pump in &mut station.pumps {
                pump.branch = station.branch;
                pump.river = river;
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nb = self.branches.len();
        if nb == 0 {
            return Err(Error::config("no branches"));
        }
        for (i, b) in self.branches.iter().enumerate() {
            if !(b.backwater_area > 0.0) || !b.level_center.is_finite() {
                return Err(Error::config(format!("branch {i}: backwater area must be positive")));
            }
        }
        for (i, w) in self.weirs.iter().enumerate() {
            if w.upstream >= nb || w.downstream >= nb || w.upstream == w.downstream {
                return Err(Error::config(format!("weir {i} references invalid branches")));
            }
            if !(w.discharge_coeff > 0.0 && w.discharge_coeff <= 1.0) || !(w.crest_width > 0.0) {
                return Err(Error::config(format!("weir {i}: bad coefficient or width")));
            }
            if !(w.height_bounds.0 < w.height_bounds.1) {
                return Err(Error::config(format!("weir {i}: min height must be below max")));
            }
        }
        // Weir graph must be a forest: no branch can be reached twice.
        let mut parent: Vec<usize> = (0..nb).collect();
        fn root(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for (i, w) in self.weirs.iter().enumerate() {
            let (a, b) = (root(&mut parent, w.upstream), root(&mut parent, w.downstream));
            if a == b {
                return Err(Error::config(format!("weir {i} closes a loop in the weir graph")));
            }
            parent[a] = b;
        }
        let rivers = self.stations.len();
        for (s, st) in self.stations.iter().enumerate() {
            if st.branch >= nb {
                return Err(Error::config(format!("station {s} references branch {}", st.branch)));
            }
            let river = st.river.unwrap_or(s);
            if river >= rivers {
                return Err(Error::config(format!("station {s} references river {river}")));
            }
            let g = &st.gate;
            if !(g.discharge_coeff > 0.0 && g.discharge_coeff <= 1.0) || !(g.width > 0.0) || !(g.max_opening > 0.0) {
                return Err(Error::config(format!("station {s}: bad gate parameters")));
            }
            let p = &st.pipe;
            if !(p.darcy_friction > 0.0 && p.length > 0.0 && p.inner_diameter > 0.0 && p.gravity > 0.0)
                || p.minor_loss_sum < 0.0
            {
                return Err(Error::config(format!("station {s}: bad pipe parameters")));
            }
            for (k, pump) in st.pumps.iter().enumerate() {
                let (lo, hi) = pump.speed_bounds;
                if !(lo > 0.0 && lo < hi && hi <= pump.nominal_speed) {
                    return Err(Error::config(format!("station {s} pump {k}: bad speed bounds")));
                }
                if pump.feasible.min_discharge < 0.0 {
                    return Err(Error::config(format!("station {s} pump {k}: negative min discharge")));
                }
                // strictly decreasing nominal curve over the running region
                let qmax = pump.feasible.runout_discharge;
                let mut prev = f64::INFINITY;
                for j in 0..=100 {
                    let q = qmax * j as f64 / 100.0;
                    let h = super::structures::pump_head_capacity(q, 1.0, pump);
                    if j > 0 && h >= prev {
                        return Err(Error::config(format!(
                            "station {s} pump {k}: H-Q curve must be strictly decreasing"
                        )));
                    }
                    prev = h;
                }
            }
        }
        if !(self.substep > 0.0 && self.sampling_period > 0.0) {
            return Err(Error::config("sampling period and sub-step must be positive"));
        }
        let ratio = self.sampling_period / self.substep;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::config("sampling period must be an integer multiple of the sub-step"));
        }
        Ok(())
    }

    pub fn layout(&self) -> InputLayout {
        InputLayout {
            weirs: self.weirs.len(),
            gates: self.stations.len(),
            pumps: self.stations.iter().map(|s| s.pumps.len()).sum(),
        }
    }

    pub fn outputs(&self) -> usize {
        self.branches.len()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.level_center).collect()
    }

    /// Pumps in input order.
    pub fn pumps(&self) -> Vec<PumpRef<'_>> {
        self.stations
            .iter()
            .enumerate()
            .flat_map(|(s, st)| st.pumps.iter().map(move |pump| PumpRef { station: s, pump, pipe: &st.pipe }))
            .collect()
    }

    pub fn substeps(&self) -> usize {
        (self.sampling_period / self.substep).round() as usize
    }

    /// Sampling period in hours, the unit energy is accounted in.
    pub fn period_hours(&self) -> f64 {
        self.sampling_period / 3600.0
    }

    pub fn river_of(&self, station: usize) -> usize {
        self.stations[station].river.unwrap_or(station)
    }

    /// Directions of the devices attached to each station, used by the rule
    /// based controllers.
    pub fn station_pumps(&self, station: usize, direction: FlowDirection) -> Vec<usize> {
        let layout = self.layout();
        let offset: usize = self.stations[..station].iter().map(|s| s.pumps.len()).sum();
        self.stations[station]
            .pumps
            .iter()
            .enumerate()
            .filter(|(_, p)| p.direction == direction)
            .map(|(k, _)| layout.pump(offset + k))
            .collect()
    }
}
