use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydro::{Disturbance, WaterSystemConfig};

/// Sinusoidal river level at one station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tide {
    pub mean: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "default_tide_period")]
    pub period_hours: f64,
    /// Phase offset, rad.
    #[serde(default)]
    pub phase: f64,
}

fn default_tide_period() -> f64 {
    12.42
}

/// Weather-driven inflow events: a triangular rise followed by an
/// exponential recession, peak proportional to the branch's backwater area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InflowEvents {
    /// Probability of an event starting in a branch at each step.
    pub rate: f64,
    /// Peak inflow per m² of backwater area, m³/s per m². Each event draws its
    /// peak uniformly from `[0.5, 1.0]` times this.
    pub peak_per_area: f64,
    pub rise_steps: usize,
    pub half_life_steps: f64,
    /// Constant base inflow per m² of backwater area.
    pub base_per_area: f64,
}

impl Default for InflowEvents {
    fn default() -> Self {
        Self { rate: 0.0, peak_per_area: 0.0, rise_steps: 3, half_life_steps: 5.0, base_per_area: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceScenario {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub steps: usize,
    /// One tide per station river.
    pub tides: Vec<Tide>,
    #[serde(default)]
    pub inflows: InflowEvents,
}

impl DisturbanceScenario {
    pub fn validate(&self, plant: &WaterSystemConfig) -> Result<()> {
        if self.tides.len() != plant.stations.len() {
            return Err(Error::config(format!(
                "scenario has {} tides, plant has {} stations",
                self.tides.len(),
                plant.stations.len()
            )));
        }
        if self.tides.iter().any(|t| t.amplitude < 0.0 || !(t.period_hours > 0.0)) {
            return Err(Error::config("tide amplitudes must be non-negative and periods positive"));
        }
        let ev = &self.inflows;
        if !(0.0..=1.0).contains(&ev.rate) || ev.peak_per_area < 0.0 || !(ev.half_life_steps > 0.0) {
            return Err(Error::config("bad inflow event parameters"));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// Parse a scenario file: either bare scenario fields or a `[scenario]`
    /// table as in an experiment config.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text)?;
        let value = match table.remove("scenario") {
            Some(v) => v,
            None => toml::Value::Table(table),
        };
        Ok(value.try_into()?)
    }

    pub fn with_steps(&self, steps: usize) -> Self {
        Self { steps, ..self.clone() }
    }
}

/// Event-shape weight `k` steps after onset (peak 1 at `rise_steps`).
fn event_shape(k: usize, rise: usize, half_life: f64) -> f64 {
    if k < rise {
        (k + 1) as f64 / (rise + 1) as f64
    } else {
        0.5_f64.powf((k - rise) as f64 / half_life)
    }
}

/// Disturbance sequence of length `scenario.steps`.
pub fn generate_disturbances(plant: &WaterSystemConfig, scenario: &DisturbanceScenario) -> Result<Vec<Disturbance>> {
    scenario.validate(plant)?;
    let dt_h = plant.period_hours();
    let nb = plant.branches.len();
    let ev = &scenario.inflows;
    let mut inflow = vec![vec![0.0; nb]; scenario.steps];
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    // Events cut off once they decay below 0.1 % of their peak.
    let tail = ev.rise_steps + (ev.half_life_steps * 10.0).ceil() as usize;
    for t in 0..scenario.steps {
        for (b, branch) in plant.branches.iter().enumerate() {
            if ev.rate > 0.0 && rng.random::<f64>() < ev.rate {
                let peak = ev.peak_per_area * branch.backwater_area * rng.random_range(0.5..=1.0);
                for k in 0..=tail {
                    if t + k >= scenario.steps {
                        break;
                    }
                    inflow[t + k][b] += peak * event_shape(k, ev.rise_steps, ev.half_life_steps);
                }
            }
        }
    }
    Ok((0..scenario.steps)
        .map(|t| {
            let hours = t as f64 * dt_h;
            let river_levels = scenario
                .tides
                .iter()
                .map(|tide| {
                    tide.mean + tide.amplitude * (2.0 * std::f64::consts::PI * hours / tide.period_hours + tide.phase).sin()
                })
                .collect();
            let inflows = plant
                .branches
                .iter()
                .enumerate()
                .map(|(b, br)| ev.base_per_area * br.backwater_area + inflow[t][b])
                .collect();
            Disturbance { river_levels, inflows }
        })
        .collect())
}
