use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::build_input_bounds;
use crate::deepc::{check_persistent_excitation, ExcitationReport, TrajectoryData};
use crate::error::{Error, Result};
use crate::hydro::{gate_may_open, step, Disturbance, FlowDirection, WaterSystemConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollectionConfig {
    pub steps: usize,
    pub seed: u64,
    /// Random input levels are redrawn every `hold_steps` periods.
    pub hold_steps: usize,
    /// Probability that a pump is on in a hold window.
    pub pump_on_probability: f64,
    /// Deviation from the center that starts a corrective intervention, m.
    pub intervention_trigger: f64,
    /// Deviation below which an intervention ends, m.
    pub intervention_release: f64,
    /// Weir height change per period during an intervention, m.
    pub weir_rate: f64,
    /// Maximum allowed deviation from the center, m.
    pub max_deviation: f64,
}

impl Default for CollectionConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            seed: 7,
            hold_steps: 10,
            pump_on_probability: 0.5,
            intervention_trigger: 0.35,
            intervention_release: 0.15,
            weir_rate: 0.05,
            max_deviation: 0.5,
        }
    }
}

/// A period during which corrective rules overrode the random inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intervention {
    pub branch: usize,
    pub start: usize,
    /// Exclusive end step.
    pub end: usize,
    /// `true` when the branch was too high.
    pub too_high: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectedData {
    /// `outputs[t]` is the level at the end of period `t`, after `inputs[t]`.
    pub data: TrajectoryData,
    pub initial_levels: Vec<f64>,
    pub interventions: Vec<Intervention>,
    pub excitation: ExcitationReport,
    pub energy_kwh: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq)]
enum Correction {
    None,
    Lower,
    Raise,
}

/// Open-loop excitation with held random step inputs and corrective
/// interventions that keep every level within the allowed deviation.
pub fn collect_excitation_data(
    plant: &WaterSystemConfig,
    disturbances: &[Disturbance],
    initial_levels: &[f64],
    config: &CollectionConfig,
    excitation_order: usize,
) -> Result<CollectedData> {
    let steps = config.steps;
    if disturbances.len() < steps {
        return Err(Error::config(format!("collection needs {steps} disturbance samples, got {}", disturbances.len())));
    }
    let layout = plant.layout();
    let centers = plant.centers();
    let nb = plant.branches.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let pumps = plant.pumps();

    let mut levels = initial_levels.to_vec();
    let mut held = vec![0.0; layout.dim()];
    let mut held_frac = vec![0.0; layout.weirs];
    let mut prev_weir: Vec<f64> = plant.weirs.iter().map(|w| centers[w.upstream]).collect();
    let mut state = vec![Correction::None; nb];
    let mut open: Vec<Option<usize>> = vec![None; nb];
    let mut interventions = Vec::new();
    let mut data = TrajectoryData::default();
    let mut energy = Vec::with_capacity(steps);

    for t in 0..steps {
        let d = &disturbances[t];
        if t % config.hold_steps.max(1) == 0 {
            for f in held_frac.iter_mut() {
                *f = rng.random::<f64>();
            }
            for s in 0..layout.gates {
                held[layout.gate(s)] = rng.random::<f64>();
            }
            for (k, pr) in pumps.iter().enumerate() {
                let on = rng.random::<f64>() < config.pump_on_probability;
                let (lo, hi) = pr.pump.speed_bounds;
                held[layout.pump(k)] = if on { rng.random_range(lo..=hi) } else { 0.0 };
            }
        }
        // intervention state with hysteresis
        for b in 0..nb {
            let dev = levels[b] - centers[b];
            state[b] = match state[b] {
                Correction::None if dev > config.intervention_trigger => Correction::Lower,
                Correction::None if dev < -config.intervention_trigger => Correction::Raise,
                Correction::Lower if dev < config.intervention_release => Correction::None,
                Correction::Raise if dev > -config.intervention_release => Correction::None,
                s => s,
            };
            match (state[b], open[b]) {
                (Correction::None, Some(start)) => {
                    interventions.push(Intervention { branch: b, start, end: t, too_high: false });
                    open[b] = None;
                }
                (Correction::Lower | Correction::Raise, None) => open[b] = Some(t),
                _ => {}
            }
        }

        let bounds = build_input_bounds(plant, &levels, d);
        let mut u = held.clone();
        for (i, w) in plant.weirs.iter().enumerate() {
            let (lo, hi) = (bounds.lower[i], bounds.upper[i]);
            let mut v = lo + held_frac[i] * (hi - lo);
            let high_side = if levels[w.upstream] >= levels[w.downstream] { w.upstream } else { w.downstream };
            match state[high_side] {
                Correction::Lower => v = prev_weir[i] - config.weir_rate,
                Correction::Raise => v = prev_weir[i] + config.weir_rate,
                Correction::None => {}
            }
            u[i] = v.clamp(lo, hi);
        }
        let mut offset = 0;
        for (s, st) in plant.stations.iter().enumerate() {
            let allowed = match state[st.branch] {
                Correction::None => None,
                Correction::Lower => Some(FlowDirection::Outflow),
                Correction::Raise => Some(FlowDirection::Inflow),
            };
            let gi = layout.gate(s);
            let river = d.river_levels[plant.river_of(s)];
            u[gi] = match allowed {
                Some(dir) if dir != st.gate.direction => 0.0,
                Some(_) if gate_may_open(levels[st.branch], river, st.gate.direction) => u[gi].max(0.5),
                _ => u[gi],
            }
            .min(bounds.upper[gi]);
            for (k, pump) in st.pumps.iter().enumerate() {
                let idx = layout.pump(offset + k);
                let iv = bounds.pumps[offset + k];
                u[idx] = match (allowed, iv) {
                    (_, None) => 0.0,
                    (Some(dir), _) if dir != pump.direction => 0.0,
                    (Some(_), Some(iv)) => iv.clamp(u[idx].max(iv.lower)),
                    (None, Some(iv)) if u[idx] > 0.0 => iv.clamp(u[idx]),
                    _ => 0.0,
                };
            }
            offset += st.pumps.len();
        }

        let out = step(plant, &levels, &u, d)?;
        for (i, _) in plant.weirs.iter().enumerate() {
            prev_weir[i] = out.flows.applied[i];
        }
        levels = out.levels;
        for b in 0..nb {
            let excess = (levels[b] - centers[b]).abs() - config.max_deviation;
            if excess > 0.0 {
                return Err(Error::CollectionFailed { step: t, branch: b, excess });
            }
        }
        data.inputs.push(out.flows.applied);
        data.outputs.push(levels.clone());
        data.disturbances.push(d.to_vec());
        energy.push(out.energy_kwh);
    }
    for b in 0..nb {
        if let Some(start) = open[b] {
            interventions.push(Intervention { branch: b, start, end: steps, too_high: false });
        }
    }
    // Fill in the direction of each interval from the recorded levels.
    for iv in &mut interventions {
        let y = if iv.start == 0 { initial_levels[iv.branch] } else { data.outputs[iv.start - 1][iv.branch] };
        iv.too_high = y > centers[iv.branch];
    }
    interventions.sort_by_key(|iv| (iv.start, iv.branch));
    let excitation = check_persistent_excitation(&data.inputs, excitation_order);
    Ok(CollectedData { data, initial_levels: initial_levels.to_vec(), interventions, excitation, energy_kwh: energy })
}
