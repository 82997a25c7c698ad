//! Branch storage dynamics integrated over one sampling period.

use serde::{Deserialize, Serialize};

use super::structures::{gate_discharge, pump_power, solve_pump_operating_point, static_head, weir_discharge};
use super::system::{Disturbance, WaterSystemConfig};
use crate::error::{Error, Result};

/// Diagnostics from one simulated sampling period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFlows {
    /// Input actually applied after clamping to the physical and free-flow sets.
    pub applied: Vec<f64>,
    /// Indices of inputs that had to be clamped.
    pub clamped: Vec<usize>,
    /// Integrated net inflow volume per branch over the period, m³.
    pub net_volume: Vec<f64>,
    /// Period-averaged discharge of each pump, m³/s.
    pub pump_discharge: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub levels: Vec<f64>,
    /// Pump energy over the period, kWh.
    pub energy_kwh: f64,
    pub flows: StepFlows,
}

/// Clamp `input` into the physical set and, for weirs, into the free-flow
/// interval spanned by the adjacent levels. Returns the clamped vector and
/// the indices that changed.
pub fn clamp_input(config: &WaterSystemConfig, levels: &[f64], input: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let layout = config.layout();
    let mut u = input.to_vec();
    for (i, w) in config.weirs.iter().enumerate() {
        let (a, b) = (levels[w.upstream], levels[w.downstream]);
        let j = layout.weir(i);
        let (lo, hi) = w.height_bounds;
        let free = u[j].clamp(a.min(b), a.max(b));
        u[j] = free.clamp(lo, hi);
    }
    for s in 0..layout.gates {
        let j = layout.gate(s);
        u[j] = u[j].clamp(0.0, 1.0);
    }
    for (k, pr) in config.pumps().iter().enumerate() {
        let j = layout.pump(k);
        if u[j] <= 0.0 {
            u[j] = 0.0;
        } else {
            let (lo, hi) = pr.pump.speed_bounds;
            u[j] = u[j].clamp(lo, hi);
        }
    }
    let clamped = (0..u.len()).filter(|&j| (u[j] - input[j]).abs() > 1e-12).collect();
    (u, clamped)
}

struct Rates {
    dh: Vec<f64>,
    flow: Vec<f64>,
    pump_q: Vec<f64>,
    power: f64,
}

fn rates(config: &WaterSystemConfig, h: &[f64], u: &[f64], d: &Disturbance) -> Result<Rates> {
    let layout = config.layout();
    let g = config.gravity;
    let mut flow = d.inflows.clone();
    for (i, w) in config.weirs.iter().enumerate() {
        let (hu, hd) = (h[w.upstream], h[w.downstream]);
        let q = weir_discharge(hu.max(hd), u[layout.weir(i)], w, g);
        let (from, to) = if hu >= hd { (w.upstream, w.downstream) } else { (w.downstream, w.upstream) };
        flow[from] -= q;
        flow[to] += q;
    }
    for (s, st) in config.stations.iter().enumerate() {
        let hr = d.river_levels[config.river_of(s)];
        let q = gate_discharge(h[st.branch], hr, u[layout.gate(s)], &st.gate, g);
        flow[st.branch] += st.gate.direction.sign() * q;
    }
    let mut pump_q = Vec::with_capacity(layout.pumps);
    let mut power = 0.0;
    for (k, pr) in config.pumps().into_iter().enumerate() {
        let st = &config.stations[pr.station];
        let speed = pr.pump.normalized(u[layout.pump(k)]);
        let hs = static_head(h[st.branch], d.river_levels[config.river_of(pr.station)], pr.pump.direction);
        let q = match solve_pump_operating_point(speed, hs, pr.pump, pr.pipe) {
            Ok(q) => q,
            Err(Error::NoIntersection { .. }) => 0.0,
            Err(e) => return Err(e),
        };
        flow[st.branch] += pr.pump.direction.sign() * q;
        power += pump_power(q, speed, pr.pump);
        pump_q.push(q);
    }
    let dh = flow.iter().zip(&config.branches).map(|(q, b)| q / b.backwater_area).collect();
    Ok(Rates { dh, flow, pump_q, power })
}

/// Advance the plant by one sampling period with fixed-step RK4.
///
/// Flows are re-evaluated from the current levels at every stage, so pump
/// operating points follow the changing static head within the period.
pub fn step(config: &WaterSystemConfig, levels: &[f64], input: &[f64], disturbance: &Disturbance) -> Result<StepOutcome> {
    let nb = config.branches.len();
    let layout = config.layout();
    if levels.len() != nb || input.len() != layout.dim() {
        return Err(Error::dims(format!(
            "step expects {nb} levels and {} inputs, got {} and {}",
            layout.dim(),
            levels.len(),
            input.len()
        )));
    }
    disturbance.validate(config)?;
    let (u, clamped) = clamp_input(config, levels, input);

    let n = config.substeps();
    let h_sub = config.substep;
    let mut h = levels.to_vec();
    let mut volume = vec![0.0; nb];
    let mut pump_q = vec![0.0; layout.pumps];
    let mut energy_ks = 0.0; // kW·s
    let shifted = |base: &[f64], k: &[f64], a: f64| -> Vec<f64> { base.iter().zip(k).map(|(x, d)| x + a * d).collect() };

    for _ in 0..n {
        let r1 = rates(config, &h, &u, disturbance)?;
        let r2 = rates(config, &shifted(&h, &r1.dh, 0.5 * h_sub), &u, disturbance)?;
        let r3 = rates(config, &shifted(&h, &r2.dh, 0.5 * h_sub), &u, disturbance)?;
        let r4 = rates(config, &shifted(&h, &r3.dh, h_sub), &u, disturbance)?;
        let w = h_sub / 6.0;
        for b in 0..nb {
            let dq = r1.flow[b] + 2.0 * r2.flow[b] + 2.0 * r3.flow[b] + r4.flow[b];
            volume[b] += w * dq;
            h[b] += w * (r1.dh[b] + 2.0 * r2.dh[b] + 2.0 * r3.dh[b] + r4.dh[b]);
            if !h[b].is_finite() {
                return Err(Error::NonFiniteState { branch: b });
            }
        }
        for k in 0..layout.pumps {
            pump_q[k] += w * (r1.pump_q[k] + 2.0 * r2.pump_q[k] + 2.0 * r3.pump_q[k] + r4.pump_q[k]);
        }
        energy_ks += w * (r1.power + 2.0 * r2.power + 2.0 * r3.power + r4.power);
    }
    for q in &mut pump_q {
        *q /= config.sampling_period;
    }
    Ok(StepOutcome {
        levels: h,
        energy_kwh: energy_ks / 3600.0,
        flows: StepFlows { applied: u, clamped, net_volume: volume, pump_discharge: pump_q },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hydro::structures::{Branch, FlowDirection, PipeSection, Pump, SluiceGate};
    use crate::hydro::system::Station;

    fn single_branch() -> WaterSystemConfig {
        let mut cfg = WaterSystemConfig {
            branches: vec![Branch { backwater_area: 2.0e5, level_center: 9.0 }],
            weirs: vec![],
            stations: vec![Station {
                branch: 0,
                river: None,
                gate: SluiceGate {
                    branch: 0,
                    river: 0,
                    discharge_coeff: 0.61,
                    width: 5.0,
                    max_opening: 0.6,
                    direction: FlowDirection::Outflow,
                },
                pumps: vec![Pump::with_direction(FlowDirection::Outflow)],
                pipe: PipeSection::default(),
            }],
            sampling_period: 1800.0,
            substep: 60.0,
            gravity: 9.81,
        };
        cfg.normalize();
        cfg.validate().unwrap();
        cfg
    }

    #[test]
    fn constant_inflow_is_linear_storage() {
        let cfg = single_branch();
        let d = Disturbance { river_levels: vec![9.0], inflows: vec![3.0] };
        let out = step(&cfg, &[9.0], &[0.0, 0.0], &d).unwrap();
        let expected = 9.0 + 3.0 * 1800.0 / 2.0e5;
        assert!((out.levels[0] - expected).abs() < 1e-12);
        assert_eq!(out.energy_kwh, 0.0);
    }

    #[test]
    fn pump_drains_branch_and_uses_energy() {
        let cfg = single_branch();
        let d = Disturbance { river_levels: vec![11.0], inflows: vec![0.0] };
        let out = step(&cfg, &[9.0], &[0.0, 200.0], &d).unwrap();
        assert!(out.levels[0] < 9.0);
        assert!(out.energy_kwh > 0.0);
        let dv = (out.levels[0] - 9.0) * 2.0e5;
        assert!((dv - out.flows.net_volume[0]).abs() < 1e-6);
    }

    #[test]
    fn clamps_pump_speed_into_bounds() {
        let cfg = single_branch();
        let d = Disturbance { river_levels: vec![11.0], inflows: vec![0.0] };
        let out = step(&cfg, &[9.0], &[1.5, 50.0], &d).unwrap();
        assert_eq!(out.flows.applied, vec![1.0, 120.0]);
        assert_eq!(out.flows.clamped, vec![0, 1]);
    }
}
