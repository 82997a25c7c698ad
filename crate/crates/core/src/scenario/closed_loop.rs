use std::io::Write;

use serde::{Deserialize, Serialize};

use super::metrics::SystemTrajectory;
use crate::control::{PassiveController, PidBootstrap, PidGains, SolveStatus, ZoneController, ZoneSpec};
use crate::error::{Error, Result};
use crate::hydro::{step, Disturbance, WaterSystemConfig};

/// What produced the input of a logged step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSource {
    Bootstrap,
    Passive,
    Optimal,
    BinaryBudgetExhausted,
    Stage1Fallback,
    PassiveFallback,
}

impl From<SolveStatus> for StepSource {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Optimal => Self::Optimal,
            SolveStatus::BinaryBudgetExhausted => Self::BinaryBudgetExhausted,
            SolveStatus::Stage1Fallback => Self::Stage1Fallback,
            SolveStatus::PassiveFallback => Self::PassiveFallback,
        }
    }
}

/// One line of the per-step log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub t: usize,
    /// Levels measured at the start of the step.
    pub y: Vec<f64>,
    /// Input applied over the step.
    pub u: Vec<f64>,
    pub d: Vec<f64>,
    pub zc_star: Option<f64>,
    pub stage2_cost: Option<f64>,
    pub stage2_zone_cost: Option<f64>,
    pub energy_kwh: f64,
    pub binaries: Vec<Vec<bool>>,
    pub solver_status: StepSource,
    pub combos_explored: usize,
    /// Whether every applied pump speed was 0 or inside that step's running interval.
    pub pumps_in_domain: bool,
}

#[derive(Debug, Clone)]
pub enum LoopPolicy {
    Passive,
    Zone(Box<ZoneController>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopRun {
    pub trajectory: SystemTrajectory,
    pub log: Vec<StepLog>,
}

impl ClosedLoopRun {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for line in &self.log {
            serde_json::to_writer(&mut w, line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(text: &str) -> Result<Vec<StepLog>> {
        text.lines().filter(|l| !l.trim().is_empty()).map(|l| Ok(serde_json::from_str(l)?)).collect()
    }
}

/// Run `bootstrap + steps` periods. The zone controller is preceded by
/// `bootstrap` PID steps that fill its history; the passive policy runs the
/// whole time.
#[allow(clippy::too_many_arguments)]
pub fn run_closed_loop(
    plant: &WaterSystemConfig,
    zone: &ZoneSpec,
    mut policy: LoopPolicy,
    pid: PidGains,
    disturbances: &[Disturbance],
    initial_levels: &[f64],
    bootstrap: usize,
    steps: usize,
) -> Result<ClosedLoopRun> {
    let total = bootstrap + steps;
    if disturbances.len() < total {
        return Err(Error::config(format!("closed loop needs {total} disturbance samples, got {}", disturbances.len())));
    }
    let layout = plant.layout();
    let mut levels = initial_levels.to_vec();
    let mut traj = SystemTrajectory::with_initial(levels.clone());
    let mut log = Vec::with_capacity(total);
    let mut pid_ctrl = PidBootstrap::new(plant.clone(), zone.clone(), pid);
    let mut passive = PassiveController::new(plant.clone(), zone.clone());
    if let LoopPolicy::Zone(c) = &mut policy {
        c.reset();
    }

    for (t, d) in disturbances.iter().enumerate().take(total) {
        let mut entry = StepLog {
            t,
            y: levels.clone(),
            u: Vec::new(),
            d: d.to_vec(),
            zc_star: None,
            stage2_cost: None,
            stage2_zone_cost: None,
            energy_kwh: 0.0,
            binaries: Vec::new(),
            solver_status: StepSource::Passive,
            combos_explored: 0,
            pumps_in_domain: true,
        };
        let input = match &mut policy {
            LoopPolicy::Passive => passive.step(&levels, d),
            LoopPolicy::Zone(_) if t < bootstrap => {
                entry.solver_status = StepSource::Bootstrap;
                pid_ctrl.step(&levels, d)
            }
            LoopPolicy::Zone(c) => {
                let out = c.control_step(&levels, d)?;
                entry.zc_star = out.zc_star;
                entry.stage2_cost = out.stage2_cost;
                entry.stage2_zone_cost = out.stage2_zone_cost;
                entry.binaries = out.binaries.clone();
                entry.solver_status = out.status.into();
                entry.combos_explored = out.combos_explored;
                entry.pumps_in_domain = (0..layout.pumps).all(|k| {
                    let v = out.input[layout.pump(k)];
                    v == 0.0 || out.bounds.pumps[k].is_some_and(|iv| iv.contains(v))
                });
                out.input
            }
        };
        let outcome = step(plant, &levels, &input, d).map_err(|e| match e {
            Error::NonFiniteState { branch } => {
                Error::SimulationFailed(format!("non-finite level in branch {branch} at step {t}"))
            }
            e => e,
        })?;
        if let LoopPolicy::Zone(c) = &mut policy {
            c.observe(&outcome.flows.applied, &outcome.levels);
        }
        if entry.binaries.is_empty() {
            entry.binaries = (0..layout.pumps).map(|k| vec![outcome.flows.applied[layout.pump(k)] > 0.0]).collect();
        }
        entry.u = outcome.flows.applied.clone();
        entry.energy_kwh = outcome.energy_kwh;
        traj.push(outcome.flows.applied, d.to_vec(), outcome.levels.clone(), outcome.energy_kwh);
        levels = outcome.levels;
        log.push(entry);
    }
    Ok(ClosedLoopRun { trajectory: traj, log })
}
