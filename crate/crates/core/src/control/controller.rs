use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::baseline::PassiveController;
use super::bounds::{build_input_bounds, InputBounds};
use super::config::ControllerConfig;
use super::stage::{SolveStatus, StageContext, StageSolution};
use super::surrogate::PowerSurrogate;
use super::zone::ZoneSpec;
use crate::deepc::{ChannelScaling, GammaPredictor, TrajectoryData};
use crate::error::{Error, Result};
use crate::hydro::{Disturbance, WaterSystemConfig};

/// What the controller decided at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlOutcome {
    pub input: Vec<f64>,
    pub zc_star: Option<f64>,
    /// Stage-2 objective (energy plus regularization).
    pub stage2_cost: Option<f64>,
    /// Zone tracking cost of the stage-2 solution.
    pub stage2_zone_cost: Option<f64>,
    /// Surrogate horizon energy of the stage-1 and stage-2 solutions, kWh.
    pub stage1_energy: Option<f64>,
    pub stage2_energy: Option<f64>,
    pub binaries: Vec<Vec<bool>>,
    pub status: SolveStatus,
    pub combos_explored: usize,
    pub surrogate_fit_error: f64,
    pub bounds: InputBounds,
}

/// Receding-horizon economic zone controller.
///
/// The rolling history pairs each applied input with the level measured at
/// the end of its period, so the newest entry carries the latest measurement.
#[derive(Debug, Clone)]
pub struct ZoneController {
    plant: WaterSystemConfig,
    config: ControllerConfig,
    zone: ZoneSpec,
    predictor: GammaPredictor,
    input_scaling: ChannelScaling,
    output_scaling: ChannelScaling,
    u_hist: VecDeque<Vec<f64>>,
    y_hist: VecDeque<Vec<f64>>,
    pump_on: Vec<bool>,
    passive: PassiveController,
}

impl ZoneController {
    /// Build the predictor from offline data and set up an empty history.
    pub fn new(plant: WaterSystemConfig, config: ControllerConfig, zone: ZoneSpec, data: &TrajectoryData) -> Result<Self> {
        config.validate(plant.outputs())?;
        zone.validate()?;
        let layout = plant.layout();
        if data.input_dim() != layout.dim() || data.output_dim() != plant.outputs() {
            return Err(Error::dims(format!(
                "data has {} inputs and {} outputs, plant has {} and {}",
                data.input_dim(),
                data.output_dim(),
                layout.dim(),
                plant.outputs()
            )));
        }
        let (input_scaling, output_scaling) = if config.standardize {
            (ChannelScaling::fit(&data.inputs), ChannelScaling::fit(&data.outputs))
        } else {
            (ChannelScaling::identity(layout.dim()), ChannelScaling::identity(plant.outputs()))
        };
        let scaled = TrajectoryData {
            inputs: data.inputs.iter().map(|u| input_scaling.apply(u)).collect(),
            outputs: data.outputs.iter().map(|y| output_scaling.apply(y)).collect(),
            disturbances: Vec::new(),
        };
        let predictor = GammaPredictor::build(&scaled, config.past, config.horizon)?;
        Ok(Self::from_parts(plant, config, zone, predictor, input_scaling, output_scaling))
    }

    pub fn from_parts(
        plant: WaterSystemConfig,
        config: ControllerConfig,
        zone: ZoneSpec,
        predictor: GammaPredictor,
        input_scaling: ChannelScaling,
        output_scaling: ChannelScaling,
    ) -> Self {
        let pumps = plant.layout().pumps;
        let passive = PassiveController::new(plant.clone(), zone.clone());
        Self {
            plant,
            config,
            zone,
            predictor,
            input_scaling,
            output_scaling,
            u_hist: VecDeque::new(),
            y_hist: VecDeque::new(),
            pump_on: vec![false; pumps],
            passive,
        }
    }

    pub fn predictor(&self) -> &GammaPredictor {
        &self.predictor
    }

    pub fn zone(&self) -> &ZoneSpec {
        &self.zone
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    /// Same controller with a different target-zone contraction.
    pub fn with_contraction(mut self, contraction: f64) -> Self {
        self.zone.contraction = contraction;
        self
    }

    pub fn reset(&mut self) {
        self.u_hist.clear();
        self.y_hist.clear();
        self.pump_on.iter_mut().for_each(|v| *v = false);
        self.passive = PassiveController::new(self.plant.clone(), self.zone.clone());
    }

    /// Record an applied input and the level it produced.
    pub fn observe(&mut self, applied: &[f64], next_levels: &[f64]) {
        self.u_hist.push_back(applied.to_vec());
        self.y_hist.push_back(next_levels.to_vec());
        while self.u_hist.len() > self.config.past {
            self.u_hist.pop_front();
            self.y_hist.pop_front();
        }
        let pumps = self.plant.layout();
        for k in 0..pumps.pumps {
            self.pump_on[k] = applied[pumps.pump(k)] > 0.0;
        }
    }

    pub fn history_len(&self) -> usize {
        self.u_hist.len()
    }

    pub fn is_ready(&self) -> bool {
        self.u_hist.len() == self.config.past
    }

    fn surrogates(&self, bounds: &InputBounds) -> (Vec<Option<PowerSurrogate>>, f64) {
        let mut worst = 0.0_f64;
        let surrogates = self
            .plant
            .pumps()
            .iter()
            .zip(&bounds.pumps)
            .zip(&bounds.static_heads)
            .map(|((pr, iv), &hs)| {
                iv.map(|iv| {
                    let s = PowerSurrogate::fit(iv, hs, pr.pump, pr.pipe, self.config.surrogate_samples);
                    worst = worst.max(s.max_fit_error);
                    s
                })
            })
            .collect();
        (surrogates, worst)
    }

    /// Snap the first predicted input onto the input set: continuous inputs
    /// clamped to their bounds, pumps either exactly off or inside their
    /// running interval.
    fn applied_input(&self, sol: &StageSolution, bounds: &InputBounds) -> Vec<f64> {
        let layout = self.plant.layout();
        let mut u: Vec<f64> = sol.inputs[..layout.dim()].to_vec();
        for i in 0..layout.continuous() {
            u[i] = u[i].clamp(bounds.lower[i], bounds.upper[i]);
        }
        for k in 0..layout.pumps {
            let j = layout.pump(k);
            u[j] = match (sol.binaries[k][0], bounds.pumps[k]) {
                (true, Some(iv)) => iv.clamp(u[j]),
                _ => 0.0,
            };
        }
        u
    }

    /// Solve both stages and return the input to apply now. Falls back to
    /// the passive rules when the zone stage is infeasible.
    pub fn control_step(&mut self, levels: &[f64], disturbance: &Disturbance) -> Result<ControlOutcome> {
        if !self.is_ready() {
            return Err(Error::dims(format!(
                "controller history has {} entries, needs {}",
                self.u_hist.len(),
                self.config.past
            )));
        }
        let bounds = build_input_bounds(&self.plant, levels, disturbance);
        let u_ini: Vec<Vec<f64>> = self.u_hist.iter().map(|u| self.input_scaling.apply(u)).collect();
        let y_ini: Vec<Vec<f64>> = self.y_hist.iter().map(|y| self.output_scaling.apply(y)).collect();
        let z_ini = self.predictor.stack_past(&u_ini, &y_ini)?;
        let gamma1 = self.predictor.gamma1(&z_ini)?;
        let ctx = StageContext::new(
            &self.predictor,
            &self.input_scaling,
            &self.output_scaling,
            &gamma1,
            &bounds,
            self.zone.target(),
            self.zone.output_set(),
            &self.pump_on,
            &self.config,
            self.plant.period_hours(),
        )?;

        let stage1 = match ctx.solve_zone_stage() {
            Ok(s) => s,
            Err(Error::Infeasible { branch, detail }) => {
                log::debug!("zone stage infeasible (branch {branch:?}): {detail}; applying passive rules");
                let input = self.passive.step(levels, disturbance);
                let binaries = self
                    .plant
                    .pumps()
                    .iter()
                    .enumerate()
                    .map(|(k, _)| vec![input[self.plant.layout().pump(k)] > 0.0; self.config.horizon])
                    .collect();
                return Ok(ControlOutcome {
                    input,
                    zc_star: None,
                    stage2_cost: None,
                    stage2_zone_cost: None,
                    stage1_energy: None,
                    stage2_energy: None,
                    binaries,
                    status: SolveStatus::PassiveFallback,
                    combos_explored: 0,
                    surrogate_fit_error: 0.0,
                    bounds,
                });
            }
            Err(e) => return Err(e),
        };
        let (surrogates, fit_error) = self.surrogates(&bounds);
        let stage1_energy = ctx.energy(&nalgebra::DVector::from_column_slice(&stage1.inputs), &stage1.binaries, &surrogates);
        let stage2 = ctx.solve_energy_stage(&stage1, &surrogates)?;
        let input = self.applied_input(&stage2, &bounds);
        let status = match (stage1.status, stage2.status) {
            (SolveStatus::BinaryBudgetExhausted, SolveStatus::Optimal) => SolveStatus::BinaryBudgetExhausted,
            (_, s) => s,
        };
        Ok(ControlOutcome {
            input,
            zc_star: Some(stage1.zone_cost),
            stage2_cost: Some(stage2.objective),
            stage2_zone_cost: Some(stage2.zone_cost),
            stage1_energy: Some(stage1_energy),
            stage2_energy: Some(stage2.energy),
            binaries: stage2.binaries.clone(),
            status,
            combos_explored: stage1.combos_explored + stage2.combos_explored,
            surrogate_fit_error: fit_error,
            bounds,
        })
    }
}
