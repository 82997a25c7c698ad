use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How on/off decisions of the pumps are laid out over the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryMode {
    /// One on/off decision per pump for the whole horizon.
    #[default]
    ConstantOverHorizon,
    /// One decision per pump and horizon step. Only for tiny instances.
    PerStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    /// Length of the past window used to pin the initial condition.
    pub past: usize,
    /// Prediction horizon.
    pub horizon: usize,
    /// Diagonal output tracking weight, one entry per branch or a single value.
    pub output_weight: Vec<f64>,
    /// Input weight of the set-point formulation.
    pub input_weight: Option<f64>,
    pub zone_reg_inputs: f64,
    pub zone_reg_outputs: f64,
    pub energy_reg_inputs: f64,
    pub energy_reg_outputs: f64,
    pub binary_mode: BinaryMode,
    pub max_binary_combos: usize,
    pub kkt_tol: f64,
    /// Small ridge added to every QP Hessian.
    pub ridge: f64,
    pub sqp_max_iterations: usize,
    pub sqp_step_tol: f64,
    /// Number of samples for the per-pump power surrogate fit.
    pub surrogate_samples: usize,
    /// Standardize inputs and outputs per channel before building the predictor.
    pub standardize: bool,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            past: 15,
            horizon: 5,
            output_weight: vec![5.0],
            input_weight: None,
            zone_reg_inputs: 0.5,
            zone_reg_outputs: 100.0,
            energy_reg_inputs: 5e3,
            energy_reg_outputs: 1e6,
            binary_mode: BinaryMode::ConstantOverHorizon,
            max_binary_combos: 256,
            kkt_tol: 1e-6,
            ridge: 1e-9,
            sqp_max_iterations: 50,
            sqp_step_tol: 1e-6,
            surrogate_samples: 20,
            standardize: true,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self, outputs: usize) -> Result<()> {
        if self.past == 0 || self.horizon == 0 {
            return Err(Error::config("past window and horizon must be at least 1"));
        }
        if self.output_weight.len() != 1 && self.output_weight.len() != outputs {
            return Err(Error::config(format!(
                "output weight needs 1 or {outputs} entries, got {}",
                self.output_weight.len()
            )));
        }
        if self.output_weight.iter().any(|&q| !(q > 0.0)) {
            return Err(Error::config("output weights must be positive"));
        }
        let regs = [self.zone_reg_inputs, self.zone_reg_outputs, self.energy_reg_inputs, self.energy_reg_outputs];
        if regs.iter().any(|&b| !(b >= 0.0)) || self.input_weight.is_some_and(|r| !(r >= 0.0)) {
            return Err(Error::config("regularization weights must be non-negative"));
        }
        if self.max_binary_combos == 0 || self.surrogate_samples < 4 || self.sqp_max_iterations == 0 {
            return Err(Error::config("binary budget, surrogate samples and SQP iterations must be positive"));
        }
        Ok(())
    }

    /// Tracking weight of output channel `i`.
    pub fn weight(&self, i: usize) -> f64 {
        if self.output_weight.len() == 1 {
            self.output_weight[0]
        } else {
            self.output_weight[i]
        }
    }
}
