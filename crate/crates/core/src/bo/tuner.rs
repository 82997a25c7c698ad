use std::io::Write;

use serde::{Deserialize, Serialize};

use super::gp::{posterior_argmax, propose_next, unit_grid, GpSurrogate, KernelParams};
use crate::error::{Error, Result};

/// Attempts per candidate before a failing evaluation aborts the run.
pub const EVALUATION_ATTEMPTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoConfig {
    /// Candidates evaluated before any acquisition step.
    pub initial: Vec<f64>,
    /// Total number of objective evaluations.
    pub max_evaluations: usize,
    /// Exploration weight of the upper confidence bound.
    pub kappa: f64,
    /// Closed-loop steps per evaluation after the bootstrap.
    pub eval_steps: usize,
    /// Weight of pump energy (kWh) against zone distance (m).
    pub energy_weight: f64,
    pub grid_points: usize,
    /// Initial levels are drawn uniformly within this distance of the centers, m.
    pub initial_spread: f64,
    pub kernel: KernelParams,
    /// Observation noise variance on the standardized scale.
    pub noise_variance: f64,
    pub seed: u64,
    /// Seeds of the disturbance scenarios tuned on; results are aggregated.
    pub scenario_seeds: Vec<u64>,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            initial: vec![1.0, 0.5, 0.0],
            max_evaluations: 16,
            kappa: 2.576,
            eval_steps: 200,
            energy_weight: 2.5e-4,
            grid_points: 1001,
            initial_spread: 0.05,
            kernel: KernelParams::default(),
            noise_variance: 0.35 * 0.35,
            seed: 0,
            scenario_seeds: vec![1, 2, 3],
        }
    }
}

impl BoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.initial.is_empty() || self.initial.len() > self.max_evaluations {
            return Err(Error::config("initial candidate count must be between 1 and the evaluation budget"));
        }
        if self.initial.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::config("initial candidates must lie in [0, 1]"));
        }
        if !(self.kappa >= 0.0) || !(self.energy_weight >= 0.0) || !(self.noise_variance >= 0.0) {
            return Err(Error::config("kappa, energy weight and noise variance must be non-negative"));
        }
        if self.grid_points < 2 || !(self.kernel.length_scale > 0.0) || !(self.kernel.variance > 0.0) {
            return Err(Error::config("grid needs at least 2 points and the kernel positive parameters"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        unit_grid(self.grid_points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoAuditEntry {
    pub iter: usize,
    pub alpha: f64,
    pub phi: f64,
    /// Maximizer of the posterior mean after adding this observation.
    pub posterior_argmax: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoResult {
    pub alpha_star: f64,
    pub surrogate: GpSurrogate,
    pub audit: Vec<BoAuditEntry>,
}

impl BoResult {
    pub fn write_audit_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for e in &self.audit {
            out.serialize(e)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Maximize `objective` over `[0, 1]`: the initial candidates first, then
/// upper-confidence-bound proposals until the budget is spent. The result is
/// the maximizer of the final posterior mean.
///
/// `objective(alpha, attempt)` is retried with increasing `attempt` when it
/// fails, up to [`EVALUATION_ATTEMPTS`] times.
pub fn run_bo<F>(config: &BoConfig, mut objective: F) -> Result<BoResult>
where
    F: FnMut(f64, usize) -> Result<f64>,
{
    config.validate()?;
    let grid = config.grid();
    let mut gp = GpSurrogate::new(config.kernel, config.noise_variance);
    let mut audit = Vec::with_capacity(config.max_evaluations);
    for iter in 0..config.max_evaluations {
        let alpha = match config.initial.get(iter) {
            Some(&a) => a,
            None => propose_next(&gp, config.kappa, &grid),
        };
        let mut attempt = 0;
        let phi = loop {
            match objective(alpha, attempt) {
                Ok(v) if v.is_finite() => break v,
                Ok(v) => log::warn!("objective at alpha={alpha} returned {v}; retrying"),
                Err(e) => {
                    log::warn!("objective at alpha={alpha} failed: {e}");
                    if attempt + 1 >= EVALUATION_ATTEMPTS {
                        return Err(e);
                    }
                }
            }
            attempt += 1;
            if attempt >= EVALUATION_ATTEMPTS {
                return Err(Error::SimulationFailed(format!("objective at alpha={alpha} is not finite")));
            }
        };
        gp.add(alpha, phi)?;
        let best = posterior_argmax(&gp, &grid);
        log::info!("bo iter {iter}: alpha={alpha:.4} phi={phi:.6} posterior argmax={best:.4}");
        audit.push(BoAuditEntry { iter, alpha, phi, posterior_argmax: best });
    }
    Ok(BoResult { alpha_star: posterior_argmax(&gp, &grid), surrogate: gp, audit })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_schedule_uses_initial_set() {
        let cfg = BoConfig { max_evaluations: 3, ..BoConfig::default() };
        let res = run_bo(&cfg, |a, _| Ok(-(a - 0.5) * (a - 0.5))).unwrap();
        assert_eq!(res.audit.len(), 3);
        assert_eq!(res.audit.iter().map(|e| e.alpha).collect::<Vec<_>>(), vec![1.0, 0.5, 0.0]);
        assert!((res.alpha_star - 0.5).abs() < 0.1);
    }

    #[test]
    fn failing_evaluation_is_retried() {
        let cfg = BoConfig { max_evaluations: 3, ..BoConfig::default() };
        let mut calls = 0;
        let res = run_bo(&cfg, |a, attempt| {
            calls += 1;
            if attempt == 0 && a == 0.5 {
                Err(Error::SimulationFailed("flaky".into()))
            } else {
                Ok(-a)
            }
        })
        .unwrap();
        assert_eq!(calls, 4);
        assert_eq!(res.audit.len(), 3);
    }
}
