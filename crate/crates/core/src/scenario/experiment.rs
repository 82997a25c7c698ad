use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::closed_loop::{run_closed_loop, ClosedLoopRun, LoopPolicy};
use super::collect::{collect_excitation_data, CollectedData, CollectionConfig};
use super::disturbance::{generate_disturbances, DisturbanceScenario};
use super::metrics::{compute_metrics, MetricsReport, SystemTrajectory};
use crate::bo::{aggregate_runs, run_bo, BoConfig, BoResult};
use crate::control::{ControllerConfig, LevelBox, PidGains, ZoneController, ZoneSpec};
use crate::deepc::TrajectoryData;
use crate::error::{Error, Result};
use crate::hydro::{Disturbance, WaterSystemConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZoneSettings {
    pub half_width: f64,
    pub output_band: f64,
    /// Default target-zone contraction when none is tuned or given.
    pub contraction: f64,
}

impl Default for ZoneSettings {
    fn default() -> Self {
        Self { half_width: 0.1, output_band: 0.3, contraction: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationConfig {
    /// Closed-loop steps after the bootstrap.
    pub steps: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { steps: 200 }
    }
}

/// Everything needed to reproduce an experiment: plant, controller, zone,
/// bootstrap gains, data collection, tuning and the disturbance scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: WaterSystemConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub zone: ZoneSettings,
    #[serde(default)]
    pub pid: PidGains,
    #[serde(default)]
    pub collection: CollectionConfig,
    #[serde(default)]
    pub bo: BoConfig,
    pub scenario: DisturbanceScenario,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
}

/// Controller variants of the comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlMode {
    /// Economic zone control with the given contraction.
    Ez,
    /// Set-point tracking: zero-width target zone.
    Es,
    /// Economic zone control with the untuned target zone equal to the desired zone.
    EzRaw,
    Passive,
}

impl ControlMode {
    /// Contraction actually used, given the requested one.
    pub fn contraction(self, alpha: f64) -> f64 {
        match self {
            Self::Ez => alpha,
            Self::Es => 0.0,
            Self::EzRaw | Self::Passive => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Ez => "EZ-DeePC (tuned)",
            Self::Es => "ES-DeePC",
            Self::EzRaw => "EZ-DeePC (alpha=1)",
            Self::Passive => "Passive",
        }
    }
}

impl std::str::FromStr for ControlMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ez" => Ok(Self::Ez),
            "es" => Ok(Self::Es),
            "ez-raw" => Ok(Self::EzRaw),
            "passive" => Ok(Self::Passive),
            other => Err(Error::config(format!("unknown control mode '{other}'"))),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text)?;
        cfg.system.normalize();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.controller.validate(self.system.outputs())?;
        self.zone_spec(self.zone.contraction)?;
        self.bo.validate()?;
        self.scenario.validate(&self.system)?;
        if self.collection.steps < self.controller.past + self.controller.horizon {
            return Err(Error::config("collection is shorter than the past window plus horizon"));
        }
        Ok(())
    }

    pub fn zone_spec(&self, contraction: f64) -> Result<ZoneSpec> {
        ZoneSpec::new(self.system.centers(), self.zone.half_width, contraction, self.zone.output_band)
    }

    pub fn desired_zone(&self) -> LevelBox {
        LevelBox {
            lower: self.system.centers().iter().map(|c| c - self.zone.half_width).collect(),
            upper: self.system.centers().iter().map(|c| c + self.zone.half_width).collect(),
        }
    }

    /// Length of the PID bootstrap that fills the controller history.
    pub fn bootstrap_steps(&self) -> usize {
        self.controller.past
    }

    pub fn collection_disturbances(&self) -> Result<Vec<Disturbance>> {
        let sc = self.scenario.with_seed(self.collection.seed).with_steps(self.collection.steps);
        generate_disturbances(&self.system, &sc)
    }

    /// Disturbances of the evaluation run: bootstrap plus evaluation steps.
    pub fn evaluation_disturbances(&self, scenario: &DisturbanceScenario) -> Result<Vec<Disturbance>> {
        generate_disturbances(&self.system, &scenario.with_steps(self.bootstrap_steps() + self.evaluation.steps))
    }

    pub fn collect(&self) -> Result<CollectedData> {
        let d = self.collection_disturbances()?;
        let order = self.controller.past + self.controller.horizon;
        collect_excitation_data(&self.system, &d, &self.system.centers(), &self.collection, order)
    }

    pub fn controller(&self, data: &TrajectoryData, contraction: f64) -> Result<ZoneController> {
        ZoneController::new(self.system.clone(), self.controller.clone(), self.zone_spec(contraction)?, data)
    }

    /// Closed loop of one controller variant from the given initial levels.
    pub fn run_mode(
        &self,
        mode: ControlMode,
        base: Option<&ZoneController>,
        alpha: f64,
        disturbances: &[Disturbance],
        initial_levels: &[f64],
    ) -> Result<ClosedLoopRun> {
        let contraction = mode.contraction(alpha);
        let zone = self.zone_spec(contraction)?;
        let policy = match mode {
            ControlMode::Passive => LoopPolicy::Passive,
            _ => {
                let base = base.ok_or_else(|| Error::config("zone control needs a data-built controller"))?;
                LoopPolicy::Zone(Box::new(base.clone().with_contraction(contraction)))
            }
        };
        run_closed_loop(
            &self.system,
            &zone,
            policy,
            self.pid,
            disturbances,
            initial_levels,
            self.bootstrap_steps(),
            self.evaluation.steps,
        )
    }

    pub fn metrics(&self, trajectory: &SystemTrajectory) -> Result<MetricsReport> {
        compute_metrics(trajectory, &self.desired_zone(), self.evaluation.steps, self.bootstrap_steps())
    }

    /// Tuning objective of one closed-loop run: negative sum over the
    /// controlled periods of the desired-zone distance at the end of the
    /// period plus the weighted pump energy spent in it.
    pub fn tuning_objective(&self, trajectory: &SystemTrajectory, steps: usize) -> Result<f64> {
        bo_objective(trajectory, &self.desired_zone(), self.bo.energy_weight, self.bootstrap_steps(), steps)
    }

    /// Tuning objective at contraction `alpha` on the given disturbances.
    pub fn evaluate_candidate(
        &self,
        base: &ZoneController,
        alpha: f64,
        disturbances: &[Disturbance],
        initial_levels: &[f64],
    ) -> Result<f64> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::config(format!("contraction {alpha} outside [0, 1]")));
        }
        let zone = self.zone_spec(alpha)?;
        let policy = LoopPolicy::Zone(Box::new(base.clone().with_contraction(alpha)));
        let steps = self.bo.eval_steps;
        let run = run_closed_loop(
            &self.system,
            &zone,
            policy,
            self.pid,
            disturbances,
            initial_levels,
            self.bootstrap_steps(),
            steps,
        )?;
        self.tuning_objective(&run.trajectory, steps)
    }

    /// Initial levels drawn uniformly around the centers.
    pub fn sample_initial_levels(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = self.bo.initial_spread;
        self.system.centers().iter().map(|c| if s > 0.0 { c + rng.random_range(-s..=s) } else { *c }).collect()
    }

    /// One tuning run on one disturbance scenario.
    pub fn tune_single(&self, base: &ZoneController, scenario: &DisturbanceScenario) -> Result<BoResult> {
        let d = generate_disturbances(&self.system, &scenario.with_steps(self.bootstrap_steps() + self.bo.eval_steps))?;
        let mut evaluation = 0u64;
        run_bo(&self.bo, |alpha, attempt| {
            let seed = self.bo.seed ^ scenario.seed.rotate_left(32) ^ (evaluation << 8) ^ attempt as u64;
            if attempt == 0 {
                evaluation += 1;
            }
            let y0 = self.sample_initial_levels(seed);
            self.evaluate_candidate(base, alpha, &d, &y0)
        })
    }

    /// Tune on several scenarios and pick the maximizer of the averaged
    /// posterior means.
    pub fn tune(&self, base: &ZoneController, scenarios: &[DisturbanceScenario]) -> Result<TuningReport> {
        let runs = scenarios.iter().map(|sc| self.tune_single(base, sc)).collect::<Result<Vec<_>>>()?;
        let grid = self.bo.grid();
        let models: Vec<_> = runs.iter().map(|r| r.surrogate.clone()).collect();
        let (alpha_star, mean_curve) = aggregate_runs(&models, &grid)?;
        Ok(TuningReport { alpha_star, grid, mean_curve, runs })
    }

    /// Scenarios listed by `bo.scenario_seeds`.
    pub fn tuning_scenarios(&self) -> Vec<DisturbanceScenario> {
        self.bo.scenario_seeds.iter().map(|&s| self.scenario.with_seed(s)).collect()
    }

    /// Run all four variants on the evaluation scenario from the centers.
    pub fn compare(&self, base: Option<&ZoneController>, alpha_star: f64) -> Result<ComparisonReport> {
        let d = self.evaluation_disturbances(&self.scenario)?;
        let y0 = self.system.centers();
        let rows = [ControlMode::Ez, ControlMode::EzRaw, ControlMode::Es, ControlMode::Passive]
            .into_iter()
            .map(|mode| {
                let result = self.run_mode(mode, base, alpha_star, &d, &y0).and_then(|run| {
                    let m = self.metrics(&run.trajectory)?;
                    Ok((run, m))
                });
                match result {
                    Ok((run, metrics)) => ComparisonRow {
                        mode,
                        contraction: mode.contraction(alpha_star),
                        metrics: Some(metrics),
                        error: None,
                        run: Some(run),
                    },
                    Err(e) => {
                        log::error!("{} failed: {e}", mode.label());
                        ComparisonRow { mode, contraction: mode.contraction(alpha_star), metrics: None, error: Some(e.to_string()), run: None }
                    }
                }
            })
            .collect();
        Ok(ComparisonReport { rows })
    }
}

/// `-sum_{k} (dist_1(y_{k+1}) + weight * energy_k)` over the `steps` periods
/// starting at `start`.
pub fn bo_objective(traj: &SystemTrajectory, desired: &LevelBox, energy_weight: f64, start: usize, steps: usize) -> Result<f64> {
    if traj.steps() < start + steps {
        return Err(Error::WindowTooShort { len: traj.steps(), needed: start + steps });
    }
    let mut total = 0.0;
    for k in start..start + steps {
        total += desired.l1_distance(&traj.levels[k + 1]) + energy_weight * traj.energy_kwh[k];
    }
    Ok(-total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub alpha_star: f64,
    pub grid: Vec<f64>,
    /// Posterior mean averaged over the runs, on `grid`.
    pub mean_curve: Vec<f64>,
    pub runs: Vec<BoResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub mode: ControlMode,
    pub contraction: f64,
    pub metrics: Option<MetricsReport>,
    pub error: Option<String>,
    #[serde(skip)]
    pub run: Option<ClosedLoopRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn row(&self, mode: ControlMode) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.mode == mode)
    }

    pub fn metrics(&self, mode: ControlMode) -> Option<&MetricsReport> {
        self.row(mode).and_then(|r| r.metrics.as_ref())
    }

    /// Plain-text table of the four variants.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<22} {:>6} {:>12} {:>12} {:>12} {:>14}",
            "method", "alpha", "MAE [m]", "max dev [m]", "violation %", "energy [kWh]"
        );
        for r in &self.rows {
            match &r.metrics {
                Some(m) => {
                    let _ = writeln!(
                        s,
                        "{:<22} {:>6.3} {:>12.4e} {:>12.4} {:>12.2} {:>14.3}",
                        r.mode.label(),
                        r.contraction,
                        m.mae,
                        m.max_deviation,
                        100.0 * m.violation_pct,
                        m.avg_energy
                    );
                }
                None => {
                    let _ = writeln!(s, "{:<22} failed: {}", r.mode.label(), r.error.as_deref().unwrap_or("unknown"));
                }
            }
        }
        s
    }
}
