//! Disturbance synthesis, excitation data collection, closed-loop runs,
//! metrics and the controller comparison.

pub mod closed_loop;
pub mod collect;
pub mod disturbance;
pub mod experiment;
pub mod metrics;
pub mod presets;

pub use closed_loop::{run_closed_loop, ClosedLoopRun, LoopPolicy, StepLog, StepSource};
pub use collect::{collect_excitation_data, CollectedData, CollectionConfig, Intervention};
pub use disturbance::{generate_disturbances, DisturbanceScenario, InflowEvents, Tide};
pub use experiment::{
    bo_objective, ComparisonReport, ComparisonRow, ControlMode, EvaluationConfig, ExperimentConfig, TuningReport,
    ZoneSettings,
};
pub use metrics::{compute_metrics, BranchMetrics, MetricsReport, SystemTrajectory};
pub use presets::{desk_experiment, full_experiment, DESK_CONFIG, FULL_CONFIG};
