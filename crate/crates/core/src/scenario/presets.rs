use super::experiment::ExperimentConfig;
use crate::error::Result;

/// Reduced 4-branch experiment used for fast closed-loop runs.
pub const DESK_CONFIG: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/desk4.toml"));
/// Full 14-branch plant.
pub const FULL_CONFIG: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/full14.toml"));

pub fn desk_experiment() -> Result<ExperimentConfig> {
    ExperimentConfig::from_toml_str(DESK_CONFIG)
}

pub fn full_experiment() -> Result<ExperimentConfig> {
    ExperimentConfig::from_toml_str(FULL_CONFIG)
}
