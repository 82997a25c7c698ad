//! Shared fixtures for the benchmarks.

use ezdeepc::deepc::TrajectoryData;
use ezdeepc::hydro::Disturbance;
use ezdeepc::scenario::{desk_experiment, ExperimentConfig};

/// The desk-scale experiment with its collected offline data.
pub fn desk_with_data() -> (ExperimentConfig, TrajectoryData) {
    let exp = desk_experiment().expect("built-in config");
    let data = exp.collect().expect("collection").data;
    (exp, data)
}

/// Evaluation disturbances for the desk experiment.
pub fn desk_disturbances(exp: &ExperimentConfig) -> Vec<Disturbance> {
    exp.evaluation_disturbances(&exp.scenario).expect("scenario")
}
