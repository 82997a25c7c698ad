//! Economic zone data-enabled predictive control for connected open water
//! systems: plant simulation, data-driven predictor, two-stage controller,
//! Bayesian tuning of the target zone and the experiment harness around them.

pub mod bo;
pub mod control;
pub mod deepc;
pub mod error;
pub mod hydro;
pub mod linalg;
pub mod qp;
pub mod scenario;

pub use bo::{BoConfig, GpSurrogate};
pub use control::{ControllerConfig, ZoneController, ZoneSpec};
pub use deepc::{GammaPredictor, TrajectoryData};
pub use error::{Error, Result};
pub use hydro::{Disturbance, WaterSystemConfig};
pub use scenario::{ExperimentConfig, MetricsReport, SystemTrajectory};
