//! Economic zone controller: input sets, the two stage problems, the
//! receding-horizon loop and the rule-based baselines.

pub mod baseline;
pub mod bounds;
pub mod config;
pub mod controller;
pub mod stage;
pub mod surrogate;
pub mod zone;

pub use baseline::{PassiveController, PidBootstrap, PidGains, StationMode, PASSIVE_GATE_RATIO, PASSIVE_PUMP_SPEED};
pub use bounds::{build_input_bounds, InputBounds};
pub use config::{BinaryMode, ControllerConfig};
pub use controller::{ControlOutcome, ZoneController};
pub use stage::{SolveStatus, StageContext, StageSolution};
pub use surrogate::{exact_power, PowerSurrogate};
pub use zone::{LevelBox, ZoneSpec};
