//! Plant model of a connected open water system.

pub mod sim;
pub mod structures;
pub mod system;

pub use sim::{clamp_input, step, StepFlows, StepOutcome};
pub use structures::*;
pub use system::{Disturbance, InputLayout, PumpRef, Station, WaterSystemConfig};
