//! Data-driven prediction: Hankel matrices, excitation checks and the
//! LQ-factored multi-step predictor.

pub mod data;
pub mod hankel;
pub mod predictor;

pub use data::{ChannelScaling, TrajectoryData};
pub use hankel::{build_hankel, check_persistent_excitation, ExcitationReport};
pub use predictor::{GammaPredictor, PredictorDims};
