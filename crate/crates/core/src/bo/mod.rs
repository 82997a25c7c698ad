//! Bayesian optimization of the target-zone contraction.

pub mod gp;
pub mod tuner;

pub use gp::{aggregate_runs, argmax, matern_kernel, posterior_argmax, propose_next, ucb, unit_grid, GpSurrogate, KernelParams, Smoothness};
pub use tuner::{run_bo, BoAuditEntry, BoConfig, BoResult, EVALUATION_ATTEMPTS};
