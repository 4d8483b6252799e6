//! Configuration-driven studies: limits in the kernel, kernel stability,
//! long-time dissipation and the scalar delay prototype.

pub mod config;
mod scenario;
mod studies;
mod sweep;

pub use config::{manufactured_forcing, ScenarioConfig};
pub use scenario::{run_scenario, Assertion, Outcome, EXPERIMENTS};
pub use studies::{
    characteristic_root, kernel_stability_pair, linf_h_distance, monotone_to_floor, run_kernel_stability,
    run_longtime, run_memory_to_delay, run_prototype_delay_ode, run_vanishing_memory, Checkpoint, DelayOdeReport,
    LongtimeReport, PairStatus, StabilityPair, SMALLNESS,
};
pub use sweep::{fit_loglog, SlopeFit, SweepResult, SweepRow, FIT_POINTS};
