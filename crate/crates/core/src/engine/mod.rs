//! Scenario files, the closed-loop run and the command implementations.

pub mod commands;
pub mod profiles;
mod run;
mod scenario;

pub use run::{percentile, run, AppliedEvent, RunCounters, RunOptions, RunOutput};
pub use scenario::{
    pv_device, reconfigure, BaselineSection, DeviceEntry, EstimatorMode, EstimatorSection, Event, EventKind,
    LoadSection, PreparedScenario, Scenario, TieLine, BUILTIN_IEEE33,
};
