//! Discrete-time simulator for energy-aware VM consolidation in a
//! heterogeneous data center.
//!
//! The loop: per-host overload detection (static or adaptive thresholds,
//! regression prediction), VM selection (maximum or minimum migration time,
//! random choice), power-aware best-fit-decreasing placement, underload
//! evacuation, and host sleep, with energy and SLA metrics on top.

pub mod cli;
pub mod detection;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod model;
pub mod placement;
pub mod power;
pub mod selection;
pub mod stats;
pub mod workload;

pub use engine::{run, RunReport};
pub use error::SimError;
pub use model::{HostId, PolicyConfig, VmId};
