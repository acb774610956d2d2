//! Discrete-time simulator of an edge server sharing one wireless channel
//! between vehicles that offload camera frames (UCVs) and vehicles that
//! download video (DCVs).
//!
//! The FAIR scheme reserves uplink and downlink airtime every period and
//! lets each vehicle adapt its frame resolution to the reservation. Four
//! contention baselines (same or different AIFS, fixed max or min
//! resolution) run on the same radio and energy models for comparison.

// `!(x > 0.0)` is used on purpose so that NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adapter;
pub mod allocator;
pub mod baseline;
pub mod energy;
pub mod engine;
pub mod radio;
pub mod report;
pub mod scenario;
pub mod trajectory;

pub use adapter::{solve_p0, solve_p1, AdaptRequest, AdaptationDecision};
pub use allocator::{allocate, classify, dop_max, AllocationPlan, CaseLabel};
pub use baseline::{BaselinePolicy, ContentionConfig};
pub use energy::{EnergyParams, TailMode};
pub use engine::{run, sweep, Algorithm, MetricsLedger, RunSpec};
pub use radio::{LinkState, RateTable};
pub use scenario::{Config, Direction, Resolution, SimConfig, VehicleId, VehicleState};
pub use trajectory::{Scenario, SchemaOptions};
