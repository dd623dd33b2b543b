//! Frame-based priority scheduling and power control for nonpreemptive
//! multi-class M/G/1 queues.
//!
//! A frame is an idle period plus the busy period that follows it. Every
//! controller in [`policies`] fixes a strict priority order (and possibly a
//! power level) for a whole frame, chosen greedily from virtual queues that
//! track time-average constraints. [`analytic`] and [`oracle`] provide the
//! closed-form and brute-force ground truth those controllers are checked
//! against, [`simulator`] plays the queue out frame by frame, and
//! [`experiments`] runs parameter sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analytic;
pub mod config;
pub mod dist;
pub mod error;
pub mod experiments;
pub mod oracle;
pub mod penalty;
pub mod policies;
pub mod rate;
pub mod search;
pub mod simulator;
pub mod stats;
pub mod virtual_queues;

pub use analytic::{
    conservation_value, delay_region, expected_frame_size, load_profile, priority_delays, DelayRegion, DelayVector,
    LoadProfile, PriorityOrder,
};
pub use config::{presets, ClassParams, SystemConfig};
pub use dist::JobSizeDist;
pub use error::{Error, Result};
pub use experiments::{run_scenario, simulate_to_dir, Scenario, ScenarioTable};
pub use oracle::{
    enumerate_vertices, min_penalty_power_target, min_penalty_target, min_power_target, mixture_delays, Mixture,
    PenaltyPowerTarget, PenaltyTarget, PowerTarget, RegionVertex,
};
pub use penalty::PenaltyFn;
pub use policies::{Controller, FrameDecision, PolicyKind};
pub use rate::RatePowerFn;
pub use simulator::{
    run, run_replications, run_with, Estimate, FrameRecord, ReplicationSummary, RunOptions, RunOutput, RunSummary,
    SimEvent, SimEventKind,
};
pub use stats::RunningStats;
pub use virtual_queues::{mean_rate_metric, PathwiseBounds, VirtualState};
