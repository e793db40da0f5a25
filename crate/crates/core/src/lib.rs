//! Deadline-aware layer scheduling for layered (SVC) video streaming.
//!
//! A video is split into `C` chunks of `L` slots each, encoded as a base
//! layer plus ordered enhancement layers. Given a per-slot bandwidth trace,
//! the planner decides up to which layer every chunk is fetched so that the
//! weighted playback quality is maximized subject to bandwidth, playback
//! deadline, and buffer constraints. Two service models are supported:
//! skip-based streaming (a chunk missing its deadline is skipped) and
//! no-skip streaming (playback stalls until the base layer arrives).
//!
//! The crate provides:
//!
//! - exact-rational domain model and objective evaluation ([`model`]),
//! - the offline planners ([`lbp`] for skip mode, [`noskip`] for no-skip),
//! - a sliding-window online engine with pluggable predictors ([`online`],
//!   [`prediction`]),
//! - a slot-by-slot playback simulator and comparison baselines ([`sim`],
//!   [`baselines`], [`metrics`]),
//! - an exhaustive oracle for desk-scale optimality certification
//!   ([`oracle`]).
//!
//! All planner arithmetic on sizes, bandwidth, and time is integer; objective
//! values use exact rationals, so identical inputs always produce identical
//! outputs.

pub mod baselines;
pub mod lbp;
pub mod metrics;
pub mod model;
pub mod noskip;
pub mod online;
pub mod oracle;
pub mod prediction;
pub(crate) mod schedule;
pub mod sim;
pub mod validate;

pub use model::{
    abr_rate_mapping, deadline_of, objective_value, validate_weights, BandwidthTrace, LayerPlan,
    Mode, QoEReport, StreamConfig, VideoSpec, WeightVerdict,
};

use thiserror::Error;

/// Errors surfaced by planners, simulators, and input validation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid video spec: {0}")]
    InvalidSpec(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("weight condition violated: {0}")]
    WeightCondition(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("chunk index {0} out of range 1..={1}")]
    ChunkIndex(usize, usize),
    #[error("video cannot be fetched: {0}")]
    Unfetchable(String),
    #[error("instance exceeds oracle limits: {0}")]
    OracleLimits(String),
    #[error("prediction failure: {0}")]
    Prediction(String),
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
