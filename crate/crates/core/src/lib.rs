//! Deterministic discrete-time simulator for decentralized multi-robot task
//! allocation.
//!
//! Every agent runs a behavior tree whose decision node delegates to a
//! pluggable policy ([`policy::CbbaPolicy`], [`policy::GrapePolicy`],
//! [`policy::FcgPolicy`] or anything registered in a
//! [`policy::PolicyRegistry`]). Agents perceive tasks and talk to neighbors
//! only within fixed radii, with one tick of message latency. The
//! [`harness`] runs Monte Carlo batches and summarizes them.

pub mod btree;
pub mod comms;
pub mod config;
pub mod engine;
pub mod harness;
pub mod policy;
pub mod rng;
pub mod types;

pub use config::{validate_config, validate_config_with, ConfigError, PolicyParams, RawConfig, ScenarioConfig};
pub use engine::{run, EngineError, EpisodeResult, Simulation, Termination};
pub use policy::{DecisionContext, DecisionOutcome, DecisionStatus, Policy, PolicyRegistry};
pub use types::{distance, AgentId, AgentState, MessageBody, MessagePayload, TaskId, TaskState, Vec2};
