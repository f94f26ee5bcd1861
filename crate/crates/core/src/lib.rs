//! Grid job scheduling toolkit.
//!
//! Users and resources enroll with RSA-signed requests into an information
//! service ([`registry`]). Authenticated jobs are packed into grouped jobs
//! sized to each resource's MIPS, memory and bandwidth ([`scheduler`]),
//! dispatched through a global and per-cluster local scheduler, and timed by
//! a deterministic simulator ([`sim`]). [`pipeline`] wires the stages
//! together and [`report`] renders CSV.

pub mod auth;
pub mod error;
pub mod model;
pub mod pipeline;
pub mod registry;
pub mod report;
pub mod scenario;
pub mod scheduler;
pub mod sim;

pub use error::{
    AuthError, DispatchError, ModelError, PipelineError, RegistryError, ScenarioError,
};
