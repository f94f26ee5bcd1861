//! Job grouping and hierarchical dispatch.

mod dispatch;
mod grouping;

pub use dispatch::{dispatch, local_refine, Assignment, ClusterState, DecidedBy, MachineState};
pub use grouping::{drain_overflow, group_jobs, GroupingOutcome};
