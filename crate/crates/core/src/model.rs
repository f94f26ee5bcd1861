//! Domain types shared across the toolkit and the capacity formulas that
//! bound a grouped job on a resource.
//!
//! All quantities are real numbers: MI, MIPS, Mb, Mb/s and seconds. Nothing
//! in the capacity math is truncated.

use std::fmt;

use crate::error::ModelError;

/// Submission-ordered job identifier. Displayed as `J<n>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JobId(pub u32);

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "J{}", self.0)
    }
}

/// Grouped job identifier. Displayed as `G<n>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupId(pub u32);

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "G{}", self.0)
    }
}

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl std::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }
    };
}

string_id!(
    /// Identifier assigned by the information service, e.g. `U0001`.
    UserId
);
string_id!(
    /// Resource identifier; the registered name when unique.
    ResourceId
);
string_id!(ClusterId);

/// A unit of user work.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub job_id: JobId,
    pub user_id: UserId,
    pub length_mi: f64,
    pub memory_mb: f64,
    pub submit_seq: u64,
}

impl Job {
    pub fn new(
        job_id: JobId,
        user_id: UserId,
        length_mi: f64,
        memory_mb: f64,
        submit_seq: u64,
    ) -> Result<Self, ModelError> {
        if !(length_mi.is_finite() && length_mi > 0.0) {
            return Err(ModelError::InvalidJob {
                job: job_id.to_string(),
                reason: format!("length_mi must be positive, got {length_mi}"),
            });
        }
        if !(memory_mb.is_finite() && memory_mb >= 0.0) {
            return Err(ModelError::InvalidJob {
                job: job_id.to_string(),
                reason: format!("memory_mb must be non-negative, got {memory_mb}"),
            });
        }
        Ok(Self {
            job_id,
            user_id,
            length_mi,
            memory_mb,
            submit_seq,
        })
    }
}

/// A registered compute node.
#[derive(Debug, Clone, PartialEq)]
pub struct Resource {
    pub resource_id: ResourceId,
    pub name: String,
    pub mips: f64,
    pub bandwidth_mbps: f64,
    pub memory_mb: f64,
    /// Seconds since the scenario epoch.
    pub enter_time: f64,
}

impl Resource {
    pub fn new(
        resource_id: ResourceId,
        name: impl Into<String>,
        mips: f64,
        bandwidth_mbps: f64,
        memory_mb: f64,
        enter_time: f64,
    ) -> Result<Self, ModelError> {
        let name = name.into();
        for (field, value) in [
            ("mips", mips),
            ("bandwidth_mbps", bandwidth_mbps),
            ("memory_mb", memory_mb),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::InvalidResource {
                    resource: name,
                    reason: format!("{field} must be positive, got {value}"),
                });
            }
        }
        if !enter_time.is_finite() {
            return Err(ModelError::InvalidResource {
                resource: name,
                reason: "enter_time must be finite".into(),
            });
        }
        Ok(Self {
            resource_id,
            name,
            mips,
            bandwidth_mbps,
            memory_mb,
            enter_time,
        })
    }
}

/// Granularity window and communication-time allowance, both in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulingParams {
    granularity_s: f64,
    tcomm_s: f64,
}

impl SchedulingParams {
    pub const DEFAULT_GRANULARITY_S: f64 = 3.0;

    pub fn new(granularity_s: f64, tcomm_s: f64) -> Result<Self, ModelError> {
        if !(granularity_s.is_finite() && granularity_s > 0.0) {
            return Err(ModelError::InvalidParams(format!(
                "granularity_s must be positive, got {granularity_s}"
            )));
        }
        if !(tcomm_s.is_finite() && tcomm_s > 0.0) {
            return Err(ModelError::InvalidParams(format!(
                "tcomm_s must be positive, got {tcomm_s}"
            )));
        }
        Ok(Self {
            granularity_s,
            tcomm_s,
        })
    }

    /// Communication allowance defaults to the granularity window.
    pub fn with_granularity(granularity_s: f64) -> Result<Self, ModelError> {
        Self::new(granularity_s, granularity_s)
    }

    pub fn granularity_s(&self) -> f64 {
        self.granularity_s
    }

    pub fn tcomm_s(&self) -> f64 {
        self.tcomm_s
    }
}

impl Default for SchedulingParams {
    fn default() -> Self {
        Self {
            granularity_s: Self::DEFAULT_GRANULARITY_S,
            tcomm_s: Self::DEFAULT_GRANULARITY_S,
        }
    }
}

/// An ordered batch of jobs bound for one resource.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedJob {
    pub group_id: GroupId,
    pub resource_id: ResourceId,
    members: Vec<JobId>,
    total_mi: f64,
    total_memory_mb: f64,
}

impl GroupedJob {
    /// Builds a group from jobs already in submission order.
    pub fn from_jobs<'a>(
        group_id: GroupId,
        resource_id: ResourceId,
        jobs: impl IntoIterator<Item = &'a Job>,
    ) -> Result<Self, ModelError> {
        let mut members = Vec::new();
        let mut total_mi = 0.0;
        let mut total_memory_mb = 0.0;
        let mut last_seq = None;
        for job in jobs {
            if last_seq.is_some_and(|s| s >= job.submit_seq) {
                return Err(ModelError::InvalidGroup {
                    group: group_id.to_string(),
                    reason: "members must ascend by submit_seq".into(),
                });
            }
            last_seq = Some(job.submit_seq);
            members.push(job.job_id);
            total_mi += job.length_mi;
            total_memory_mb += job.memory_mb;
        }
        if members.is_empty() {
            return Err(ModelError::InvalidGroup {
                group: group_id.to_string(),
                reason: "a grouped job needs at least one member".into(),
            });
        }
        Ok(Self {
            group_id,
            resource_id,
            members,
            total_mi,
            total_memory_mb,
        })
    }

    pub fn members(&self) -> &[JobId] {
        &self.members
    }

    pub fn total_mi(&self) -> f64 {
        self.total_mi
    }

    pub fn total_memory_mb(&self) -> f64 {
        self.total_memory_mb
    }

    /// Same members bound for a different resource.
    pub fn rebound(&self, resource_id: ResourceId) -> Self {
        Self {
            resource_id,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub cluster_id: ClusterId,
    pub resource_ids: Vec<ResourceId>,
}

impl Cluster {
    pub fn new(cluster_id: ClusterId, resource_ids: Vec<ResourceId>) -> Result<Self, ModelError> {
        if resource_ids.is_empty() {
            return Err(ModelError::InvalidCluster {
                cluster: cluster_id.to_string(),
                reason: "cluster has no resources".into(),
            });
        }
        Ok(Self {
            cluster_id,
            resource_ids,
        })
    }

    pub fn contains(&self, resource_id: &ResourceId) -> bool {
        self.resource_ids.contains(resource_id)
    }
}

/// Which grouping rule set is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupingMode {
    /// MI, memory and transfer constraints.
    Jgs,
    /// MI constraint only.
    Djg,
}

/// One of the three packing conditions on a grouped job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Condition {
    /// Grouped MI within MIPS × granularity.
    MiCapacity,
    /// Grouped memory within resource memory.
    Memory,
    /// Grouped memory within bandwidth × Tcomm.
    Transfer,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::MiCapacity => "mi-capacity",
            Condition::Memory => "memory",
            Condition::Transfer => "transfer",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feasibility {
    Feasible,
    Infeasible(Condition),
}

impl Feasibility {
    pub fn is_feasible(self) -> bool {
        matches!(self, Feasibility::Feasible)
    }
}

/// Each condition evaluated independently, regardless of mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConditionReport {
    pub mi_capacity: bool,
    pub memory: bool,
    pub transfer: bool,
}

/// MI a resource can process within one granularity window.
pub fn group_capacity_mi(resource: &Resource, params: &SchedulingParams) -> f64 {
    resource.mips * params.granularity_s
}

/// Mb a resource can receive within the communication allowance.
pub fn transfer_capacity_mb(resource: &Resource, params: &SchedulingParams) -> f64 {
    resource.bandwidth_mbps * params.tcomm_s
}

pub fn evaluate_conditions(
    total_mi: f64,
    total_memory_mb: f64,
    resource: &Resource,
    params: &SchedulingParams,
) -> ConditionReport {
    ConditionReport {
        mi_capacity: total_mi <= group_capacity_mi(resource, params),
        memory: total_memory_mb <= resource.memory_mb,
        transfer: total_memory_mb <= transfer_capacity_mb(resource, params),
    }
}

/// Feasibility of raw totals; shared by grouping and by the group check.
pub fn check_totals_feasible(
    total_mi: f64,
    total_memory_mb: f64,
    resource: &Resource,
    params: &SchedulingParams,
    mode: GroupingMode,
) -> Feasibility {
    let report = evaluate_conditions(total_mi, total_memory_mb, resource, params);
    if !report.mi_capacity {
        return Feasibility::Infeasible(Condition::MiCapacity);
    }
    if mode == GroupingMode::Jgs {
        if !report.memory {
            return Feasibility::Infeasible(Condition::Memory);
        }
        if !report.transfer {
            return Feasibility::Infeasible(Condition::Transfer);
        }
    }
    Feasibility::Feasible
}

pub fn check_group_feasible(
    group: &GroupedJob,
    resource: &Resource,
    params: &SchedulingParams,
    mode: GroupingMode,
) -> Feasibility {
    check_totals_feasible(
        group.total_mi,
        group.total_memory_mb,
        resource,
        params,
        mode,
    )
}
