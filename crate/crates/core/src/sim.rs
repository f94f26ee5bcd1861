//! Time model for grouped jobs.
//!
//! Each resource runs its groups back to back from t = 0 in assignment
//! order. A group occupies its resource for the dispatch overhead, the
//! transfer of its memory image and the computation of its MI. Resources
//! run concurrently; simulated time is continuous.

use std::collections::BTreeMap;

use crate::model::{GroupId, GroupedJob, JobId, Resource, ResourceId};
use crate::scheduler::Assignment;

pub const DEFAULT_OVERHEAD_S: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupTiming {
    pub overhead_s: f64,
    pub transfer_s: f64,
    pub compute_s: f64,
    pub start_s: f64,
    pub finish_s: f64,
}

impl GroupTiming {
    pub fn duration_s(&self) -> f64 {
        self.overhead_s + self.transfer_s + self.compute_s
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScheduleMetrics {
    pub per_group: BTreeMap<GroupId, GroupTiming>,
    pub per_resource: BTreeMap<ResourceId, f64>,
    pub makespan_s: f64,
    pub total_processing_s: f64,
    pub utilization: BTreeMap<ResourceId, f64>,
    pub rejected_jobs: Vec<JobId>,
}

impl ScheduleMetrics {
    /// Mean over every resource known to the run, idle ones included.
    pub fn mean_utilization(&self) -> f64 {
        if self.utilization.is_empty() {
            0.0
        } else {
            self.utilization.values().sum::<f64>() / self.utilization.len() as f64
        }
    }
}

pub fn compute_time_s(group: &GroupedJob, resource: &Resource) -> f64 {
    group.total_mi() / resource.mips
}

pub fn transfer_time_s(group: &GroupedJob, resource: &Resource) -> f64 {
    group.total_memory_mb() / resource.bandwidth_mbps
}

/// Simulates `assignments` in order. `resources` defines the set reported in
/// the per-resource maps; every assigned resource must be in it.
pub fn run_schedule(
    assignments: &[Assignment],
    groups: &[GroupedJob],
    resources: &[Resource],
    overhead_s: f64,
) -> ScheduleMetrics {
    let by_id: BTreeMap<&ResourceId, &Resource> =
        resources.iter().map(|r| (&r.resource_id, r)).collect();
    let mut metrics = ScheduleMetrics {
        per_resource: resources
            .iter()
            .map(|r| (r.resource_id.clone(), 0.0))
            .collect(),
        ..ScheduleMetrics::default()
    };

    for a in assignments {
        let group = groups
            .iter()
            .find(|g| g.group_id == a.group_id)
            .unwrap_or_else(|| panic!("assignment for unknown group {}", a.group_id));
        let resource = by_id
            .get(&a.resource_id)
            .unwrap_or_else(|| panic!("assignment to unknown resource {}", a.resource_id));
        let clock = metrics
            .per_resource
            .get_mut(&a.resource_id)
            .expect("per_resource covers every resource");
        let mut timing = GroupTiming {
            overhead_s,
            transfer_s: transfer_time_s(group, resource),
            compute_s: compute_time_s(group, resource),
            start_s: *clock,
            finish_s: 0.0,
        };
        *clock += timing.duration_s();
        timing.finish_s = *clock;
        metrics.total_processing_s += timing.duration_s();
        metrics.makespan_s = metrics.makespan_s.max(timing.finish_s);
        metrics.per_group.insert(a.group_id, timing);
    }

    // busy time equals the last finish on each resource, so this stays in [0, 1]
    metrics.utilization = metrics
        .per_resource
        .iter()
        .map(|(id, busy)| {
            let u = if metrics.makespan_s > 0.0 {
                busy / metrics.makespan_s
            } else {
                0.0
            };
            (id.clone(), u)
        })
        .collect();
    metrics
}
