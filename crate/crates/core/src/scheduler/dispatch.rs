//! Two-level placement: the global scheduler binds each group to the cluster
//! of its grouping resource, then each cluster's local scheduler may shift
//! queued groups onto idle machines.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::DispatchError;
use crate::model::{
    check_group_feasible, Cluster, ClusterId, GroupId, GroupedJob, GroupingMode, Resource,
    ResourceId, SchedulingParams,
};
use crate::registry::{Availability, Registry};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecidedBy {
    Global,
    Local,
}

impl fmt::Display for DecidedBy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecidedBy::Global => "global",
            DecidedBy::Local => "local",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub group_id: GroupId,
    pub cluster_id: ClusterId,
    pub resource_id: ResourceId,
    pub decided_by: DecidedBy,
}

/// Maps every group onto the cluster owning its resource and marks those
/// resources busy. Nothing is marked unless every group resolves.
pub fn dispatch(
    groups: &[GroupedJob],
    clusters: &[Cluster],
    registry: &mut Registry,
) -> Result<Vec<Assignment>, DispatchError> {
    let mut assignments = Vec::with_capacity(groups.len());
    for group in groups {
        let resource = &group.resource_id;
        if registry.resource_characteristics(resource).is_err() {
            return Err(DispatchError::UnknownResource {
                group: group.group_id.to_string(),
                resource: resource.to_string(),
            });
        }
        let mut owners = clusters.iter().filter(|c| c.contains(resource));
        let cluster = owners.next().ok_or_else(|| DispatchError::Unclustered {
            group: group.group_id.to_string(),
            resource: resource.to_string(),
        })?;
        if owners.next().is_some() {
            return Err(DispatchError::MultipleClusters {
                resource: resource.to_string(),
            });
        }
        assignments.push(Assignment {
            group_id: group.group_id,
            cluster_id: cluster.cluster_id.clone(),
            resource_id: resource.clone(),
            decided_by: DecidedBy::Global,
        });
    }
    for a in &assignments {
        registry
            .set_availability(&a.resource_id, Availability::Busy)
            .expect("resource existence checked above");
    }
    Ok(assignments)
}

#[derive(Debug, Clone)]
pub struct MachineState {
    pub resource: Resource,
    /// Groups queued on the machine by this round of dispatch.
    pub queue_depth: usize,
    /// False when the machine is occupied by work outside this round.
    pub available: bool,
}

/// Per-cluster view used by the local scheduler, in FCFS resource order.
#[derive(Debug, Clone)]
pub struct ClusterState {
    pub cluster_id: ClusterId,
    pub machines: Vec<MachineState>,
}

impl ClusterState {
    /// Counts queued groups per cluster member from the global assignments.
    /// Members missing from `registry` are skipped.
    pub fn observe(cluster: &Cluster, assignments: &[Assignment], registry: &Registry) -> Self {
        let mut depth: BTreeMap<&ResourceId, usize> = BTreeMap::new();
        for a in assignments
            .iter()
            .filter(|a| a.cluster_id == cluster.cluster_id)
        {
            *depth.entry(&a.resource_id).or_default() += 1;
        }
        let mut machines: Vec<MachineState> = cluster
            .resource_ids
            .iter()
            .filter_map(|id| {
                let resource = registry.resource_characteristics(id).ok()?.clone();
                let queue_depth = depth.get(id).copied().unwrap_or(0);
                let available =
                    queue_depth > 0 || registry.availability(id) == Some(Availability::Available);
                Some(MachineState {
                    resource,
                    queue_depth,
                    available,
                })
            })
            .collect();
        machines.sort_by(|a, b| {
            a.resource
                .enter_time
                .total_cmp(&b.resource.enter_time)
                .then_with(|| a.resource.resource_id.cmp(&b.resource.resource_id))
        });
        Self {
            cluster_id: cluster.cluster_id.clone(),
            machines,
        }
    }

    fn index_of(&self, id: &ResourceId) -> Option<usize> {
        self.machines
            .iter()
            .position(|m| &m.resource.resource_id == id)
    }
}

/// Moves queued groups off backlogged machines (two or more groups queued)
/// onto strictly idle machines of the same cluster with at least the same
/// MIPS, picking the first candidate in FCFS order on which the group is
/// still feasible under `mode`. The tail of each queue moves first; the
/// head stays where the global scheduler put it.
pub fn local_refine(
    assignments: &[Assignment],
    state: &ClusterState,
    groups: &[GroupedJob],
    params: &SchedulingParams,
    mode: GroupingMode,
) -> Vec<Assignment> {
    let mut machines = state.machines.clone();
    let mut refined = assignments.to_vec();
    for a in refined.iter_mut().rev() {
        if a.cluster_id != state.cluster_id {
            continue;
        }
        let Some(src) = state.index_of(&a.resource_id) else {
            continue;
        };
        if machines[src].queue_depth < 2 {
            continue;
        }
        let Some(group) = groups.iter().find(|g| g.group_id == a.group_id) else {
            continue;
        };
        let src_mips = machines[src].resource.mips;
        let target = machines.iter().position(|m| {
            m.available
                && m.queue_depth == 0
                && m.resource.mips >= src_mips
                && check_group_feasible(group, &m.resource, params, mode).is_feasible()
        });
        if let Some(dst) = target {
            machines[src].queue_depth -= 1;
            machines[dst].queue_depth += 1;
            a.resource_id = machines[dst].resource.resource_id.clone();
            a.decided_by = DecidedBy::Local;
        }
    }
    refined
}
